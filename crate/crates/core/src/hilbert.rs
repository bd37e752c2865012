//! Composite systems: labeled layouts, density matrices, partial traces,
//! subsystem permutations, copy symmetrization and purification.
//!
//! Basis ordering is most-significant-first: the leftmost label in a layout
//! varies slowest in the computational basis index.

use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, HermitianEig};
use crate::measures::ToleranceProfile;

const MAX_SYMMETRIZED_COPIES: usize = 6;

/// Ordered list of labeled subsystem dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<(String, usize)>", into = "Vec<(String, usize)>")]
pub struct SystemLayout {
    subsystems: Vec<(String, usize)>,
}

impl SystemLayout {
    pub fn new<S: Into<String>>(subsystems: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let subsystems: Vec<(String, usize)> = subsystems.into_iter().map(|(l, d)| (l.into(), d)).collect();
        let mut seen = HashSet::new();
        for (label, dim) in &subsystems {
            if label.is_empty() {
                return Err(Error::Parse("empty subsystem label".into()));
            }
            if *dim == 0 {
                return Err(Error::DimensionMismatch(format!("subsystem `{label}` has dimension 0")));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::LabelCollision(label.clone()));
            }
        }
        Ok(Self { subsystems })
    }

    /// Layout with no subsystems (total dimension 1).
    pub fn empty() -> Self {
        Self { subsystems: Vec::new() }
    }

    /// Convenience for tests and builtins: `SystemLayout::qubits(&["A", "B"])`.
    pub fn qubits<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        Self::new(labels.iter().map(|l| (l.as_ref().to_string(), 2)))
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn subsystems(&self) -> &[(String, usize)] {
        &self.subsystems
    }

    pub fn labels(&self) -> Vec<&str> {
        self.subsystems.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subsystems.iter().map(|&(_, d)| d).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.subsystems.iter().map(|&(_, d)| d).product()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.subsystems.iter().any(|(l, _)| l == label)
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.subsystems.iter().position(|(l, _)| l == label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.subsystems[self.index_of(label)?].1)
    }

    /// Product of the dimensions of `labels`.
    pub fn dim_of_set<S: AsRef<str>>(&self, labels: &[S]) -> Result<usize> {
        labels.iter().try_fold(1, |acc, l| Ok(acc * self.dim_of(l.as_ref())?))
    }

    /// Positions of `labels`, rejecting unknown and repeated labels.
    pub fn indices_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let i = self.index_of(l.as_ref())?;
            if out.contains(&i) {
                return Err(Error::LabelCollision(l.as_ref().to_string()));
            }
            out.push(i);
        }
        Ok(out)
    }

    /// Layout restricted to `labels`, in the order given.
    pub fn select<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let idx = self.indices_of(labels)?;
        Ok(Self { subsystems: idx.iter().map(|&i| self.subsystems[i].clone()).collect() })
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        Self::new(self.subsystems.iter().chain(&other.subsystems).cloned())
    }

    pub fn with_label_replaced(&self, old: &str, new: &str) -> Result<Self> {
        let i = self.index_of(old)?;
        let mut subsystems = self.subsystems.clone();
        subsystems[i].0 = new.to_string();
        Self::new(subsystems)
    }
}

impl TryFrom<Vec<(String, usize)>> for SystemLayout {
    type Error = Error;
    fn try_from(v: Vec<(String, usize)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SystemLayout> for Vec<(String, usize)> {
    fn from(l: SystemLayout) -> Self {
        l.subsystems
    }
}

impl fmt::Display for SystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.subsystems.iter().map(|(l, d)| format!("{l}:{d}")).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// Maps each basis index of the permuted space to the index in the original
/// space. Factor `p` of the new space is factor `src[p]` of the old one.
pub(crate) fn permutation_index_map(dims: &[usize], src: &[usize]) -> Vec<usize> {
    let n = dims.len();
    let mut old_stride = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        old_stride[i] = old_stride[i + 1] * dims[i + 1];
    }
    let new_dims: Vec<usize> = src.iter().map(|&s| dims[s]).collect();
    let total: usize = dims.iter().product();
    let mut map = Vec::with_capacity(total);
    let mut digits = vec![0usize; n];
    for _ in 0..total {
        map.push(digits.iter().zip(src).map(|(&d, &s)| d * old_stride[s]).sum());
        for p in (0..n).rev() {
            digits[p] += 1;
            if digits[p] < new_dims[p] {
                break;
            }
            digits[p] = 0;
        }
    }
    map
}

fn permute_matrix(m: &ComplexMatrix, map: &[usize]) -> ComplexMatrix {
    ComplexMatrix::from_fn(map.len(), map.len(), |r, c| m[(map[r], map[c])])
}

/// All permutations of 0..k in lexicographic order.
pub(crate) fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// Hermitian, PSD, unit-trace operator bound to a layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateJson", into = "StateJson")]
pub struct DensityMatrix {
    layout: SystemLayout,
    data: ComplexMatrix,
}

/// Wire format shared by state files and reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateJson {
    pub layout: SystemLayout,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl TryFrom<StateJson> for DensityMatrix {
    type Error = Error;
    fn try_from(s: StateJson) -> Result<Self> {
        let data = ComplexMatrix::from_re_im(&s.re, &s.im)?;
        DensityMatrix::new(s.layout, data)
    }
}

impl From<DensityMatrix> for StateJson {
    fn from(d: DensityMatrix) -> Self {
        StateJson { re: d.data.re_rows(), im: d.data.im_rows(), layout: d.layout }
    }
}

impl DensityMatrix {
    /// Validates with the default tolerance profile.
    pub fn new(layout: SystemLayout, data: ComplexMatrix) -> Result<Self> {
        Self::new_with_tolerance(layout, data, &ToleranceProfile::default())
    }

    pub fn new_with_tolerance(layout: SystemLayout, data: ComplexMatrix, tol: &ToleranceProfile) -> Result<Self> {
        let d = layout.total_dim();
        if data.rows() != d || data.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "layout {layout} needs a {d}x{d} matrix, got {}x{}",
                data.rows(),
                data.cols()
            )));
        }
        let herm = data.hermiticity_error();
        if herm > tol.hermiticity {
            return Err(Error::NotHermitian(herm));
        }
        let tr = data.trace();
        if (tr.re - 1.0).abs() > tol.trace || tr.im.abs() > tol.trace {
            return Err(Error::InvalidState(format!("trace {} differs from 1", tr.re)));
        }
        let min = linalg::hermitian_eigenvalues(&data, tol.hermiticity)?.first().copied().unwrap_or(0.0);
        if min < -tol.psd {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { layout, data: data.hermitian_part() })
    }

    /// For results of operations that preserve validity up to rounding.
    pub(crate) fn from_parts_unchecked(layout: SystemLayout, data: ComplexMatrix) -> Self {
        debug_assert_eq!(layout.total_dim(), data.rows());
        Self { layout, data: data.hermitian_part() }
    }

    /// Projects an approximately valid operator onto the state space: clips
    /// negative eigenvalues and renormalizes. Used after iterative optimizers.
    pub(crate) fn from_parts_clipped(layout: SystemLayout, data: &ComplexMatrix) -> Result<Self> {
        let eig = linalg::hermitian_eig(data, f64::INFINITY)?;
        let m = eig.reconstruct_with(|l| C64::new(l.max(0.0), 0.0));
        let tr = m.trace().re;
        if tr <= 0.0 {
            return Err(Error::InvalidState("operator has no positive part".into()));
        }
        Ok(Self::from_parts_unchecked(layout, m.scale(1.0 / tr)))
    }

    pub fn maximally_mixed(layout: SystemLayout) -> Self {
        let d = layout.total_dim();
        Self { layout, data: ComplexMatrix::identity(d).scale(1.0 / d as f64) }
    }

    /// |k><k| for computational basis index `k`.
    pub fn basis_state(layout: SystemLayout, k: usize) -> Result<Self> {
        let d = layout.total_dim();
        if k >= d {
            return Err(Error::DimensionMismatch(format!("basis index {k} out of range {d}")));
        }
        let mut m = ComplexMatrix::zeros(d, d);
        m[(k, k)] = C64::new(1.0, 0.0);
        Ok(Self { layout, data: m })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self { layout: psi.layout.clone(), data: ComplexMatrix::outer(&psi.amplitudes, &psi.amplitudes) }
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.rows()
    }

    pub fn eig(&self) -> Result<HermitianEig> {
        linalg::hermitian_eig(&self.data, f64::INFINITY)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::hermitian_eigenvalues(&self.data, f64::INFINITY)
    }

    /// Number of eigenvalues above the default relative support cutoff.
    pub fn rank(&self) -> Result<usize> {
        let ev = self.eigenvalues()?;
        let cutoff = 1e-10 * ev.last().copied().unwrap_or(0.0);
        Ok(ev.iter().filter(|&&l| l > cutoff).count())
    }

    /// Partial trace keeping `keep` (in layout order). An empty `keep` yields
    /// the 1x1 state on the empty layout.
    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let mut keep_idx = self.layout.indices_of(keep)?;
        keep_idx.sort_unstable();
        if keep_idx.len() == self.layout.len() {
            return Ok(self.clone());
        }
        let dims = self.layout.dims();
        let n = dims.len();
        let traced: Vec<usize> = (0..n).filter(|i| !keep_idx.contains(i)).collect();
        let mut src = keep_idx.clone();
        src.extend(&traced);
        let map = permutation_index_map(&dims, &src);
        let dk: usize = keep_idx.iter().map(|&i| dims[i]).product();
        let dt: usize = traced.iter().map(|&i| dims[i]).product();
        let mut out = ComplexMatrix::zeros(dk, dk);
        for a in 0..dk {
            for b in 0..dk {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..dt {
                    acc += self.data[(map[a * dt + t], map[b * dt + t])];
                }
                out[(a, b)] = acc;
            }
        }
        let layout = SystemLayout { subsystems: keep_idx.iter().map(|&i| self.layout.subsystems[i].clone()).collect() };
        Ok(Self::from_parts_unchecked(layout, out))
    }

    /// Partial trace over `remove`.
    pub fn trace_out<S: AsRef<str>>(&self, remove: &[S]) -> Result<Self> {
        self.layout.indices_of(remove)?;
        let removed: Vec<&str> = remove.iter().map(|s| s.as_ref()).collect();
        let keep: Vec<&str> = self.layout.labels().into_iter().filter(|l| !removed.contains(l)).collect();
        self.partial_trace(&keep)
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(Self { layout, data: self.data.kron(&other.data) })
    }

    /// The same state with subsystems listed in `order` (a permutation of the
    /// labels); labels travel with their content.
    pub fn reordered<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        if order.len() != self.layout.len() {
            return Err(Error::LayoutMismatch(format!(
                "reordering needs all {} labels, got {}",
                self.layout.len(),
                order.len()
            )));
        }
        let src = self.layout.indices_of(order)?;
        if src.iter().enumerate().all(|(i, &s)| i == s) {
            return Ok(self.clone());
        }
        let map = permutation_index_map(&self.layout.dims(), &src);
        Ok(Self { layout: self.layout.select(order)?, data: permute_matrix(&self.data, &map) })
    }

    /// Conjugation by the permutation unitary W^π: the content of subsystem
    /// `from` moves to the slot labeled `to`. Labels not mentioned stay put.
    /// The moved labels must form a bijection and share dimensions.
    pub fn permute_subsystems<S: AsRef<str>>(&self, moves: &[(S, S)]) -> Result<Self> {
        let n = self.layout.len();
        let mut src: Vec<usize> = (0..n).collect();
        let mut targets = HashSet::new();
        let mut sources = HashSet::new();
        for (from, to) in moves {
            let f = self.layout.index_of(from.as_ref())?;
            let t = self.layout.index_of(to.as_ref())?;
            if !sources.insert(f) {
                return Err(Error::LabelCollision(from.as_ref().to_string()));
            }
            if !targets.insert(t) {
                return Err(Error::LabelCollision(to.as_ref().to_string()));
            }
            if self.layout.subsystems[f].1 != self.layout.subsystems[t].1 {
                return Err(Error::DimensionMismatch(format!(
                    "cannot move `{}` onto `{}`",
                    from.as_ref(),
                    to.as_ref()
                )));
            }
            src[t] = f;
        }
        if sources != targets {
            return Err(Error::LayoutMismatch("subsystem moves are not a permutation".into()));
        }
        let map = permutation_index_map(&self.layout.dims(), &src);
        Ok(Self { layout: self.layout.clone(), data: permute_matrix(&self.data, &map) })
    }

    /// Uniform average over every permutation of the subsystems within each
    /// group (exact enumeration, k ≤ 6 per group).
    pub fn symmetrize_copies<S: AsRef<str>>(&self, groups: &[Vec<S>]) -> Result<Self> {
        let dims = self.layout.dims();
        let mut data = self.data.clone();
        for group in groups {
            let idx = self.layout.indices_of(group)?;
            let k = idx.len();
            if k > MAX_SYMMETRIZED_COPIES {
                return Err(Error::TooManyCopies(k));
            }
            if let Some(&first) = idx.first() {
                if idx.iter().any(|&i| dims[i] != dims[first]) {
                    return Err(Error::DimensionMismatch(
                        "copies in a symmetrization group differ in dimension".into(),
                    ));
                }
            }
            if k <= 1 {
                continue;
            }
            let perms = all_permutations(k);
            let mut acc = ComplexMatrix::zeros(data.rows(), data.cols());
            for p in &perms {
                let mut src: Vec<usize> = (0..dims.len()).collect();
                for (i, &pi) in p.iter().enumerate() {
                    src[idx[pi]] = idx[i];
                }
                let map = permutation_index_map(&dims, &src);
                let moved = permute_matrix(&data, &map);
                for (a, b) in acc.as_mut_slice().iter_mut().zip(moved.as_slice()) {
                    *a += b;
                }
            }
            data = acc.scale(1.0 / perms.len() as f64);
        }
        Ok(Self::from_parts_unchecked(self.layout.clone(), data))
    }

    /// Spectral purification with a reference of dimension rank(ρ); the
    /// reference is appended as the last subsystem.
    pub fn purify(&self, ref_label: &str) -> Result<PureState> {
        if self.layout.contains(ref_label) {
            return Err(Error::LabelCollision(ref_label.to_string()));
        }
        let eig = self.eig()?;
        let cutoff = linalg::default_support_cutoff(&eig);
        let mut support: Vec<usize> = (0..eig.dim()).filter(|&k| eig.eigenvalues[k] > cutoff).collect();
        support.reverse();
        let r = support.len().max(1);
        let d = self.dim();
        let mut amps = vec![C64::new(0.0, 0.0); d * r];
        for (j, &k) in support.iter().enumerate() {
            let w = eig.eigenvalues[k].sqrt();
            for i in 0..d {
                amps[i * r + j] = eig.eigenvectors[(i, k)] * w;
            }
        }
        let norm = linalg::vec_norm(&amps);
        for a in &mut amps {
            *a /= norm;
        }
        let layout = self.layout.concat(&SystemLayout::new([(ref_label, r)])?)?;
        Ok(PureState { layout, amplitudes: amps })
    }

    /// Reorders the state so each part is contiguous and fuses every part
    /// into one subsystem. Single-label parts keep their label; larger parts
    /// are named by joining their labels with `+`.
    pub fn merge_parts<S: AsRef<str>>(&self, parts: &[Vec<S>]) -> Result<Self> {
        let order: Vec<&str> = parts.iter().flat_map(|p| p.iter().map(|s| s.as_ref())).collect();
        let r = self.reordered(&order)?;
        let mut subsystems = Vec::with_capacity(parts.len());
        for p in parts {
            let labels: Vec<&str> = p.iter().map(|s| s.as_ref()).collect();
            subsystems.push((labels.join("+"), self.layout.dim_of_set(&labels)?));
        }
        Ok(Self { layout: SystemLayout::new(subsystems)?, data: r.data })
    }

    pub fn relabel(&self, old: &str, new: &str) -> Result<Self> {
        Ok(Self { layout: self.layout.with_label_replaced(old, new)?, data: self.data.clone() })
    }

    /// The same matrix on a layout with identical dimensions.
    pub fn with_layout(&self, layout: SystemLayout) -> Result<Self> {
        if layout.dims() != self.layout.dims() {
            return Err(Error::LayoutMismatch(format!("{layout} vs {}", self.layout)));
        }
        Ok(Self { layout, data: self.data.clone() })
    }

    /// Convex combination Σ w_i ρ_i over states sharing one layout.
    pub fn mixture(weights: &[f64], states: &[Self]) -> Result<Self> {
        let first = states.first().ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        if weights.len() != states.len() {
            return Err(Error::ArityMismatch { expected: states.len(), got: weights.len() });
        }
        let mut acc = ComplexMatrix::zeros(first.dim(), first.dim());
        for (w, s) in weights.iter().zip(states) {
            if s.layout != first.layout {
                return Err(Error::LayoutMismatch(format!("{} vs {}", s.layout, first.layout)));
            }
            acc = &acc + &s.data.scale(*w);
        }
        Self::new(first.layout.clone(), acc)
    }

    pub fn to_json(&self) -> StateJson {
        self.clone().into()
    }
}

/// Normalized state vector bound to a layout.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    layout: SystemLayout,
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(layout: SystemLayout, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "layout {layout} needs {} amplitudes, got {}",
                layout.total_dim(),
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        let norm = linalg::vec_norm(&amplitudes);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("norm {norm} differs from 1")));
        }
        Ok(Self { layout, amplitudes })
    }

    /// Normalizes the given vector.
    pub fn normalized(layout: SystemLayout, mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm = linalg::vec_norm(&amplitudes);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Self::new(layout, amplitudes)
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }

    /// Subsystems listed in `order`, labels travelling with content.
    pub fn reordered<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        if order.len() != self.layout.len() {
            return Err(Error::LayoutMismatch("reordering needs every label".into()));
        }
        let src = self.layout.indices_of(order)?;
        let map = permutation_index_map(&self.layout.dims(), &src);
        Ok(Self { layout: self.layout.select(order)?, amplitudes: map.iter().map(|&i| self.amplitudes[i]).collect() })
    }
}
