//! Quantum channels in Kraus form: measurements, measure-and-prepare maps,
//! isometric extensions, reversal maps and rotated Petz recovery maps.
//!
//! A channel acts on the subsystems named in its input layout; every other
//! subsystem of the state it is applied to is left untouched. The output
//! subsystems take the place of the first input subsystem.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{permutation_index_map, DensityMatrix, SystemLayout};
use crate::linalg::{self, ComplexMatrix};

const TP_TOL: f64 = 1e-9;
const POVM_TOL: f64 = 1e-9;
const DROP_EFFECT: f64 = 1e-12;

/// CPTP map with Kraus operators of shape out_dim × in_dim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelJson", into = "ChannelJson")]
pub struct Channel {
    in_layout: SystemLayout,
    out_layout: SystemLayout,
    kraus: Vec<ComplexMatrix>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&ComplexMatrix> for MatrixJson {
    fn from(m: &ComplexMatrix) -> Self {
        Self { re: m.re_rows(), im: m.im_rows() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelJson {
    pub in_layout: SystemLayout,
    pub out_layout: SystemLayout,
    pub kraus: Vec<MatrixJson>,
}

impl TryFrom<ChannelJson> for Channel {
    type Error = Error;
    fn try_from(j: ChannelJson) -> Result<Self> {
        let kraus = j.kraus.iter().map(|m| ComplexMatrix::from_re_im(&m.re, &m.im)).collect::<Result<Vec<_>>>()?;
        Channel::new(j.in_layout, j.out_layout, kraus)
    }
}

impl From<Channel> for ChannelJson {
    fn from(c: Channel) -> Self {
        Self { kraus: c.kraus.iter().map(MatrixJson::from).collect(), in_layout: c.in_layout, out_layout: c.out_layout }
    }
}

impl Channel {
    /// Validates shapes and trace preservation.
    pub fn new(in_layout: SystemLayout, out_layout: SystemLayout, kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let (din, dout) = (in_layout.total_dim(), out_layout.total_dim());
        if kraus.is_empty() {
            return Err(Error::InvalidChannel("no Kraus operators".into()));
        }
        for k in &kraus {
            if k.rows() != dout || k.cols() != din {
                return Err(Error::InvalidChannel(format!(
                    "Kraus operator is {}x{}, expected {dout}x{din}",
                    k.rows(),
                    k.cols()
                )));
            }
        }
        let ch = Self { in_layout, out_layout, kraus };
        let err = ch.trace_preservation_error();
        if err > TP_TOL {
            return Err(Error::InvalidChannel(format!("Σ K†K deviates from identity by {err:.3e}")));
        }
        Ok(ch)
    }

    pub(crate) fn new_unchecked(in_layout: SystemLayout, out_layout: SystemLayout, kraus: Vec<ComplexMatrix>) -> Self {
        Self { in_layout, out_layout, kraus }
    }

    pub fn identity(layout: SystemLayout) -> Self {
        let d = layout.total_dim();
        Self { in_layout: layout.clone(), out_layout: layout, kraus: vec![ComplexMatrix::identity(d)] }
    }

    pub fn unitary(layout: SystemLayout, u: ComplexMatrix) -> Result<Self> {
        Self::new(layout.clone(), layout, vec![u])
    }

    /// ρ ↦ Tr(ρ) I/d.
    pub fn completely_depolarizing(layout: SystemLayout) -> Self {
        let d = layout.total_dim();
        let s = 1.0 / (d as f64).sqrt();
        let mut kraus = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut k = ComplexMatrix::zeros(d, d);
                k[(i, j)] = C64::new(s, 0.0);
                kraus.push(k);
            }
        }
        Self { in_layout: layout.clone(), out_layout: layout, kraus }
    }

    /// ρ ↦ Tr(ρ) σ, discarding `in_layout` and preparing σ on its layout.
    pub fn replacement(in_layout: SystemLayout, sigma: &DensityMatrix) -> Result<Self> {
        let din = in_layout.total_dim();
        let eig = sigma.eig()?;
        let mut kraus = Vec::new();
        for k in 0..eig.dim() {
            let w = eig.eigenvalues[k];
            if w <= 1e-14 {
                continue;
            }
            let v: Vec<C64> = eig.vector(k).iter().map(|z| z * w.sqrt()).collect();
            for j in 0..din {
                let mut e = vec![C64::new(0.0, 0.0); din];
                e[j] = C64::new(1.0, 0.0);
                kraus.push(ComplexMatrix::outer(&v, &e));
            }
        }
        Self::new(in_layout, sigma.layout().clone(), kraus)
    }

    pub fn in_layout(&self) -> &SystemLayout {
        &self.in_layout
    }

    pub fn out_layout(&self) -> &SystemLayout {
        &self.out_layout
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    /// ‖Σ K†K − I‖_max.
    pub fn trace_preservation_error(&self) -> f64 {
        let din = self.in_layout.total_dim();
        let mut acc = ComplexMatrix::zeros(din, din);
        for k in &self.kraus {
            acc = &acc + &k.adjoint_matmul(k);
        }
        acc.max_abs_diff(&ComplexMatrix::identity(din))
    }

    /// `second ∘ self`; the second channel must take this channel's output.
    pub fn then(&self, second: &Channel) -> Result<Channel> {
        if second.in_layout != self.out_layout {
            return Err(Error::LayoutMismatch(format!(
                "cannot feed {} into a channel expecting {}",
                self.out_layout, second.in_layout
            )));
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * second.kraus.len());
        for b in &second.kraus {
            for a in &self.kraus {
                let k = b.matmul(a);
                if k.max_abs() > 1e-15 {
                    kraus.push(k);
                }
            }
        }
        if kraus.is_empty() {
            kraus.push(ComplexMatrix::zeros(second.out_layout.total_dim(), self.in_layout.total_dim()));
        }
        Ok(Channel::new_unchecked(self.in_layout.clone(), second.out_layout.clone(), kraus))
    }

    /// Tensor product of channels on disjoint subsystems.
    pub fn tensor(&self, other: &Channel) -> Result<Channel> {
        let in_layout = self.in_layout.concat(&other.in_layout)?;
        let out_layout = self.out_layout.concat(&other.out_layout)?;
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(a.kron(b));
            }
        }
        Ok(Channel::new_unchecked(in_layout, out_layout, kraus))
    }

    /// Same Kraus operators with a relabeled input layout (dimensions must agree).
    pub fn with_in_layout(&self, layout: SystemLayout) -> Result<Channel> {
        if layout.dims() != self.in_layout.dims() {
            return Err(Error::LayoutMismatch(format!("{layout} vs {}", self.in_layout)));
        }
        Ok(Channel { in_layout: layout, ..self.clone() })
    }

    pub fn with_out_layout(&self, layout: SystemLayout) -> Result<Channel> {
        if layout.dims() != self.out_layout.dims() {
            return Err(Error::LayoutMismatch(format!("{layout} vs {}", self.out_layout)));
        }
        Ok(Channel { out_layout: layout, ..self.clone() })
    }
}

/// Applies a channel to the subsystems of `rho` named by its input layout.
pub fn apply_channel(ch: &Channel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let layout = rho.layout();
    for (label, dim) in ch.in_layout.subsystems() {
        let d = layout
            .dim_of(label)
            .map_err(|_| Error::LayoutMismatch(format!("state {layout} lacks channel input `{label}`")))?;
        if d != *dim {
            return Err(Error::LayoutMismatch(format!("`{label}` has dimension {d}, channel expects {dim}")));
        }
    }
    let in_labels = ch.in_layout.labels();
    let rest: Vec<&str> = layout.labels().into_iter().filter(|l| !in_labels.contains(l)).collect();
    for l in ch.out_layout.labels() {
        if rest.contains(&l) {
            return Err(Error::LabelCollision(l.to_string()));
        }
    }

    let mut order: Vec<&str> = in_labels.clone();
    order.extend(&rest);
    let r = rho.reordered(&order)?;
    let din = ch.in_layout.total_dim();
    let dout = ch.out_layout.total_dim();
    let dr = layout.total_dim() / din;
    let out = apply_kraus_blocks(&ch.kraus, r.matrix(), din, dout, dr);

    let rest_layout = layout.select(&rest)?;
    let mid_layout = ch.out_layout.concat(&rest_layout)?;
    let mid = DensityMatrix::from_parts_unchecked(mid_layout, out);

    // Output subsystems go where the first input subsystem was.
    let first_in = in_labels.iter().filter_map(|l| layout.index_of(l).ok()).min();
    let mut final_order: Vec<&str> = Vec::new();
    let out_labels = ch.out_layout.labels();
    match first_in {
        Some(pos) => {
            for (i, l) in layout.labels().into_iter().enumerate() {
                if i == pos {
                    final_order.extend(&out_labels);
                }
                if !in_labels.contains(&l) {
                    final_order.push(l);
                }
            }
        }
        None => {
            final_order.extend(&rest);
            final_order.extend(&out_labels);
        }
    }
    mid.reordered(&final_order)
}

/// Σ_K (K ⊗ I_r) R (K ⊗ I_r)† for R of shape (din·dr)².
fn apply_kraus_blocks(kraus: &[ComplexMatrix], r: &ComplexMatrix, din: usize, dout: usize, dr: usize) -> ComplexMatrix {
    let n_in = din * dr;
    let n_out = dout * dr;
    let zero = C64::new(0.0, 0.0);
    let mut out = vec![zero; n_out * n_out];
    let mut m = vec![zero; n_out * n_in];
    let rs = r.as_slice();
    for k in kraus {
        // m = (K ⊗ I) R
        m.iter_mut().for_each(|z| *z = zero);
        for a in 0..dout {
            for i in 0..din {
                let kai = k[(a, i)];
                if kai.re == 0.0 && kai.im == 0.0 {
                    continue;
                }
                for x in 0..dr {
                    let src = &rs[(i * dr + x) * n_in..(i * dr + x + 1) * n_in];
                    let dst = &mut m[(a * dr + x) * n_in..(a * dr + x + 1) * n_in];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += kai * s;
                    }
                }
            }
        }
        // out += m (K ⊗ I)†
        for b in 0..dout {
            for j in 0..din {
                let kbj = k[(b, j)].conj();
                if kbj.re == 0.0 && kbj.im == 0.0 {
                    continue;
                }
                for row in 0..n_out {
                    let mrow = &m[row * n_in + j * dr..row * n_in + (j + 1) * dr];
                    let orow = &mut out[row * n_out + b * dr..row * n_out + (b + 1) * dr];
                    for (o, v) in orow.iter_mut().zip(mrow) {
                        *o += v * kbj;
                    }
                }
            }
        }
    }
    ComplexMatrix::from_vec_unchecked(n_out, n_out, out)
}

/// Embeds an operator on `labels` into the full layout as op ⊗ I.
pub fn embed_operator<S: AsRef<str>>(op: &ComplexMatrix, labels: &[S], layout: &SystemLayout) -> Result<ComplexMatrix> {
    let idx = layout.indices_of(labels)?;
    let dims = layout.dims();
    let d_op: usize = idx.iter().map(|&i| dims[i]).product();
    if op.rows() != d_op || op.cols() != d_op {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, subsystems need {d_op}",
            op.rows(),
            op.cols()
        )));
    }
    let rest: Vec<usize> = (0..dims.len()).filter(|i| !idx.contains(i)).collect();
    let d_rest: usize = rest.iter().map(|&i| dims[i]).product();
    let block = op.kron(&ComplexMatrix::identity(d_rest));
    // factor order of `block` is idx ++ rest; move each factor back to its layout slot
    let q: Vec<usize> = idx.iter().chain(&rest).copied().collect();
    let q_dims: Vec<usize> = q.iter().map(|&i| dims[i]).collect();
    let src: Vec<usize> = (0..dims.len()).map(|p| q.iter().position(|&x| x == p).unwrap()).collect();
    let map = permutation_index_map(&q_dims, &src);
    Ok(ComplexMatrix::from_fn(map.len(), map.len(), |r, c| block[(map[r], map[c])]))
}

/// (√μ, unit eigenvector) pairs of one effect.
type RankOneTerms = Vec<(f64, Vec<C64>)>;

/// Finite POVM on one labeled subsystem; outcome x is the index of its effect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PovmJson", into = "PovmJson")]
pub struct Povm {
    system: String,
    dim: usize,
    effects: Vec<ComplexMatrix>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PovmJson {
    pub system: String,
    pub effects: Vec<MatrixJson>,
}

impl TryFrom<PovmJson> for Povm {
    type Error = Error;
    fn try_from(j: PovmJson) -> Result<Self> {
        let effects = j.effects.iter().map(|m| ComplexMatrix::from_re_im(&m.re, &m.im)).collect::<Result<Vec<_>>>()?;
        Povm::new(&j.system, effects)
    }
}

impl From<Povm> for PovmJson {
    fn from(p: Povm) -> Self {
        Self { effects: p.effects.iter().map(MatrixJson::from).collect(), system: p.system }
    }
}

impl Povm {
    pub fn new(system: &str, effects: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = effects.first().map(ComplexMatrix::rows).ok_or_else(|| Error::InvalidPovm("no effects".into()))?;
        let mut sum = ComplexMatrix::zeros(dim, dim);
        for (x, e) in effects.iter().enumerate() {
            if e.rows() != dim || e.cols() != dim {
                return Err(Error::InvalidPovm(format!("effect {x} has the wrong shape")));
            }
            if e.hermiticity_error() > 1e-10 {
                return Err(Error::InvalidPovm(format!("effect {x} is not Hermitian")));
            }
            let min = linalg::hermitian_eigenvalues(e, f64::INFINITY)?[0];
            if min < -1e-10 {
                return Err(Error::InvalidPovm(format!("effect {x} has eigenvalue {min:.3e}")));
            }
            sum = &sum + e;
        }
        let err = sum.max_abs_diff(&ComplexMatrix::identity(dim));
        if err > POVM_TOL {
            return Err(Error::InvalidPovm(format!("effects sum to identity only within {err:.3e}")));
        }
        let effects = effects.iter().map(ComplexMatrix::hermitian_part).collect();
        Ok(Self { system: system.to_string(), dim, effects })
    }

    /// Rank-one projective measurement onto the columns of a unitary.
    pub fn from_basis(system: &str, basis: &ComplexMatrix) -> Result<Self> {
        let effects = (0..basis.cols())
            .map(|c| {
                let v = basis.column(c);
                ComplexMatrix::outer(&v, &v)
            })
            .collect();
        Self::new(system, effects)
    }

    pub fn computational(system: &str, dim: usize) -> Self {
        Self::from_basis(system, &ComplexMatrix::identity(dim)).expect("identity basis is a valid POVM")
    }

    /// Single-effect POVM {I}.
    pub fn trivial(system: &str, dim: usize) -> Self {
        Self { system: system.to_string(), dim, effects: vec![ComplexMatrix::identity(dim)] }
    }

    pub fn system(&self) -> &str {
        &self.system
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    /// Same effects on another subsystem label.
    pub fn relabeled(&self, system: &str) -> Self {
        Self { system: system.to_string(), ..self.clone() }
    }

    fn layout(&self) -> Result<SystemLayout> {
        SystemLayout::new([(self.system.clone(), self.dim)])
    }

    /// Rank-one decomposition: per outcome, the list of (√μ, eigenvector).
    fn rank_one_terms(&self) -> Result<Vec<RankOneTerms>> {
        self.effects
            .iter()
            .map(|e| {
                if e.max_abs() <= DROP_EFFECT {
                    return Ok(Vec::new());
                }
                let eig = linalg::hermitian_eig(e, f64::INFINITY)?;
                let cut = DROP_EFFECT.max(1e-13 * eig.max_eigenvalue());
                Ok((0..eig.dim())
                    .rev()
                    .filter(|&k| eig.eigenvalues[k] > cut)
                    .map(|k| (eig.eigenvalues[k].sqrt(), eig.vector(k)))
                    .collect())
            })
            .collect()
    }
}

pub fn classical_label(system: &str) -> String {
    format!("X{system}")
}

pub fn environment_label(system: &str) -> String {
    format!("E{system}")
}

/// ρ ↦ Σ_x Tr(Λ_x ρ) |x⟩⟨x| on a register labeled `X<system>`.
pub fn measurement_channel(povm: &Povm) -> Result<Channel> {
    let nx = povm.outcomes();
    let mut kraus = Vec::new();
    for (x, terms) in povm.rank_one_terms()?.into_iter().enumerate() {
        let mut ket = vec![C64::new(0.0, 0.0); nx];
        ket[x] = C64::new(1.0, 0.0);
        for (s, v) in terms {
            let scaled: Vec<C64> = v.iter().map(|z| z * s).collect();
            kraus.push(ComplexMatrix::outer(&ket, &scaled));
        }
    }
    Channel::new(povm.layout()?, SystemLayout::new([(classical_label(&povm.system), nx)])?, kraus)
}

/// Stinespring isometry of a measurement map; the environment records
/// (outcome, rank-one index) so tracing it leaves a classical register.
#[derive(Clone, Debug, PartialEq)]
pub struct IsometricExtension {
    pub isometry: ComplexMatrix,
    pub system: String,
    pub in_dim: usize,
    pub x_label: String,
    pub x_dim: usize,
    pub e_label: String,
    pub e_dim: usize,
}

impl IsometricExtension {
    pub fn in_layout(&self) -> Result<SystemLayout> {
        SystemLayout::new([(self.system.clone(), self.in_dim)])
    }

    pub fn out_layout(&self) -> Result<SystemLayout> {
        SystemLayout::new([(self.x_label.clone(), self.x_dim), (self.e_label.clone(), self.e_dim)])
    }

    pub fn as_channel(&self) -> Result<Channel> {
        Channel::new(self.in_layout()?, self.out_layout()?, vec![self.isometry.clone()])
    }
}

pub fn isometric_extension(povm: &Povm) -> Result<IsometricExtension> {
    let terms = povm.rank_one_terms()?;
    let nx = povm.outcomes();
    let ne: usize = terms.iter().map(Vec::len).sum::<usize>().max(1);
    let d = povm.dim;
    let mut u = ComplexMatrix::zeros(nx * ne, d);
    let mut e_idx = 0;
    for (x, ts) in terms.iter().enumerate() {
        for (s, v) in ts {
            let row = x * ne + e_idx;
            for (col, z) in v.iter().enumerate() {
                u[(row, col)] = z.conj() * *s;
            }
            e_idx += 1;
        }
    }
    let err = u.adjoint_matmul(&u).max_abs_diff(&ComplexMatrix::identity(d));
    if err > TP_TOL {
        return Err(Error::InvalidPovm(format!("extension is not isometric ({err:.3e})")));
    }
    Ok(IsometricExtension {
        isometry: u,
        system: povm.system.clone(),
        in_dim: d,
        x_label: classical_label(&povm.system),
        x_dim: nx,
        e_label: environment_label(&povm.system),
        e_dim: ne,
    })
}

/// Orthonormal basis of the orthogonal complement of the column space of an isometry.
fn complement_basis(u: &ComplexMatrix) -> Result<Vec<Vec<C64>>> {
    let n = u.rows();
    let p = &ComplexMatrix::identity(n) - &u.matmul_adjoint(u);
    let eig = linalg::hermitian_eig(&p, f64::INFINITY)?;
    Ok((0..n).filter(|&k| eig.eigenvalues[k] > 0.5).map(|k| eig.vector(k)).collect())
}

/// X ↦ U† X U + Tr((I − UU†) X) σ: inverts the isometry on its range and
/// prepares `fill` elsewhere.
pub fn reversal_map(ext: &IsometricExtension, fill: &DensityMatrix) -> Result<Channel> {
    let in_layout = ext.in_layout()?;
    if fill.layout().dims() != in_layout.dims() {
        return Err(Error::LayoutMismatch(format!("fill state {} does not live on {in_layout}", fill.layout())));
    }
    let mut kraus = vec![ext.isometry.adjoint()];
    let comp = complement_basis(&ext.isometry)?;
    if !comp.is_empty() {
        let eig = fill.eig()?;
        for k in 0..eig.dim() {
            let w = eig.eigenvalues[k];
            if w <= 1e-14 {
                continue;
            }
            let f: Vec<C64> = eig.vector(k).iter().map(|z| z * w.sqrt()).collect();
            for c in &comp {
                kraus.push(ComplexMatrix::outer(&f, c));
            }
        }
    }
    Channel::new(ext.out_layout()?, in_layout, kraus)
}

/// Reversal map with the maximally mixed fill state.
pub fn reversal_map_default(ext: &IsometricExtension) -> Result<Channel> {
    reversal_map(ext, &DensityMatrix::maximally_mixed(ext.in_layout()?))
}

/// The default symmetric grid of rotation parameters: 41 tanh-spaced points
/// in [−10, 10], including 0.
pub fn petz_t_grid() -> Vec<f64> {
    let n = 40;
    (0..=n)
        .map(|j| {
            let u = -1.0 + 2.0 * j as f64 / n as f64;
            let t = 10.0 * (2.0 * u).tanh() / 2f64.tanh();
            if j == n / 2 {
                0.0
            } else {
                t
            }
        })
        .collect()
}

/// Rotated Petz map X ↦ ρ_AC^{(1+it)/2} (ρ_C^{−(1+it)/2} X ρ_C^{−(1−it)/2} ⊗ I_A) ρ_AC^{(1−it)/2},
/// completed to a channel by preparing ρ_AC on the complement of supp ρ_C.
/// The output layout is that of `rho_ac`.
pub fn petz_recovery<S: AsRef<str>>(rho_ac: &DensityMatrix, c_labels: &[S], t: f64) -> Result<Channel> {
    if !t.is_finite() {
        return Err(Error::DomainError(format!("rotation parameter {t} is not finite")));
    }
    let layout = rho_ac.layout();
    let c_idx = layout.indices_of(c_labels)?;
    let mut c_sorted = c_idx.clone();
    c_sorted.sort_unstable();
    let c_names: Vec<&str> = c_sorted.iter().map(|&i| layout.labels()[i]).collect();
    let a_names: Vec<&str> = layout.labels().into_iter().filter(|l| !c_names.contains(l)).collect();
    let c_layout = layout.select(&c_names)?;
    let rho_c = rho_ac.partial_trace(&c_names)?;
    let dc = c_layout.total_dim();
    let da = layout.total_dim() / dc;

    let ec = rho_c.eig()?;
    let cut_c = linalg::default_support_cutoff(&ec);
    if ec.max_eigenvalue() <= 0.0 {
        return Err(Error::SingularMarginal("marginal on the conditioning system vanishes".into()));
    }
    let c_pow = linalg::spectral_map(&ec, |l| C64::new(0.0, -0.5 * t * l.ln()).exp() / l.sqrt(), cut_c)?;
    let eac = rho_ac.eig()?;
    let cut_ac = linalg::default_support_cutoff(&eac);
    let ac_pow = linalg::spectral_map(&eac, |l| C64::new(0.0, 0.5 * t * l.ln()).exp() * l.sqrt(), cut_ac)?;

    let left = ac_pow.matmul(&embed_operator(&c_pow, &c_names, layout)?);
    let mut kraus = Vec::with_capacity(da + 1);
    // E_a = |a⟩_A ⊗ I_C placed in layout order
    let a_layout = layout.select(&a_names)?;
    for a in 0..da {
        let mut ket = vec![C64::new(0.0, 0.0); da];
        ket[a] = C64::new(1.0, 0.0);
        let ea_ordered = ComplexMatrix::from_fn(da, 1, |r, _| ket[r]).kron(&ComplexMatrix::identity(dc));
        let ea = reorder_rows(&ea_ordered, &a_layout, &c_layout, layout)?;
        kraus.push(left.matmul(&ea));
    }
    let support = (0..ec.dim()).filter(|&k| ec.eigenvalues[k] > cut_c).count();
    if support < dc {
        for k in 0..eac.dim() {
            let w = eac.eigenvalues[k];
            if w <= cut_ac {
                continue;
            }
            let f: Vec<C64> = eac.vector(k).iter().map(|z| z * w.sqrt()).collect();
            for j in 0..ec.dim() {
                if ec.eigenvalues[j] <= cut_c {
                    kraus.push(ComplexMatrix::outer(&f, &ec.vector(j)));
                }
            }
        }
    }
    let ch = Channel::new_unchecked(c_layout, layout.clone(), kraus);
    let err = ch.trace_preservation_error();
    if err > 1e-7 {
        return Err(Error::SingularMarginal(format!("recovery map fails trace preservation by {err:.3e}")));
    }
    Ok(ch)
}

/// Rows of `m` are indexed by the factor order (a_layout, c_layout); returns
/// the same operator with rows in `full` order.
fn reorder_rows(
    m: &ComplexMatrix,
    a_layout: &SystemLayout,
    c_layout: &SystemLayout,
    full: &SystemLayout,
) -> Result<ComplexMatrix> {
    let q = a_layout.concat(c_layout)?;
    let q_labels = q.labels();
    let src: Vec<usize> = full
        .labels()
        .iter()
        .map(|l| q_labels.iter().position(|x| x == l).ok_or_else(|| Error::UnknownLabel(l.to_string())))
        .collect::<Result<_>>()?;
    let map = permutation_index_map(&q.dims(), &src);
    Ok(ComplexMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(map[r], c)]))
}

/// Measure-and-prepare channel ρ ↦ Σ_x Tr(Λ_x ρ) σ_x. All preparations must
/// share one layout, which becomes the output layout.
pub fn eb_channel(povm: &Povm, preps: &[DensityMatrix]) -> Result<Channel> {
    if preps.len() != povm.outcomes() {
        return Err(Error::ArityMismatch { expected: povm.outcomes(), got: preps.len() });
    }
    let out_layout = preps[0].layout().clone();
    let mut kraus = Vec::new();
    for (terms, prep) in povm.rank_one_terms()?.into_iter().zip(preps) {
        if prep.layout() != &out_layout {
            return Err(Error::LayoutMismatch(format!("{} vs {}", prep.layout(), out_layout)));
        }
        if terms.is_empty() {
            continue;
        }
        let eig = prep.eig()?;
        for m in 0..eig.dim() {
            let nu = eig.eigenvalues[m];
            if nu <= 1e-14 {
                continue;
            }
            let out: Vec<C64> = eig.vector(m).iter().map(|z| z * nu.sqrt()).collect();
            for (s, v) in &terms {
                let bra: Vec<C64> = v.iter().map(|z| z * *s).collect();
                kraus.push(ComplexMatrix::outer(&out, &bra));
            }
        }
    }
    Channel::new(povm.layout()?, out_layout, kraus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::PureState;
    use crate::measures::{self, ToleranceProfile};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn qubit(label: &str) -> SystemLayout {
        SystemLayout::qubits(&[label]).unwrap()
    }

    fn bell() -> DensityMatrix {
        let s = 0.5f64.sqrt();
        PureState::new(SystemLayout::qubits(&["A", "B"]).unwrap(), vec![c(s), c(0.), c(0.), c(s)]).unwrap().density()
    }

    fn plus() -> DensityMatrix {
        let s = 0.5f64.sqrt();
        PureState::new(qubit("A"), vec![c(s), c(s)]).unwrap().density()
    }

    #[test]
    fn identity_and_depolarizing() {
        let b = bell();
        let out = apply_channel(&Channel::identity(qubit("A")), &b).unwrap();
        assert!(out.matrix().max_abs_diff(b.matrix()) < 1e-15);
        let dep = Channel::completely_depolarizing(qubit("A"));
        let out = apply_channel(&dep, &plus()).unwrap();
        assert!(out.matrix().max_abs_diff(&ComplexMatrix::identity(2).scale(0.5)) < 1e-15);
    }

    #[test]
    fn measurement_of_plus() {
        let m = measurement_channel(&Povm::computational("A", 2)).unwrap();
        let out = apply_channel(&m, &plus()).unwrap();
        assert_eq!(out.layout().labels(), vec!["XA"]);
        assert!(out.matrix().max_abs_diff(&ComplexMatrix::from_real_diagonal(&[0.5, 0.5])) < 1e-15);
    }

    #[test]
    fn measurement_of_bell_and_trivial() {
        let m = measurement_channel(&Povm::computational("A", 2)).unwrap();
        let out = apply_channel(&m, &bell()).unwrap();
        assert_eq!(out.layout().labels(), vec!["XA", "B"]);
        let i =
            measures::conditional_mutual_information(&out, &["XA"], &["B"], &[], &ToleranceProfile::default()).unwrap();
        assert!((i - std::f64::consts::LN_2).abs() < 1e-12);
        let t = measurement_channel(&Povm::trivial("A", 2)).unwrap();
        let out = apply_channel(&t, &plus()).unwrap();
        assert_eq!(out.dim(), 1);
        assert!((out.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn output_takes_first_input_slot() {
        let l = SystemLayout::qubits(&["A", "B", "C"]).unwrap();
        let s = DensityMatrix::maximally_mixed(l);
        let m = measurement_channel(&Povm::computational("B", 2)).unwrap();
        let out = apply_channel(&m, &s).unwrap();
        assert_eq!(out.layout().labels(), vec!["A", "XB", "C"]);
    }

    #[test]
    fn povm_validation() {
        let half = ComplexMatrix::identity(2).scale(0.5);
        assert!(Povm::new("A", vec![half.clone()]).is_err());
        assert!(Povm::new("A", vec![half.clone(), half.clone()]).is_ok());
        let neg = ComplexMatrix::from_real_diagonal(&[1.5, 1.0]);
        let pos = ComplexMatrix::from_real_diagonal(&[-0.5, 0.0]);
        assert!(matches!(Povm::new("A", vec![neg, pos]), Err(Error::InvalidPovm(_))));
    }

    #[test]
    fn isometric_extension_consistency() {
        let half = ComplexMatrix::identity(2).scale(0.5);
        for povm in [Povm::computational("A", 2), Povm::new("A", vec![half.clone(), half]).unwrap()] {
            let ext = isometric_extension(&povm).unwrap();
            let u = &ext.isometry;
            assert!(u.adjoint_matmul(u).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);
            let b = bell();
            let extended = apply_channel(&ext.as_channel().unwrap(), &b).unwrap();
            let traced = extended.trace_out(&[ext.e_label.as_str()]).unwrap();
            let measured = apply_channel(&measurement_channel(&povm).unwrap(), &b).unwrap();
            assert!(traced.matrix().max_abs_diff(measured.matrix()) < 1e-12);
            let p = apply_channel(&ext.as_channel().unwrap(), &plus()).unwrap();
            assert!(measures::von_neumann_entropy(&p, &ToleranceProfile::default()).unwrap() < 1e-10);
        }
        let ext = isometric_extension(&Povm::computational("A", 2)).unwrap();
        assert_eq!((ext.x_dim, ext.e_dim), (2, 2));
        assert!((ext.isometry[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((ext.isometry[(3, 1)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reversal_inverts_on_range_and_fills_elsewhere() {
        let half = ComplexMatrix::identity(2).scale(0.5);
        let povm = Povm::new("A", vec![half.clone(), half]).unwrap();
        let ext = isometric_extension(&povm).unwrap();
        let fill = DensityMatrix::basis_state(qubit("A"), 1).unwrap();
        let t = reversal_map(&ext, &fill).unwrap();
        assert!(t.trace_preservation_error() < 1e-12);
        let b = bell();
        let round = apply_channel(&ext.as_channel().unwrap().then(&t).unwrap(), &b).unwrap();
        assert!(round.matrix().max_abs_diff(b.matrix()) < 1e-12);
        let comp = complement_basis(&ext.isometry).unwrap();
        let outside = PureState::new(ext.out_layout().unwrap(), comp[0].clone()).unwrap().density();
        let filled = apply_channel(&t, &outside).unwrap();
        assert!(filled.matrix().max_abs_diff(fill.matrix()) < 1e-12);
    }

    #[test]
    fn petz_grid_shape() {
        let g = petz_t_grid();
        assert_eq!(g.len(), 41);
        assert_eq!(g[20], 0.0);
        assert!((g[0] + 10.0).abs() < 1e-12 && (g[40] - 10.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn petz_product_case_appends_marginal() {
        let ra = DensityMatrix::new(qubit("A"), ComplexMatrix::from_real_diagonal(&[0.8, 0.2])).unwrap();
        let rc = plus().relabel("A", "C").unwrap();
        let rac = ra.tensor(&rc).unwrap();
        for t in [0.0, 1.5] {
            let r = petz_recovery(&rac, &["C"], t).unwrap();
            let out = apply_channel(&r, &rc).unwrap();
            assert!(measures::fidelity(&rac, &out).unwrap() > 1.0 - 1e-10);
        }
    }

    #[test]
    fn petz_classical_markov_chain() {
        let l = SystemLayout::qubits(&["A", "B", "C"]).unwrap();
        let mut d = vec![0.0; 8];
        d[0] = 0.5;
        d[7] = 0.5;
        let rho = DensityMatrix::new(l, ComplexMatrix::from_real_diagonal(&d)).unwrap();
        let rac = rho.partial_trace(&["A", "C"]).unwrap();
        let r = petz_recovery(&rac, &["C"], 0.0).unwrap();
        let out = apply_channel(&r, &rho.partial_trace(&["B", "C"]).unwrap()).unwrap();
        let out = out.reordered(&["A", "B", "C"]).unwrap();
        assert!(measures::fidelity(&rho, &out).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn petz_handles_rank_deficient_marginal() {
        let rac = DensityMatrix::basis_state(SystemLayout::qubits(&["A", "C"]).unwrap(), 1).unwrap();
        let r = petz_recovery(&rac, &["C"], 0.3).unwrap();
        assert!(r.trace_preservation_error() < 1e-10);
    }

    #[test]
    fn eb_channel_examples() {
        let z = Povm::computational("A", 2);
        let preps = vec![
            DensityMatrix::basis_state(qubit("A"), 0).unwrap(),
            DensityMatrix::basis_state(qubit("A"), 1).unwrap(),
        ];
        let deph = eb_channel(&z, &preps).unwrap();
        let out = apply_channel(&deph, &bell()).unwrap();
        let expect = ComplexMatrix::from_real_diagonal(&[0.5, 0.0, 0.0, 0.5]);
        assert!(out.matrix().max_abs_diff(&expect) < 1e-15);
        let classical = DensityMatrix::new(qubit("A"), ComplexMatrix::from_real_diagonal(&[0.3, 0.7])).unwrap();
        assert!(apply_channel(&deph, &classical).unwrap().matrix().max_abs_diff(classical.matrix()) < 1e-15);

        let sigma = plus();
        let constant = eb_channel(&z, &[sigma.clone(), sigma.clone()]).unwrap();
        let out = apply_channel(&constant, &classical).unwrap();
        assert!(out.matrix().max_abs_diff(sigma.matrix()) < 1e-14);
        assert!(matches!(eb_channel(&z, &[sigma]), Err(Error::ArityMismatch { .. })));
    }

    #[test]
    fn channel_json_round_trip() {
        let ch = measurement_channel(&Povm::computational("A", 2)).unwrap();
        let text = serde_json::to_string(&ch).unwrap();
        let back: Channel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ch);
        let povm = Povm::computational("A", 2);
        let back: Povm = serde_json::from_str(&serde_json::to_string(&povm).unwrap()).unwrap();
        assert_eq!(back, povm);
    }

    #[test]
    fn embed_operator_respects_layout_order() {
        let l = SystemLayout::new([("A", 2), ("B", 3)]).unwrap();
        let op = ComplexMatrix::from_fn(3, 3, |r, cc| c((r * 3 + cc) as f64));
        let e = embed_operator(&op, &["B"], &l).unwrap();
        assert!(e.max_abs_diff(&ComplexMatrix::identity(2).kron(&op)) < 1e-15);
        let op2 = ComplexMatrix::from_real_diagonal(&[1.0, 2.0]);
        let e = embed_operator(&op2, &["A"], &l).unwrap();
        assert!(e.max_abs_diff(&op2.kron(&ComplexMatrix::identity(3))) < 1e-15);
    }
}
