//! Scalar information quantities (all in nats) and the closed-form bounds
//! used by the verification checks.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::channels::{self, Povm};
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, PureState, SystemLayout};
use crate::linalg::{self, ComplexMatrix};

/// Numerical tolerances threaded through validation and measures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceProfile {
    pub hermiticity: f64,
    pub psd: f64,
    pub trace: f64,
    pub entropy_log_cutoff: f64,
    pub inequality_slack: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self { hermiticity: 1e-10, psd: 1e-10, trace: 1e-10, entropy_log_cutoff: 1e-12, inequality_slack: 1e-9 }
    }
}

impl ToleranceProfile {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("hermiticity", self.hermiticity),
            ("psd", self.psd),
            ("trace", self.trace),
            ("entropy_log_cutoff", self.entropy_log_cutoff),
            ("inequality_slack", self.inequality_slack),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parse(format!("tolerance `{name}` must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// A party A_i together with its extension A_i′ (either may be empty).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyPair {
    pub system: Vec<String>,
    pub extension: Vec<String>,
}

impl PartyPair {
    pub fn new<S: AsRef<str>>(system: &[S], extension: &[S]) -> Self {
        Self {
            system: system.iter().map(|s| s.as_ref().to_string()).collect(),
            extension: extension.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        self.system.iter().chain(&self.extension).cloned().collect()
    }
}

/// Parses `A1|A2,B` into `[[A1],[A2,B]]`.
pub fn parse_parts(text: &str) -> Result<Vec<Vec<String>>> {
    let parts: Vec<Vec<String>> = text
        .split('|')
        .map(|p| p.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
        .collect();
    if parts.iter().any(Vec::is_empty) {
        return Err(Error::Parse(format!("empty part in `{text}`")));
    }
    Ok(parts)
}

/// Parses `A1:A1'|A2:` into pairs; the side after `:` may be empty or a
/// comma list.
pub fn parse_pairs(text: &str) -> Result<Vec<PartyPair>> {
    text.split('|')
        .map(|p| {
            let (sys, ext) = p.split_once(':').unwrap_or((p, ""));
            let split = |s: &str| -> Vec<String> {
                s.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
            };
            let pair = PartyPair { system: split(sys), extension: split(ext) };
            if pair.system.is_empty() {
                return Err(Error::Parse(format!("pair `{p}` has no system labels")));
            }
            Ok(pair)
        })
        .collect()
}

/// Chain expansion of the gap in a chosen party order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapExpansion {
    pub order: Vec<usize>,
    /// (party index, conditional mutual information in nats), in `order`.
    pub terms: Vec<(usize, f64)>,
    pub total: f64,
}

fn entropy_of_spectrum(ev: &[f64], cutoff: f64) -> f64 {
    ev.iter().filter(|&&l| l >= cutoff).map(|&l| -l * l.ln()).sum::<f64>().max(0.0)
}

pub fn von_neumann_entropy(rho: &DensityMatrix, tol: &ToleranceProfile) -> Result<f64> {
    if rho.dim() == 1 {
        return Ok(0.0);
    }
    Ok(entropy_of_spectrum(&rho.eigenvalues()?, tol.entropy_log_cutoff))
}

/// Entropy of the marginal on `labels`; the empty set has entropy 0.
pub fn marginal_entropy<S: AsRef<str>>(rho: &DensityMatrix, labels: &[S], tol: &ToleranceProfile) -> Result<f64> {
    if labels.is_empty() {
        return Ok(0.0);
    }
    von_neumann_entropy(&rho.partial_trace(labels)?, tol)
}

/// Memoized marginal entropies of one state, keyed by subsystem bitmask.
pub struct EntropyTable<'a> {
    rho: &'a DensityMatrix,
    tol: ToleranceProfile,
    cache: RefCell<HashMap<u64, f64>>,
}

impl<'a> EntropyTable<'a> {
    pub fn new(rho: &'a DensityMatrix, tol: &ToleranceProfile) -> Self {
        assert!(rho.layout().len() <= 64, "entropy table supports at most 64 subsystems");
        Self { rho, tol: *tol, cache: RefCell::new(HashMap::new()) }
    }

    pub fn mask<S: AsRef<str>>(&self, labels: &[S]) -> Result<u64> {
        labels.iter().try_fold(0u64, |m, l| Ok(m | 1u64 << self.rho.layout().index_of(l.as_ref())?))
    }

    pub fn entropy_mask(&self, mask: u64) -> Result<f64> {
        if mask == 0 {
            return Ok(0.0);
        }
        if let Some(&h) = self.cache.borrow().get(&mask) {
            return Ok(h);
        }
        let labels: Vec<&str> = self
            .rho
            .layout()
            .labels()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, l)| l)
            .collect();
        let h = marginal_entropy(self.rho, &labels, &self.tol)?;
        self.cache.borrow_mut().insert(mask, h);
        Ok(h)
    }

    pub fn entropy<S: AsRef<str>>(&self, labels: &[S]) -> Result<f64> {
        self.entropy_mask(self.mask(labels)?)
    }

    /// I(A;B|C) from masks.
    pub fn cmi_mask(&self, a: u64, b: u64, c: u64) -> Result<f64> {
        Ok(self.entropy_mask(a | c)? + self.entropy_mask(b | c)?
            - self.entropy_mask(c)?
            - self.entropy_mask(a | b | c)?)
    }
}

/// D(ρ‖σ); +∞ when ρ has weight outside the support of σ.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix, tol: &ToleranceProfile) -> Result<f64> {
    if rho.layout().dims() != sigma.layout().dims() {
        return Err(Error::LayoutMismatch(format!("{} vs {}", rho.layout(), sigma.layout())));
    }
    let es = sigma.eig()?;
    let cutoff = linalg::default_support_cutoff(&es);
    let r = rho.matrix();
    let mut inside = 0.0;
    let mut cross = 0.0;
    for k in 0..es.dim() {
        let mu = es.eigenvalues[k];
        if mu <= cutoff {
            continue;
        }
        let v = es.vector(k);
        let w = linalg::inner(&v, &r.mul_vec(&v)).re;
        inside += w;
        cross += w * mu.ln();
    }
    if 1.0 - inside > tol.psd.max(1e-9) {
        return Ok(f64::INFINITY);
    }
    let h = von_neumann_entropy(rho, tol)?;
    Ok((-h - cross).max(0.0))
}

/// Precomputed √ω for repeated fidelity evaluations against one state.
pub struct FidelityTarget {
    sqrt: ComplexMatrix,
    dims: Vec<usize>,
}

impl FidelityTarget {
    pub fn new(omega: &DensityMatrix) -> Result<Self> {
        Ok(Self { sqrt: linalg::psd_sqrt(omega.matrix())?, dims: omega.layout().dims() })
    }

    pub fn fidelity_matrix(&self, tau: &ComplexMatrix) -> Result<f64> {
        let m = self.sqrt.matmul(tau).matmul(&self.sqrt);
        let ev = linalg::hermitian_eigenvalues(&m, f64::INFINITY)?;
        let s: f64 = ev.iter().map(|&l| l.max(0.0).sqrt()).sum();
        Ok((s * s).clamp(0.0, 1.0))
    }

    pub fn fidelity(&self, tau: &DensityMatrix) -> Result<f64> {
        if tau.layout().dims() != self.dims {
            return Err(Error::LayoutMismatch("fidelity arguments differ in dimensions".into()));
        }
        self.fidelity_matrix(tau.matrix())
    }
}

/// F(ω,τ) = ‖√ω√τ‖₁².
pub fn fidelity(omega: &DensityMatrix, tau: &DensityMatrix) -> Result<f64> {
    FidelityTarget::new(omega)?.fidelity(tau)
}

/// ‖ω − τ‖₁ (ranges over [0, 2]).
pub fn trace_distance(omega: &DensityMatrix, tau: &DensityMatrix) -> Result<f64> {
    if omega.layout().dims() != tau.layout().dims() {
        return Err(Error::LayoutMismatch(format!("{} vs {}", omega.layout(), tau.layout())));
    }
    linalg::trace_norm(&(omega.matrix() - tau.matrix()))
}

fn check_disjoint(sets: &[&[String]]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for s in sets {
        for l in *s {
            if !seen.insert(l.as_str()) {
                return Err(Error::OverlappingSets(l.clone()));
            }
        }
    }
    Ok(())
}

fn owned<S: AsRef<str>>(labels: &[S]) -> Vec<String> {
    labels.iter().map(|s| s.as_ref().to_string()).collect()
}

fn check_partition(layout: &SystemLayout, sets: &[Vec<String>]) -> Result<()> {
    let refs: Vec<&[String]> = sets.iter().map(Vec::as_slice).collect();
    check_disjoint(&refs).map_err(|e| match e {
        Error::OverlappingSets(l) => Error::NotAPartition(format!("`{l}` appears twice")),
        other => other,
    })?;
    let count: usize = sets.iter().map(Vec::len).sum();
    for s in sets {
        for l in s {
            if !layout.contains(l) {
                return Err(Error::NotAPartition(format!("`{l}` is not in layout {layout}")));
            }
        }
    }
    if count != layout.len() {
        return Err(Error::NotAPartition(format!("sets cover {count} of the {} subsystems of {layout}", layout.len())));
    }
    Ok(())
}

/// Σ H(A_i) − H(A₁⋯A_l) over a partition of the layout.
pub fn multipartite_information<S: AsRef<str>>(
    rho: &DensityMatrix,
    parts: &[Vec<S>],
    tol: &ToleranceProfile,
) -> Result<f64> {
    let parts: Vec<Vec<String>> = parts.iter().map(|p| owned(p)).collect();
    check_partition(rho.layout(), &parts)?;
    let table = EntropyTable::new(rho, tol);
    let mut sum = 0.0;
    for p in &parts {
        sum += table.entropy(p)?;
    }
    Ok(sum - table.entropy_mask(table.mask(&rho.layout().labels())?)?)
}

/// I(A;B|C); labels outside A∪B∪C are traced out first, C may be empty.
pub fn conditional_mutual_information<S: AsRef<str>>(
    rho: &DensityMatrix,
    a: &[S],
    b: &[S],
    c: &[S],
    tol: &ToleranceProfile,
) -> Result<f64> {
    let (a, b, c) = (owned(a), owned(b), owned(c));
    check_disjoint(&[&a, &b, &c])?;
    let table = EntropyTable::new(rho, tol);
    table.cmi_mask(table.mask(&a)?, table.mask(&b)?, table.mask(&c)?)
}

/// Σ H(A_i|E) − H(A₁⋯A_l|E).
pub fn conditional_multipartite_information<S: AsRef<str>>(
    rho: &DensityMatrix,
    parts: &[Vec<S>],
    e: &[S],
    tol: &ToleranceProfile,
) -> Result<f64> {
    let parts: Vec<Vec<String>> = parts.iter().map(|p| owned(p)).collect();
    let e = owned(e);
    let mut sets: Vec<&[String]> = parts.iter().map(Vec::as_slice).collect();
    sets.push(&e);
    check_disjoint(&sets)?;
    let table = EntropyTable::new(rho, tol);
    let me = table.mask(&e)?;
    let he = table.entropy_mask(me)?;
    let mut sum = 0.0;
    let mut all = me;
    for p in &parts {
        let m = table.mask(p)?;
        all |= m;
        sum += table.entropy_mask(m | me)? - he;
    }
    Ok(sum - (table.entropy_mask(all)? - he))
}

fn pair_masks(table: &EntropyTable<'_>, pairs: &[PartyPair]) -> Result<Vec<(u64, u64)>> {
    pairs.iter().map(|p| Ok((table.mask(&p.system)?, table.mask(&p.extension)?))).collect()
}

fn check_pairs(rho: &DensityMatrix, pairs: &[PartyPair]) -> Result<()> {
    let sets: Vec<Vec<String>> = pairs.iter().map(PartyPair::labels).collect();
    check_partition(rho.layout(), &sets)
}

/// I(A₁A₁′:⋯:A_lA_l′) − I(A₁′:⋯:A_l′); the pairs must cover the layout exactly.
pub fn gap(rho: &DensityMatrix, pairs: &[PartyPair], tol: &ToleranceProfile) -> Result<f64> {
    check_pairs(rho, pairs)?;
    let table = EntropyTable::new(rho, tol);
    gap_from_table(&table, pairs)
}

pub(crate) fn gap_from_table(table: &EntropyTable<'_>, pairs: &[PartyPair]) -> Result<f64> {
    let masks = pair_masks(table, pairs)?;
    let mut full = 0.0;
    let mut primes = 0.0;
    let (mut all, mut all_primes) = (0u64, 0u64);
    for &(s, e) in &masks {
        full += table.entropy_mask(s | e)?;
        primes += table.entropy_mask(e)?;
        all |= s | e;
        all_primes |= e;
    }
    Ok(full - table.entropy_mask(all)? - primes + table.entropy_mask(all_primes)?)
}

/// Terms I(A_i; A_earlier A′_others | A′_i) in the given party order.
pub fn chain_gap_expansion(
    rho: &DensityMatrix,
    pairs: &[PartyPair],
    order: &[usize],
    tol: &ToleranceProfile,
) -> Result<GapExpansion> {
    check_pairs(rho, pairs)?;
    let table = EntropyTable::new(rho, tol);
    chain_from_table(&table, pairs, order)
}

pub(crate) fn chain_from_table(table: &EntropyTable<'_>, pairs: &[PartyPair], order: &[usize]) -> Result<GapExpansion> {
    let l = pairs.len();
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..l).collect::<Vec<_>>() {
        return Err(Error::Parse(format!("order {order:?} is not a permutation of 0..{l}")));
    }
    let masks = pair_masks(table, pairs)?;
    let mut earlier = 0u64;
    let mut terms = Vec::with_capacity(l);
    for &i in order {
        let (s, e) = masks[i];
        let others: u64 = masks.iter().enumerate().filter(|&(j, _)| j != i).fold(0, |m, (_, p)| m | p.1);
        terms.push((i, table.cmi_mask(s, earlier | others, e)?));
        earlier |= s;
    }
    let total = terms.iter().map(|t| t.1).sum();
    Ok(GapExpansion { order: order.to_vec(), terms, total })
}

/// Per-round communication terms and total rate (half the gap) for a
/// multi-round state redistribution of a pure state. Labels of `phi` not
/// covered by `pairs` form the reference and are traced out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdRates {
    pub order: Vec<usize>,
    pub per_round: Vec<f64>,
    pub total_rate: f64,
}

pub fn psd_rates(phi: &PureState, pairs: &[PartyPair], order: &[usize], tol: &ToleranceProfile) -> Result<PsdRates> {
    let covered: Vec<String> = pairs.iter().flat_map(PartyPair::labels).collect();
    let rho = phi.density().partial_trace(&covered)?;
    let exp = chain_gap_expansion(&rho, pairs, order, tol)?;
    Ok(PsdRates { order: exp.order, per_round: exp.terms.iter().map(|t| t.1).collect(), total_rate: exp.total / 2.0 })
}

/// Information drop under local measurement, computed two ways: directly
/// (lhs) and on the isometrically extended state (rhs).
pub fn unoptimized_discord_as_cmi<S: AsRef<str>>(
    rho: &DensityMatrix,
    parts: &[Vec<S>],
    povms: &[Povm],
    tol: &ToleranceProfile,
) -> Result<(f64, f64)> {
    if parts.len() != povms.len() {
        return Err(Error::ArityMismatch { expected: parts.len(), got: povms.len() });
    }
    let parts: Vec<Vec<String>> = parts.iter().map(|p| owned(p)).collect();
    check_partition(rho.layout(), &parts)?;
    let i_rho = multipartite_information(rho, &parts, tol)?;

    let mut measured = rho.clone();
    let mut extended = rho.clone();
    let mut x_parts = Vec::new();
    let mut xe_parts = Vec::new();
    for (part, povm) in parts.iter().zip(povms) {
        if part.len() != 1 || part[0] != povm.system() {
            return Err(Error::InvalidPovm(format!("POVM on `{}` does not match part {part:?}", povm.system())));
        }
        let m = channels::measurement_channel(povm)?;
        measured = channels::apply_channel(&m, &measured)?;
        let ext = channels::isometric_extension(povm)?;
        extended = channels::apply_channel(&ext.as_channel()?, &extended)?;
        x_parts.push(vec![ext.x_label.clone()]);
        xe_parts.push(vec![ext.x_label.clone(), ext.e_label.clone()]);
    }
    let lhs = i_rho - multipartite_information(&measured, &x_parts, tol)?;
    let rhs = multipartite_information(&extended, &xe_parts, tol)?
        - multipartite_information(&extended.partial_trace(&x_parts.concat())?, &x_parts, tol)?;
    Ok((lhs, rhs))
}

/// Bipartite one-sided variant: returns (I(A;B) − I(X;B), I(E;B|X)) for a
/// measurement of the single subsystem `povm.system()`; `b` is the rest.
pub fn one_sided_discord_as_cmi<S: AsRef<str>>(
    rho: &DensityMatrix,
    povm: &Povm,
    b: &[S],
    tol: &ToleranceProfile,
) -> Result<(f64, f64)> {
    let a = vec![povm.system().to_string()];
    let b = owned(b);
    let i_ab = conditional_mutual_information(rho, &a, &b, &[], tol)?;
    let measured = channels::apply_channel(&channels::measurement_channel(povm)?, rho)?;
    let ext = channels::isometric_extension(povm)?;
    let extended = channels::apply_channel(&ext.as_channel()?, rho)?;
    let x = vec![ext.x_label.clone()];
    let e = vec![ext.e_label.clone()];
    let i_xb = conditional_mutual_information(&measured, &x, &b, &[], tol)?;
    let cmi = conditional_mutual_information(&extended, &e, &b, &x, tol)?;
    Ok((i_ab - i_xb, cmi))
}

/// h₂(ε) in nats.
pub fn binary_entropy(eps: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::DomainError(format!("binary entropy argument {eps} outside [0, 1]")));
    }
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.ln() };
    Ok(term(eps) + term(1.0 - eps))
}

/// (l+1) h₂(ε/2) + ε Σ ln d_i.
pub fn msq_discord_upper_bound(eps: f64, dims: &[usize]) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::DomainError(format!("ε = {eps} outside [0, 1]")));
    }
    let l = dims.len() as f64;
    let logs: f64 = dims.iter().map(|&d| (d as f64).ln()).sum();
    Ok((l + 1.0) * binary_entropy(eps / 2.0)? + eps * logs)
}

/// T ln(d−1) + h₂(T), with T the normalized trace distance ½‖ρ−σ‖₁.
pub fn fannes_audenaert_bound(t: f64, d: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::DomainError(format!("T = {t} outside [0, 1]")));
    }
    if d < 2 {
        return Err(Error::DomainError(format!("dimension {d} < 2")));
    }
    Ok(t * ((d - 1) as f64).ln() + binary_entropy(t)?)
}

/// (I(C₁D₁:⋯:C_lD_l), I(C₁:⋯:C_l) + 2 ln Π|D_i|).
pub fn dimension_bound_check<S: AsRef<str>>(
    rho: &DensityMatrix,
    c_parts: &[Vec<S>],
    d_parts: &[Vec<S>],
    tol: &ToleranceProfile,
) -> Result<(f64, f64)> {
    if c_parts.len() != d_parts.len() {
        return Err(Error::ArityMismatch { expected: c_parts.len(), got: d_parts.len() });
    }
    let pairs: Vec<PartyPair> =
        c_parts.iter().zip(d_parts).map(|(c, d)| PartyPair::new(&owned(c), &owned(d))).collect();
    check_pairs(rho, &pairs)?;
    let full: Vec<Vec<String>> = pairs.iter().map(PartyPair::labels).collect();
    let cs: Vec<Vec<String>> = pairs.iter().map(|p| p.system.clone()).collect();
    let lhs = multipartite_information(rho, &full, tol)?;
    let c_labels: Vec<String> = cs.concat();
    let rho_c = rho.partial_trace(&c_labels)?;
    let mut log_d = 0.0;
    for p in &pairs {
        log_d += (rho.layout().dim_of_set(&p.extension)? as f64).ln();
    }
    Ok((lhs, multipartite_information(&rho_c, &cs, tol)? + 2.0 * log_d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::SystemLayout;
    use num_complex::Complex64 as C64;

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn bell() -> DensityMatrix {
        let s = 0.5f64.sqrt();
        PureState::new(SystemLayout::qubits(&["A", "B"]).unwrap(), vec![c(s), c(0.), c(0.), c(s)]).unwrap().density()
    }

    fn ghz3() -> DensityMatrix {
        let s = 0.5f64.sqrt();
        let mut amps = vec![c(0.0); 8];
        amps[0] = c(s);
        amps[7] = c(s);
        PureState::new(SystemLayout::qubits(&["A", "B", "C"]).unwrap(), amps).unwrap().density()
    }

    fn diag(labels: &[&str], d: &[f64]) -> DensityMatrix {
        DensityMatrix::new(SystemLayout::qubits(labels).unwrap(), ComplexMatrix::from_real_diagonal(d)).unwrap()
    }

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn entropy_examples() {
        assert!(von_neumann_entropy(&bell(), &tol()).unwrap().abs() < 1e-12);
        let h = von_neumann_entropy(&diag(&["A"], &[0.5, 0.5]), &tol()).unwrap();
        assert!((h - std::f64::consts::LN_2).abs() < 1e-6);
        let h = von_neumann_entropy(&diag(&["A"], &[0.9, 0.1]), &tol()).unwrap();
        assert!((h - 0.325083).abs() < 1e-6);
    }

    #[test]
    fn relative_entropy_examples() {
        let zero = diag(&["A"], &[1.0, 0.0]);
        let one = diag(&["A"], &[0.0, 1.0]);
        let mixed = diag(&["A"], &[0.5, 0.5]);
        assert!(relative_entropy(&mixed, &mixed, &tol()).unwrap().abs() < 1e-12);
        assert!((relative_entropy(&zero, &mixed, &tol()).unwrap() - LN2).abs() < 1e-12);
        assert_eq!(relative_entropy(&zero, &one, &tol()).unwrap(), f64::INFINITY);
        let other = diag(&["B"], &[0.5, 0.5]);
        assert!(relative_entropy(&zero, &other, &tol()).is_ok());
        assert!(relative_entropy(&zero, &bell(), &tol()).is_err());
    }

    #[test]
    fn fidelity_and_trace_distance_examples() {
        let zero = diag(&["A"], &[1.0, 0.0]);
        let one = diag(&["A"], &[0.0, 1.0]);
        let mixed = diag(&["A"], &[0.5, 0.5]);
        assert!((fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&zero, &one).unwrap().abs() < 1e-12);
        assert!((fidelity(&zero, &mixed).unwrap() - 0.5).abs() < 1e-12);
        assert!((fidelity(&mixed, &zero).unwrap() - 0.5).abs() < 1e-12);
        assert!(trace_distance(&zero, &zero).unwrap().abs() < 1e-15);
        assert!((trace_distance(&zero, &one).unwrap() - 2.0).abs() < 1e-12);
        assert!((trace_distance(&zero, &mixed).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multipartite_information_examples() {
        let prod = diag(&["A"], &[0.3, 0.7]).tensor(&diag(&["B"], &[0.6, 0.4])).unwrap();
        assert!(multipartite_information(&prod, &[vec!["A"], vec!["B"]], &tol()).unwrap().abs() < 1e-12);
        let i = multipartite_information(&bell(), &[vec!["A"], vec!["B"]], &tol()).unwrap();
        assert!((i - 1.386294).abs() < 1e-6);
        let i = multipartite_information(&ghz3(), &[vec!["A"], vec!["B"], vec!["C"]], &tol()).unwrap();
        assert!((i - 2.079442).abs() < 1e-6);
        assert!(matches!(
            multipartite_information(&ghz3(), &[vec!["A"], vec!["B"]], &tol()),
            Err(Error::NotAPartition(_))
        ));
        assert!(matches!(
            multipartite_information(&ghz3(), &[vec!["A", "B"], vec!["B", "C"]], &tol()),
            Err(Error::NotAPartition(_))
        ));
    }

    #[test]
    fn cmi_examples() {
        let g = ghz3();
        let v = conditional_mutual_information(&g, &["A"], &["B"], &["C"], &tol()).unwrap();
        assert!((v - LN2).abs() < 1e-12);
        let v = conditional_mutual_information(&bell(), &["A"], &["B"], &[], &tol()).unwrap();
        assert!((v - 2.0 * LN2).abs() < 1e-12);
        assert!(matches!(
            conditional_mutual_information(&g, &["A"], &["A"], &["C"], &tol()),
            Err(Error::OverlappingSets(_))
        ));
        let e: [&str; 0] = [];
        let v = conditional_multipartite_information(&g, &[vec!["A"], vec!["B"], vec!["C"]], &e, &tol()).unwrap();
        assert!((v - 3.0 * LN2).abs() < 1e-12);
        // with two parts this is the ordinary CMI
        let v = conditional_multipartite_information(&g, &[vec!["A"], vec!["B"]], &["C"], &tol()).unwrap();
        assert!((v - LN2).abs() < 1e-12);
    }

    #[test]
    fn gap_and_chain_on_ghz() {
        let g = ghz3();
        let pairs = vec![PartyPair::new(&["A"], &[]), PartyPair::new(&["B"], &[]), PartyPair::new(&["C"], &[])];
        let v = gap(&g, &pairs, &tol()).unwrap();
        assert!((v - 3.0 * LN2).abs() < 1e-12);
        for order in crate::hilbert::all_permutations(3) {
            let e = chain_gap_expansion(&g, &pairs, &order, &tol()).unwrap();
            assert!((e.total - v).abs() < 1e-12);
            assert!(e.terms.iter().all(|t| t.1 >= -1e-12));
        }
        let single = vec![PartyPair::new(&["A", "B"], &["C"])];
        let e = chain_gap_expansion(&g, &single, &[0], &tol()).unwrap();
        assert!((e.total - gap(&g, &single, &tol()).unwrap()).abs() < 1e-12);
        assert!(e.total.abs() < 1e-12);
        let missing = vec![PartyPair::new(&["A"], &[]), PartyPair::new(&["B"], &[])];
        assert!(matches!(gap(&g, &missing, &tol()), Err(Error::NotAPartition(_))));
    }

    #[test]
    fn psd_rates_ghz() {
        let s = 0.5f64.sqrt();
        let mut amps = vec![c(0.0); 8];
        amps[0] = c(s);
        amps[7] = c(s);
        let phi = PureState::new(SystemLayout::qubits(&["A1", "A2", "A3"]).unwrap(), amps).unwrap();
        let pairs = parse_pairs("A1:|A2:|A3:").unwrap();
        let r = psd_rates(&phi, &pairs, &[0, 1, 2], &tol()).unwrap();
        assert!((r.total_rate - 1.039721).abs() < 1e-6);
        let r2 = psd_rates(&phi, &pairs, &[2, 0, 1], &tol()).unwrap();
        assert!((r.total_rate - r2.total_rate).abs() < 1e-12);
    }

    #[test]
    fn parsing() {
        assert_eq!(parse_parts("A1|A2,B").unwrap(), vec![vec!["A1"], vec!["A2", "B"]]);
        let p = parse_pairs("A1:A1'|A2:").unwrap();
        assert_eq!(p[0].extension, vec!["A1'"]);
        assert!(p[1].extension.is_empty());
        assert!(parse_parts("A||B").is_err());
    }

    #[test]
    fn scalar_bounds() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - LN2).abs() < 1e-15);
        assert!((binary_entropy(0.1).unwrap() - 0.325083).abs() < 1e-6);
        assert!(binary_entropy(1.5).is_err());
        assert_eq!(msq_discord_upper_bound(0.0, &[2, 2]).unwrap(), 0.0);
        assert!((msq_discord_upper_bound(1.0, &[2, 2]).unwrap() - 3.465736).abs() < 1e-6);
        assert!((msq_discord_upper_bound(0.2, &[2, 2, 2]).unwrap() - 1.716220).abs() < 1e-6);
        assert_eq!(fannes_audenaert_bound(0.0, 3).unwrap(), 0.0);
        assert_eq!(fannes_audenaert_bound(0.3, 2).unwrap(), binary_entropy(0.3).unwrap());
        assert!(fannes_audenaert_bound(0.3, 1).is_err());
    }

    #[test]
    fn dimension_bound_trivial_d() {
        let g = ghz3();
        let e: Vec<&str> = vec![];
        let (lhs, rhs) =
            dimension_bound_check(&g, &[vec!["A"], vec!["B"], vec!["C"]], &[e.clone(), e.clone(), e], &tol()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn tolerance_validation() {
        assert!(ToleranceProfile::default().validate().is_ok());
        let bad = ToleranceProfile { psd: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
