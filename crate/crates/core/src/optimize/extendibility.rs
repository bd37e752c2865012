//! k-extendibility by Dykstra-corrected alternating projections between the
//! PSD cone, the copy-permutation-invariant subspace and the affine set of
//! operators with the prescribed marginal.
//!
//! Any extension is supported inside supp(ρ) ⊗ I for every placement of ρ on
//! one copy per group, so the PSD projection works on the intersection of
//! those subspaces. For rank-deficient ρ this removes the flat directions that
//! otherwise stall the projections.

use super::{FeasibilityCertificate, FeasibilityStatus, OptimizerConfig};
use crate::channels::embed_operator;
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, SystemLayout};
use crate::linalg::{self, ComplexMatrix};
use crate::states::{derive_seed, random_mixed, rng};

/// Largest extended dimension attempted unless the caller raises it.
pub const DEFAULT_DIMENSION_CAP: usize = 128;

/// Extra knobs for [`dykstra_k_extendibility_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DykstraOptions {
    /// Projection cycles per restart.
    pub cycles: usize,
    pub dimension_cap: usize,
}

impl DykstraOptions {
    pub fn from_config(cfg: &OptimizerConfig) -> Self {
        Self { cycles: 20 * cfg.max_iters, dimension_cap: DEFAULT_DIMENSION_CAP }
    }
}

struct Problem {
    layout: SystemLayout,
    /// Labels of the first copy of each group plus the untouched systems.
    kept: Vec<String>,
    copies: Vec<Vec<String>>,
    target: ComplexMatrix,
    extra_dim: f64,
}

impl Problem {
    fn state(&self, m: ComplexMatrix) -> DensityMatrix {
        DensityMatrix::from_parts_unchecked(self.layout.clone(), m)
    }

    fn marginal_error(&self, x: &DensityMatrix) -> Result<f64> {
        Ok(x.partial_trace(&self.kept)?.matrix().max_abs_diff(&self.target))
    }

    fn project_marginal(&self, x: &DensityMatrix) -> Result<ComplexMatrix> {
        let diff = &self.target - x.partial_trace(&self.kept)?.matrix();
        let fix = embed_operator(&diff.scale(1.0 / self.extra_dim), &self.kept, &self.layout)?;
        Ok(x.matrix() + &fix)
    }

    fn project_symmetric(&self, x: &DensityMatrix) -> Result<ComplexMatrix> {
        Ok(x.symmetrize_copies(&self.copies)?.into_matrix())
    }
}

/// Isometry onto the subspace every extension must live in; `None` when it
/// is the whole space.
fn common_support(
    target: &ComplexMatrix,
    layout: &SystemLayout,
    rest: &[String],
    copies: &[Vec<String>],
) -> Result<Option<ComplexMatrix>> {
    let eig = linalg::hermitian_eig(target, f64::INFINITY)?;
    let cutoff = linalg::default_support_cutoff(&eig);
    let n = target.rows();
    if eig.eigenvalues.iter().all(|&l| l > cutoff) {
        return Ok(None);
    }
    let p = eig.reconstruct_with(|l| num_complex::Complex64::new(if l > cutoff { 1.0 } else { 0.0 }, 0.0));
    let complement = &ComplexMatrix::identity(n) - &p;
    let dim = layout.total_dim();
    let mut q = ComplexMatrix::zeros(dim, dim);
    let k = copies.first().map_or(1, Vec::len);
    let mut choice = vec![0usize; copies.len()];
    loop {
        let mut labels = rest.to_vec();
        labels.extend(copies.iter().zip(&choice).map(|(c, &i)| c[i].clone()));
        q = &q + &embed_operator(&complement, &labels, layout)?;
        let mut g = 0;
        while g < choice.len() {
            choice[g] += 1;
            if choice[g] < k {
                break;
            }
            choice[g] = 0;
            g += 1;
        }
        if g == choice.len() {
            break;
        }
    }
    let qe = linalg::hermitian_eig(&q, f64::INFINITY)?;
    let keep: Vec<usize> = (0..dim).filter(|&i| qe.eigenvalues[i] < 1e-6).collect();
    Ok(Some(ComplexMatrix::from_fn(dim, keep.len(), |r, c| qe.eigenvectors[(r, keep[c])])))
}

/// Nearest PSD operator supported on the range of `basis` (all of space if `None`).
fn project_psd(m: &ComplexMatrix, basis: Option<&ComplexMatrix>) -> Result<ComplexMatrix> {
    let clip = |l: f64| num_complex::Complex64::new(l.max(0.0), 0.0);
    match basis {
        None => Ok(linalg::hermitian_eig(&m.hermitian_part(), f64::INFINITY)?.reconstruct_with(clip)),
        Some(v) => {
            let inner = v.adjoint_matmul(&m.matmul(v)).hermitian_part();
            let p = linalg::hermitian_eig(&inner, f64::INFINITY)?.reconstruct_with(clip);
            Ok(v.matmul(&p).matmul_adjoint(v))
        }
    }
}

/// Searches for a state on ρ's systems plus k−1 extra copies of every group in
/// `groups`, invariant under permuting the copies of each group, whose
/// marginal is ρ.
pub fn dykstra_k_extendibility<S: AsRef<str>>(
    rho: &DensityMatrix,
    groups: &[Vec<S>],
    k: usize,
    cfg: &OptimizerConfig,
) -> Result<FeasibilityCertificate> {
    dykstra_k_extendibility_with(rho, groups, k, cfg, &DykstraOptions::from_config(cfg))
}

pub fn dykstra_k_extendibility_with<S: AsRef<str>>(
    rho: &DensityMatrix,
    groups: &[Vec<S>],
    k: usize,
    cfg: &OptimizerConfig,
    opts: &DykstraOptions,
) -> Result<FeasibilityCertificate> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::Shape("k must be at least 1".into()));
    }
    let groups: Vec<Vec<String>> = groups.iter().map(|g| g.iter().map(|s| s.as_ref().to_string()).collect()).collect();
    let grouped: Vec<&String> = groups.iter().flatten().collect();
    for l in &grouped {
        rho.layout().index_of(l)?;
    }
    if groups.iter().any(|g| g.is_empty())
        || grouped.len() != grouped.iter().collect::<std::collections::BTreeSet<_>>().len()
    {
        return Err(Error::OverlappingSets("extension groups must be nonempty and disjoint".into()));
    }
    let rest: Vec<String> =
        rho.layout().labels().into_iter().filter(|l| !grouped.iter().any(|g| g == l)).map(String::from).collect();
    let mut parts: Vec<Vec<String>> = rest.iter().map(|l| vec![l.clone()]).collect();
    parts.extend(groups.iter().cloned());
    let merged = rho.merge_parts(&parts)?;
    let group_names: Vec<(String, usize)> = merged.layout().subsystems()[rest.len()..].to_vec();

    let mut subsystems: Vec<(String, usize)> = merged.layout().subsystems()[..rest.len()].to_vec();
    let mut kept = rest.clone();
    let mut copies = Vec::new();
    for (name, d) in &group_names {
        let labels: Vec<String> = (1..=k).map(|c| format!("{name}#{c}")).collect();
        kept.push(labels[0].clone());
        for l in &labels {
            subsystems.push((l.clone(), *d));
        }
        copies.push(labels);
    }
    let layout = SystemLayout::new(subsystems)?;
    let dim = layout.total_dim();
    if dim > opts.dimension_cap {
        return Err(Error::DimensionGuard { dim, cap: opts.dimension_cap });
    }
    let extra_dim = (dim / merged.dim()) as f64;
    let extended: Vec<Vec<String>> = copies.clone();
    let support = common_support(merged.matrix(), &layout, &rest, &copies)?;
    let problem = Problem { layout: layout.clone(), kept, copies, target: merged.matrix().clone(), extra_dim };
    if support.as_ref().is_some_and(|v| v.cols() == 0) {
        // no nonzero operator fits inside every placement of supp(ρ)
        return Ok(FeasibilityCertificate {
            status: FeasibilityStatus::InfeasibleEvidence,
            iterations: 0,
            residual: 1.0,
            k,
            extended,
            witness_state: None,
        });
    }

    let mut total_iters = 0;
    let mut best = f64::INFINITY;
    let mut all_plateaued = true;
    for r in 0..cfg.restarts {
        let x0 = if r == 0 {
            let pad = DensityMatrix::maximally_mixed(
                layout.select(&problem.copies.iter().flat_map(|c| c[1..].to_vec()).collect::<Vec<_>>())?,
            );
            merged
                .with_layout(SystemLayout::new(problem.kept.iter().cloned().zip(merged.layout().dims()))?)?
                .tensor(&pad)?
                .reordered(&layout.labels())?
                .into_matrix()
        } else {
            random_mixed(&layout, &mut rng(derive_seed(cfg.seed, r as u64))).into_matrix()
        };
        let mut x = x0;
        let mut corr = ComplexMatrix::zeros(dim, dim);
        let mut history = Vec::with_capacity(opts.cycles);
        let mut reached = false;
        let mut witness = None;
        for _ in 0..opts.cycles.max(1) {
            total_iters += 1;
            let y = problem.project_marginal(&problem.state(x))?;
            let z = problem.project_symmetric(&problem.state(y))?;
            let w = &z + &corr;
            let xp = project_psd(&w, support.as_ref())?;
            corr = &w - &xp;
            x = xp;
            // symmetrizing a PSD operator keeps it PSD, so only the marginal can be off
            let cand = problem.state(problem.project_symmetric(&problem.state(x.clone()))?);
            let res = problem.marginal_error(&cand)?;
            history.push(res);
            best = best.min(res);
            if res <= cfg.tol {
                reached = true;
                witness = Some(cand);
                break;
            }
        }
        if reached {
            let mut w = witness.expect("set with reached");
            let tr = w.matrix().trace().re;
            w = problem.state(w.into_matrix().scale(1.0 / tr));
            let residual = problem.marginal_error(&w)?;
            return Ok(FeasibilityCertificate {
                status: FeasibilityStatus::Feasible,
                iterations: total_iters,
                residual,
                k,
                extended,
                witness_state: Some(w),
            });
        }
        let n = history.len();
        let end = history[n - 1];
        let earlier = history[(n * 4) / 5];
        if !(end > cfg.tol && end >= 0.95 * earlier) {
            all_plateaued = false;
        }
    }
    let residual = best;
    let status = if all_plateaued { FeasibilityStatus::InfeasibleEvidence } else { FeasibilityStatus::Undecided };
    Ok(FeasibilityCertificate { status, iterations: total_iters, residual, k, extended, witness_state: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::named_state;
    use std::collections::BTreeMap;

    fn cfg() -> OptimizerConfig {
        OptimizerConfig { restarts: 2, max_iters: 200, tol: 1e-8, ..Default::default() }
    }

    fn werner(p: f64) -> DensityMatrix {
        let mut params = BTreeMap::new();
        params.insert("p".to_string(), p.to_string());
        named_state("werner", &params).unwrap()
    }

    #[test]
    fn product_state_is_extendible() {
        let s = named_state("product", &BTreeMap::new()).unwrap();
        let c = dykstra_k_extendibility(&s, &[vec!["B"]], 3, &cfg()).unwrap();
        assert_eq!(c.status, FeasibilityStatus::Feasible);
        let w = c.witness_state.unwrap();
        assert!(w.eigenvalues().unwrap()[0] > -1e-8);
    }

    #[test]
    fn bell_state_is_not_two_extendible() {
        let s = named_state("bell", &BTreeMap::new()).unwrap();
        let c = dykstra_k_extendibility(&s, &[vec!["B"]], 2, &cfg()).unwrap();
        assert_eq!(c.status, FeasibilityStatus::InfeasibleEvidence);
    }

    #[test]
    fn werner_split() {
        assert_eq!(
            dykstra_k_extendibility(&werner(0.1), &[vec!["B"]], 2, &cfg()).unwrap().status,
            FeasibilityStatus::Feasible
        );
        assert_eq!(
            dykstra_k_extendibility(&werner(0.9), &[vec!["B"]], 2, &cfg()).unwrap().status,
            FeasibilityStatus::InfeasibleEvidence
        );
    }

    #[test]
    fn dimension_guard() {
        let s = named_state("ghz", &BTreeMap::new()).unwrap();
        let err = dykstra_k_extendibility(&s, &[vec!["A2"], vec!["A3"]], 4, &cfg()).unwrap_err();
        assert!(matches!(err, Error::DimensionGuard { .. }));
    }
}
