//! Upper bounds on the conditional entanglement of multipartite information
//! (half the infimum of the gap over extensions).
//!
//! The searched family: purify ρ onto a reference R, measure R with a rank-one
//! POVM, and copy the (coarse-grained) outcome into every primed register.
//! For that extension the gap is the average multipartite information of the
//! resulting ensemble, so evaluations never build the extended state.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::recovery::search_local_recoveries;
use super::search::{compass_search, givens_param_count, givens_unitary};
use super::OptimizerConfig;
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, SystemLayout};
use crate::linalg::ComplexMatrix;
use crate::measures::{self, FidelityTarget, PartyPair, ToleranceProfile};
use crate::states::{derive_seed, prime_label, rng, uniform};

/// Gap of one extension; half of it bounds the CEMI from above.
pub fn cemi_gap_for_extension(rho_ext: &DensityMatrix, pairs: &[PartyPair], tol: &ToleranceProfile) -> Result<f64> {
    measures::gap(rho_ext, pairs, tol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CemiSearch {
    /// Best gap found, halved.
    pub value: f64,
    /// The extension attaining it, with primes interleaved after each part.
    pub extension: DensityMatrix,
    pub pairs: Vec<PartyPair>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricCemi {
    /// −½ ln of the best fidelity found.
    pub value: f64,
    pub fidelity: f64,
    /// Gap of the extension the recoveries were searched on.
    pub extension_gap: f64,
}

struct Ensemble {
    /// Unnormalized conditional states, one per flag value.
    states: Vec<ComplexMatrix>,
}

/// psi: amplitudes over (system ⊗ R), system-major; w: r × n columns.
fn ensemble(psi: &[C64], ds: usize, r: usize, w: &ComplexMatrix, flags: usize) -> Ensemble {
    let n = w.cols();
    let mut states = vec![ComplexMatrix::zeros(ds, ds); flags];
    let mut v = vec![C64::new(0.0, 0.0); ds];
    for x in 0..n {
        // v = (I ⊗ ⟨w_x|) ψ
        for (s, vs) in v.iter_mut().enumerate() {
            *vs = (0..r).map(|j| w[(j, x)].conj() * psi[s * r + j]).sum();
        }
        let st = &mut states[x % flags];
        for a in 0..ds {
            for b in 0..ds {
                st[(a, b)] += v[a] * v[b].conj();
            }
        }
    }
    Ensemble { states }
}

fn average_information(
    ens: &Ensemble,
    layout: &SystemLayout,
    parts: &[Vec<String>],
    tol: &ToleranceProfile,
) -> Result<f64> {
    let mut total = 0.0;
    for s in &ens.states {
        let p = s.trace().re;
        if p <= 1e-14 {
            continue;
        }
        let state = DensityMatrix::from_parts_unchecked(layout.clone(), s.scale(1.0 / p));
        total += p * measures::multipartite_information(&state, parts, tol)?;
    }
    Ok(total)
}

fn build_extension(
    ens: &Ensemble,
    layout: &SystemLayout,
    parts: &[Vec<String>],
    ext_dims: &[usize],
) -> Result<(DensityMatrix, Vec<PartyPair>)> {
    let mut terms = Vec::new();
    let mut weights = Vec::new();
    let mut pairs = Vec::new();
    let mut order = Vec::new();
    for part in parts {
        let prime = prime_label(&part[0]);
        order.extend(part.iter().cloned());
        order.push(prime.clone());
        pairs.push(PartyPair::new(part, std::slice::from_ref(&prime)));
    }
    for (x, s) in ens.states.iter().enumerate() {
        let p = s.trace().re;
        if p <= 1e-14 {
            continue;
        }
        let mut t = DensityMatrix::from_parts_unchecked(layout.clone(), s.scale(1.0 / p));
        for (part, &d) in parts.iter().zip(ext_dims) {
            let flag = SystemLayout::new([(prime_label(&part[0]), d)])?;
            t = t.tensor(&DensityMatrix::basis_state(flag, x)?)?;
        }
        terms.push(t);
        weights.push(p);
    }
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok((DensityMatrix::mixture(&weights, &terms)?.reordered(&order)?, pairs))
}

/// Best-found CEMI upper bound over classical-flag extensions with primed
/// dimensions `ext_dims` (one per part). Restart 0 measures R in its
/// Schmidt basis; the others start from random bases.
pub fn cemi_upper_bound_search<S: AsRef<str>>(
    rho: &DensityMatrix,
    parts: &[Vec<S>],
    ext_dims: &[usize],
    cfg: &OptimizerConfig,
    tol: &ToleranceProfile,
) -> Result<CemiSearch> {
    cfg.validate()?;
    if ext_dims.len() != parts.len() {
        return Err(Error::ArityMismatch { expected: parts.len(), got: ext_dims.len() });
    }
    if ext_dims.contains(&0) {
        return Err(Error::Shape("extension dimensions must be positive".into()));
    }
    let parts: Vec<Vec<String>> = parts.iter().map(|p| p.iter().map(|s| s.as_ref().to_string()).collect()).collect();
    // validates the partition
    measures::multipartite_information(rho, &parts, tol)?;
    let flags = ext_dims.iter().copied().min().unwrap_or(1).max(1);

    let pure = rho.purify("R")?;
    let layout = rho.layout().clone();
    let ds = layout.total_dim();
    let r = pure.layout().dim_of("R")?;
    let psi = pure.amplitudes().to_vec();
    let n = r.max(flags);
    let np = givens_param_count(n);

    let objective = |x: &[f64]| -> f64 {
        let u = givens_unitary(n, x);
        let w = ComplexMatrix::from_fn(r, n, |j, k| u[(j, k)]);
        average_information(&ensemble(&psi, ds, r, &w, flags), &layout, &parts, tol).unwrap_or(f64::INFINITY)
    };

    let runs: Vec<(f64, Vec<f64>)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|k| {
            let x0: Vec<f64> = if k == 0 {
                vec![0.0; np]
            } else {
                let mut g = rng(derive_seed(cfg.seed, k as u64));
                (0..np).map(|_| std::f64::consts::PI * (2.0 * uniform(&mut g) - 1.0)).collect()
            };
            let res = compass_search(objective, &x0, cfg.step_init, cfg.tol, cfg.max_iters, 0.0);
            (res.value, res.x)
        })
        .collect();
    let mut best: Option<&(f64, Vec<f64>)> = None;
    for run in runs.iter().filter(|r| r.0.is_finite()) {
        if best.is_none_or(|b| run.0 < b.0) {
            best = Some(run);
        }
    }
    let (gap, x) = best.ok_or_else(|| Error::OptimizerFailure("no restart produced a finite gap".into()))?;
    let u = givens_unitary(n, x);
    let w = ComplexMatrix::from_fn(r, n, |j, k| u[(j, k)]);
    let (extension, pairs) = build_extension(&ensemble(&psi, ds, r, &w, flags), &layout, &parts, ext_dims)?;
    Ok(CemiSearch { value: 0.5 * gap.max(0.0), extension, pairs })
}

/// Exploratory: the extension from [`cemi_upper_bound_search`] followed by a
/// search over local recoveries maximizing F(ρ_ext, (⊗ℛⁱ)(ρ_primes)).
pub fn geometric_cemi<S: AsRef<str>>(
    rho: &DensityMatrix,
    parts: &[Vec<S>],
    ext_dims: &[usize],
    cfg: &OptimizerConfig,
    tol: &ToleranceProfile,
) -> Result<GeometricCemi> {
    let ext = cemi_upper_bound_search(rho, parts, ext_dims, cfg, tol)?;
    let target = FidelityTarget::new(&ext.extension)?;
    let score = |out: &DensityMatrix| -> Result<f64> { Ok(-target.fidelity(out)?) };
    let mask = vec![true; ext.pairs.len()];
    let search = search_local_recoveries(&ext.extension, &ext.pairs, &mask, cfg, 0, &score, -1.0)?;
    let fidelity = (-search.score).clamp(0.0, 1.0);
    Ok(GeometricCemi { value: -0.5 * fidelity.ln(), fidelity, extension_gap: 2.0 * ext.value })
}
