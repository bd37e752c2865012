//! Best-found −ln F(ρ, (ℰ¹⊗⋯⊗ℰ^l)(ρ)) over local measure-and-prepare channels.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::discord::outcome_distribution;
use super::search::{compass_search, givens_param_count, givens_unitary};
use super::OptimizerConfig;
use crate::channels::{self, Channel, Povm};
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, SystemLayout};
use crate::linalg::ComplexMatrix;
use crate::measures::FidelityTarget;
use crate::states::{derive_seed, gaussian_pair, rng, uniform};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurprisalResult {
    /// −ln of the best fidelity found.
    pub value: f64,
    pub fidelity: f64,
    /// One measure-and-prepare channel per part, on the merged part labels.
    pub channels: Vec<Channel>,
    pub povms: Vec<Povm>,
}

/// One party's channel: basis U0·G(θ) and preparations σ_x = M_x M_x† / Tr.
#[derive(Clone)]
struct PartyEb {
    dim: usize,
    u0: ComplexMatrix,
}

impl PartyEb {
    fn n_params(&self) -> usize {
        givens_param_count(self.dim) + self.dim * 2 * self.dim * self.dim
    }

    fn decode(&self, x: &[f64]) -> (ComplexMatrix, Vec<ComplexMatrix>) {
        let d = self.dim;
        let ng = givens_param_count(d);
        let basis = self.u0.matmul(&givens_unitary(d, &x[..ng]));
        let mut preps = Vec::with_capacity(d);
        let per = 2 * d * d;
        for k in 0..d {
            let xs = &x[ng + k * per..ng + (k + 1) * per];
            let m = ComplexMatrix::from_fn(d, d, |r, c| C64::new(xs[2 * (r * d + c)], xs[2 * (r * d + c) + 1]));
            let s = m.matmul_adjoint(&m);
            let tr = s.trace().re;
            preps.push(if tr > 1e-300 { s.scale(1.0 / tr) } else { ComplexMatrix::identity(d).scale(1.0 / d as f64) });
        }
        (basis, preps)
    }

    /// Parameters reproducing preparations `sigma` (via their square roots).
    fn encode_preps(&self, sigma: &[ComplexMatrix]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; givens_param_count(self.dim)];
        for s in sigma {
            let r = crate::linalg::psd_sqrt(s)?;
            for z in r.as_slice() {
                x.push(z.re);
                x.push(z.im);
            }
        }
        Ok(x)
    }
}

fn output_state(rho: &ComplexMatrix, parties: &[PartyEb], x: &[f64]) -> ComplexMatrix {
    let mut offset = 0;
    let mut w: Option<ComplexMatrix> = None;
    let mut preps = Vec::with_capacity(parties.len());
    for p in parties {
        let (b, s) = p.decode(&x[offset..offset + p.n_params()]);
        offset += p.n_params();
        w = Some(match w {
            None => b,
            Some(acc) => acc.kron(&b),
        });
        preps.push(s);
    }
    let probs = outcome_distribution(rho, &w.expect("at least one part"));
    let dims: Vec<usize> = parties.iter().map(|p| p.dim).collect();
    let n = rho.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (idx, &px) in probs.iter().enumerate() {
        if px <= 1e-16 {
            continue;
        }
        let mut rem = idx;
        let mut digits = vec![0; dims.len()];
        for i in (0..dims.len()).rev() {
            digits[i] = rem % dims[i];
            rem /= dims[i];
        }
        let mut term = preps[0][digits[0]].clone();
        for i in 1..dims.len() {
            term = term.kron(&preps[i][digits[i]]);
        }
        out = &out + &term.scale(px);
    }
    out
}

fn basis_projectors(u: &ComplexMatrix) -> Vec<ComplexMatrix> {
    (0..u.cols())
        .map(|c| {
            let v = u.column(c);
            ComplexMatrix::outer(&v, &v)
        })
        .collect()
}

/// Best-found surprisal of measurement recoverability. Starts: computational
/// dephasing, dephasing in each marginal's eigenbasis, and replacement by the
/// marginal; then compass refinement of the best start plus random restarts.
pub fn surprisal_of_measurement_recoverability<S: AsRef<str>>(
    rho: &DensityMatrix,
    parts: &[Vec<S>],
    cfg: &OptimizerConfig,
) -> Result<SurprisalResult> {
    cfg.validate()?;
    let merged = rho.merge_parts(parts)?;
    let labels: Vec<String> = merged.layout().labels().iter().map(|s| s.to_string()).collect();
    let target = FidelityTarget::new(&merged)?;

    let mut eig_bases = Vec::new();
    let mut marginals = Vec::new();
    for l in &labels {
        let m = merged.partial_trace(&[l.as_str()])?;
        let e = m.eig()?;
        eig_bases.push(ComplexMatrix::from_fn(e.dim(), e.dim(), |r, c| e.vector(c)[r]));
        marginals.push(m.into_matrix());
    }
    let dims = merged.layout().dims();

    // (parties, x) starts
    let mut starts: Vec<(Vec<PartyEb>, Vec<f64>)> = Vec::new();
    for variant in 0..3 {
        let mut parties = Vec::new();
        let mut x = Vec::new();
        for i in 0..labels.len() {
            let u0 = if variant == 0 { ComplexMatrix::identity(dims[i]) } else { eig_bases[i].clone() };
            let p = PartyEb { dim: dims[i], u0 };
            let preps = if variant == 2 { vec![marginals[i].clone(); dims[i]] } else { basis_projectors(&p.u0) };
            x.extend(p.encode_preps(&preps)?);
            parties.push(p);
        }
        starts.push((parties, x));
    }
    let fid = |parties: &[PartyEb], x: &[f64]| -> f64 {
        target.fidelity_matrix(&output_state(merged.matrix(), parties, x)).unwrap_or(0.0)
    };

    let mut best_start = 0;
    let mut best_f = f64::NEG_INFINITY;
    for (k, (p, x)) in starts.iter().enumerate() {
        let f = fid(p, x);
        if f > best_f {
            best_f = f;
            best_start = k;
        }
    }
    let (parties, x_start) = starts.swap_remove(best_start);

    let runs: Vec<(f64, Vec<f64>)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let x0 = if r == 0 {
                x_start.clone()
            } else {
                let mut g = rng(derive_seed(cfg.seed, r as u64));
                let mut x = Vec::new();
                for p in &parties {
                    let ng = givens_param_count(p.dim);
                    x.extend((0..ng).map(|_| std::f64::consts::PI * (2.0 * uniform(&mut g) - 1.0)));
                    x.extend((0..p.n_params() - ng).map(|_| gaussian_pair(&mut g).0));
                }
                x
            };
            let res = compass_search(|x| -fid(&parties, x), &x0, cfg.step_init, cfg.tol, cfg.max_iters, -1.0);
            (-res.value, res.x)
        })
        .collect();

    let mut best: Option<&(f64, Vec<f64>)> = None;
    for run in runs.iter().filter(|r| r.0.is_finite()) {
        if best.is_none_or(|b| run.0 > b.0) {
            best = Some(run);
        }
    }
    let (f, x) = best.ok_or_else(|| Error::OptimizerFailure("no restart produced a finite fidelity".into()))?;

    let mut offset = 0;
    let mut chans = Vec::new();
    let mut povms = Vec::new();
    for (p, l) in parties.iter().zip(&labels) {
        let (basis, preps) = p.decode(&x[offset..offset + p.n_params()]);
        offset += p.n_params();
        let povm = Povm::from_basis(l, &basis)?;
        let layout = SystemLayout::new([(l.clone(), p.dim)])?;
        let states = preps.into_iter().map(|s| DensityMatrix::new(layout.clone(), s)).collect::<Result<Vec<_>>>()?;
        chans.push(channels::eb_channel(&povm, &states)?);
        povms.push(povm);
    }
    let fidelity = f.clamp(0.0, 1.0);
    Ok(SurprisalResult { value: -fidelity.ln(), fidelity, channels: chans, povms })
}
