//! Multipartite symmetric discord: total information minus the best
//! classical information extractable by local measurements.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::search::{compass_search, givens_param_count, givens_unitary};
use super::OptimizerConfig;
use crate::channels::{self, Povm};
use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;
use crate::linalg::ComplexMatrix;
use crate::measures::{self, ToleranceProfile};
use crate::states::{derive_seed, rng, uniform};

/// Search-space options.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiscordOptions {
    /// Rank-one POVMs through a Naimark ancilla instead of projective bases.
    pub general_povm: bool,
    /// Ancilla dimension for general POVMs (0 means 2).
    pub ancilla_dim: usize,
    /// Extra candidate measurements evaluated as given, one POVM per part.
    pub warm_start: Option<Vec<Povm>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscordResult {
    /// Best-found discord: total information minus best classical information.
    pub value: f64,
    pub total_information: f64,
    pub classical_information: f64,
    /// One POVM per part, on the merged part labels.
    pub best_povms: Vec<Povm>,
    /// Restart that produced the best measurement; `None` for a warm start.
    pub restart: Option<usize>,
}

fn classical_information(p: &[f64], outcomes: &[usize], cutoff: f64) -> f64 {
    let h = |q: &[f64]| -> f64 { q.iter().filter(|&&x| x > cutoff).map(|&x| -x * x.ln()).sum() };
    let l = outcomes.len();
    let mut strides = vec![1usize; l];
    for i in (0..l.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * outcomes[i + 1];
    }
    let mut marginal_sum = 0.0;
    for i in 0..l {
        let mut m = vec![0.0; outcomes[i]];
        for (idx, &px) in p.iter().enumerate() {
            m[(idx / strides[i]) % outcomes[i]] += px;
        }
        marginal_sum += h(&m);
    }
    marginal_sum - h(p)
}

/// Outcome distribution of rank-one measurements given by the columns of `w`
/// (already tensored across parties).
pub(super) fn outcome_distribution(rho: &ComplexMatrix, w: &ComplexMatrix) -> Vec<f64> {
    let t = rho.matmul(w);
    (0..w.cols()).map(|x| (0..w.rows()).map(|j| (w[(j, x)].conj() * t[(j, x)]).re).sum::<f64>().max(0.0)).collect()
}

struct PartySpace {
    dim: usize,
    ancilla: usize,
}

impl PartySpace {
    fn n_params(&self) -> usize {
        givens_param_count(self.dim * self.ancilla)
    }

    fn outcomes(&self) -> usize {
        self.dim * self.ancilla
    }

    /// d × n matrix whose columns w_x give effects w_x w_x†.
    fn vectors(&self, params: &[f64]) -> ComplexMatrix {
        let n = self.outcomes();
        let u = givens_unitary(n, params);
        if self.ancilla == 1 {
            return u;
        }
        ComplexMatrix::from_fn(self.dim, n, |j, x| u[(j * self.ancilla, x)])
    }
}

fn povm_from_vectors(system: &str, w: &ComplexMatrix) -> Result<Povm> {
    let effects = (0..w.cols())
        .map(|x| {
            let v = w.column(x);
            ComplexMatrix::outer(&v, &v)
        })
        .collect();
    Povm::new(system, effects)
}

/// Best-found MSQ discord with projective measurements.
pub fn msq_discord<S: AsRef<str> + Sync>(
    rho: &DensityMatrix,
    parts: &[Vec<S>],
    cfg: &OptimizerConfig,
    tol: &ToleranceProfile,
) -> Result<DiscordResult> {
    msq_discord_with(rho, parts, cfg, tol, &DiscordOptions::default())
}

pub fn msq_discord_with<S: AsRef<str> + Sync>(
    rho: &DensityMatrix,
    parts: &[Vec<S>],
    cfg: &OptimizerConfig,
    tol: &ToleranceProfile,
    opts: &DiscordOptions,
) -> Result<DiscordResult> {
    cfg.validate()?;
    let total = measures::multipartite_information(rho, parts, tol)?;
    let merged = rho.merge_parts(parts)?;
    let labels: Vec<String> = merged.layout().labels().iter().map(|s| s.to_string()).collect();
    let ancilla = if opts.general_povm { opts.ancilla_dim.max(2) } else { 1 };
    let spaces: Vec<PartySpace> = merged.layout().dims().into_iter().map(|dim| PartySpace { dim, ancilla }).collect();
    let outcomes: Vec<usize> = spaces.iter().map(PartySpace::outcomes).collect();
    let n_params: usize = spaces.iter().map(PartySpace::n_params).sum();
    let cutoff = tol.entropy_log_cutoff;

    let objective = |x: &[f64]| -> f64 {
        let mut offset = 0;
        let mut w: Option<ComplexMatrix> = None;
        for s in &spaces {
            let wi = s.vectors(&x[offset..offset + s.n_params()]);
            offset += s.n_params();
            w = Some(match w {
                None => wi,
                Some(acc) => acc.kron(&wi),
            });
        }
        let w = w.expect("at least one part");
        -classical_information(&outcome_distribution(merged.matrix(), &w), &outcomes, cutoff)
    };

    let runs: Vec<(f64, Vec<f64>)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let x0: Vec<f64> = if r == 0 {
                vec![0.0; n_params]
            } else {
                let mut g = rng(derive_seed(cfg.seed, r as u64));
                (0..n_params).map(|_| std::f64::consts::PI * (2.0 * uniform(&mut g) - 1.0)).collect()
            };
            let res = compass_search(objective, &x0, cfg.step_init, cfg.tol, cfg.max_iters, -total);
            (-res.value, res.x)
        })
        .collect();

    let mut best: Option<(f64, Option<usize>, Vec<Povm>)> = None;
    for (r, (info, x)) in runs.iter().enumerate() {
        if !info.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| *info > b.0) {
            let mut offset = 0;
            let mut povms = Vec::with_capacity(spaces.len());
            for (s, label) in spaces.iter().zip(&labels) {
                povms.push(povm_from_vectors(label, &s.vectors(&x[offset..offset + s.n_params()]))?);
                offset += s.n_params();
            }
            best = Some((*info, Some(r), povms));
        }
    }

    if let Some(ws) = &opts.warm_start {
        if ws.len() != parts.len() {
            return Err(Error::ArityMismatch { expected: parts.len(), got: ws.len() });
        }
        let relabeled: Vec<Povm> = ws.iter().zip(&labels).map(|(p, l)| p.relabeled(l)).collect();
        let mut measured = merged.clone();
        let mut x_parts = Vec::new();
        for p in &relabeled {
            measured = channels::apply_channel(&channels::measurement_channel(p)?, &measured)?;
            x_parts.push(vec![channels::classical_label(p.system())]);
        }
        let info = measures::multipartite_information(&measured, &x_parts, tol)?;
        if best.as_ref().is_none_or(|b| info > b.0) {
            best = Some((info, None, relabeled));
        }
    }

    let (info, restart, best_povms) =
        best.ok_or_else(|| Error::OptimizerFailure("no restart produced a finite objective".into()))?;
    Ok(DiscordResult {
        value: total - info,
        total_information: total,
        classical_information: info,
        best_povms,
        restart,
    })
}
