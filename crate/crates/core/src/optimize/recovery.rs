//! Recovery maps: rotated Petz grids, the β₀-averaged Petz map, and a
//! direct ascent over Kraus operators.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::search::compass_search;
use super::OptimizerConfig;
use crate::channels::{self, Channel};
use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;
use crate::linalg::{self, ComplexMatrix};
use crate::measures::{self, FidelityTarget, PartyPair, ToleranceProfile};

/// Where a recovery channel came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecoverySource {
    RotatedPetz,
    AveragedPetz,
    KrausAscent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    /// Acts on the anchor, outputs lost ∪ anchor.
    pub channel: Channel,
    pub fidelity: f64,
    /// Rotation parameter when the channel is a single rotated Petz map.
    pub t: Option<f64>,
    pub source: RecoverySource,
}

/// Outcome of a joint search over one recovery map per masked party.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalRecoverySearch {
    /// One entry per pair; `None` where the mask leaves the party alone.
    pub channels: Vec<Option<Channel>>,
    pub score: f64,
    /// The recovered state, in the label order of the input.
    pub recovered: DensityMatrix,
}

/// One member of the 2^l family: lhs = gap, rhs = [‖ρ − R(ρ)‖₁ / (2|j|)]².
#[derive(Clone, Debug, PartialEq)]
pub struct LocalRecovery {
    pub mask: Vec<bool>,
    pub channels: Vec<Option<Channel>>,
    pub lhs: f64,
    pub rhs: f64,
    pub trace_distance: f64,
}

/// Re-expresses a channel through the eigenvectors of its Choi matrix, so the
/// Kraus count never exceeds din·dout.
fn compressed(ch: &Channel) -> Result<Channel> {
    let din = ch.in_layout().total_dim();
    let dout = ch.out_layout().total_dim();
    let n = din * dout;
    if ch.kraus().len() <= n {
        return Ok(ch.clone());
    }
    let mut choi = ComplexMatrix::zeros(n, n);
    for k in ch.kraus() {
        let v = k.as_slice();
        for a in 0..n {
            if v[a] == C64::new(0.0, 0.0) {
                continue;
            }
            for b in 0..n {
                choi[(a, b)] += v[a] * v[b].conj();
            }
        }
    }
    let eig = linalg::hermitian_eig(&choi, f64::INFINITY)?;
    let cut = 1e-14 * eig.max_eigenvalue().max(1e-300);
    let kraus: Vec<ComplexMatrix> = (0..n)
        .rev()
        .filter(|&m| eig.eigenvalues[m] > cut)
        .map(|m| {
            let s = eig.eigenvalues[m].sqrt();
            let v = eig.vector(m);
            ComplexMatrix::from_fn(dout, din, |o, i| v[o * din + i] * s)
        })
        .collect();
    Ok(Channel::new_unchecked(ch.in_layout().clone(), ch.out_layout().clone(), kraus))
}

/// β₀(t) = π / (2 (cosh πt + 1)), a probability density on ℝ.
fn beta0(t: f64) -> f64 {
    std::f64::consts::FRAC_PI_2 / ((std::f64::consts::PI * t).cosh() + 1.0)
}

/// Mixture of rotated Petz maps weighted by β₀ (trapezoid rule on [−8, 8],
/// weights renormalized), compressed to at most din·dout Kraus operators.
pub fn averaged_petz_recovery<S: AsRef<str>>(rho_ac: &DensityMatrix, c_labels: &[S]) -> Result<Channel> {
    let n = 80;
    let h = 16.0 / n as f64;
    let ts: Vec<f64> = (0..=n).map(|j| -8.0 + h * j as f64).collect();
    let w: Vec<f64> =
        ts.iter().enumerate().map(|(j, &t)| if j == 0 || j == n { 0.5 * beta0(t) } else { beta0(t) }).collect();
    let total: f64 = w.iter().sum();
    let mut kraus = Vec::new();
    let mut layouts = None;
    for (&t, &wt) in ts.iter().zip(&w) {
        let ch = channels::petz_recovery(rho_ac, c_labels, t)?;
        let s = (wt / total).sqrt();
        kraus.extend(ch.kraus().iter().map(|k| k.scale(s)));
        layouts.get_or_insert_with(|| (ch.in_layout().clone(), ch.out_layout().clone()));
    }
    let (li, lo) = layouts.expect("grid is nonempty");
    compressed(&Channel::new_unchecked(li, lo, kraus))
}

/// Candidates for a recovery anchor → lost ∪ anchor: the Petz grid followed
/// by the averaged map.
fn petz_candidates(marginal: &DensityMatrix, anchor: &[String]) -> Result<Vec<(Channel, Option<f64>, RecoverySource)>> {
    let mut out = Vec::new();
    for t in channels::petz_t_grid() {
        out.push((channels::petz_recovery(marginal, anchor, t)?, Some(t), RecoverySource::RotatedPetz));
    }
    out.push((averaged_petz_recovery(marginal, anchor)?, None, RecoverySource::AveragedPetz));
    Ok(out)
}

/// Kraus operators of each channel stacked into G, padded with one zero
/// block, flattened to real parameters.
struct KrausParams {
    shapes: Vec<(usize, usize, usize)>, // (blocks, dout, din)
    layouts: Vec<(crate::hilbert::SystemLayout, crate::hilbert::SystemLayout)>,
}

impl KrausParams {
    fn encode(channels: &[Channel]) -> (Self, Vec<f64>) {
        let mut shapes = Vec::new();
        let mut layouts = Vec::new();
        let mut x = Vec::new();
        for ch in channels {
            let din = ch.in_layout().total_dim();
            let dout = ch.out_layout().total_dim();
            let blocks = (ch.kraus().len() + 1).min(din * dout).max(ch.kraus().len());
            for b in 0..blocks {
                for o in 0..dout {
                    for i in 0..din {
                        let z = ch.kraus().get(b).map_or(C64::new(0.0, 0.0), |k| k[(o, i)]);
                        x.push(z.re);
                        x.push(z.im);
                    }
                }
            }
            shapes.push((blocks, dout, din));
            layouts.push((ch.in_layout().clone(), ch.out_layout().clone()));
        }
        (Self { shapes, layouts }, x)
    }

    fn decode(&self, x: &[f64]) -> Option<Vec<Channel>> {
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.shapes.len());
        for (&(blocks, dout, din), (li, lo)) in self.shapes.iter().zip(&self.layouts) {
            let len = 2 * blocks * dout * din;
            let xs = &x[offset..offset + len];
            offset += len;
            let g = ComplexMatrix::from_fn(blocks * dout, din, |r, c| {
                let k = 2 * (r * din + c);
                C64::new(xs[k], xs[k + 1])
            });
            let v = linalg::polar_isometry(&g).ok()?;
            let kraus = (0..blocks).map(|b| ComplexMatrix::from_fn(dout, din, |o, i| v[(b * dout + o, i)])).collect();
            out.push(Channel::new_unchecked(li.clone(), lo.clone(), kraus));
        }
        Some(out)
    }
}

/// Compass descent of `score` over Kraus parameters, from `start`.
fn kraus_descent(
    start: &[Channel],
    score: &dyn Fn(&[Channel]) -> Result<f64>,
    cfg: &OptimizerConfig,
    sweeps: usize,
    stop_below: f64,
) -> Result<(Vec<Channel>, f64)> {
    let (params, x0) = KrausParams::encode(start);
    let f = |x: &[f64]| -> f64 {
        match params.decode(x) {
            Some(chs) => score(&chs).unwrap_or(f64::INFINITY),
            None => f64::INFINITY,
        }
    };
    let res = compass_search(f, &x0, 0.25 * cfg.step_init, cfg.tol, sweeps, stop_below);
    let chs = params
        .decode(&res.x)
        .ok_or_else(|| Error::OptimizerFailure("Kraus ascent left the isometry manifold".into()))?;
    Ok((chs, res.value))
}

fn sorted_union(rho: &DensityMatrix, a: &[String], b: &[String]) -> Vec<String> {
    rho.layout().labels().into_iter().filter(|l| a.iter().chain(b).any(|x| x == l)).map(String::from).collect()
}

/// Best-found recovery anchor → lost ∪ anchor; F(ρ, R(Tr_lost ρ)).
pub fn optimize_recovery<S: AsRef<str>>(
    rho: &DensityMatrix,
    lost: &[S],
    anchor: &[S],
    cfg: &OptimizerConfig,
) -> Result<RecoveryResult> {
    optimize_recovery_until(rho, lost, anchor, cfg, 1.0)
}

/// As [`optimize_recovery`], returning as soon as the fidelity reaches `stop_at`.
pub fn optimize_recovery_until<S: AsRef<str>>(
    rho: &DensityMatrix,
    lost: &[S],
    anchor: &[S],
    cfg: &OptimizerConfig,
    stop_at: f64,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    let lost: Vec<String> = lost.iter().map(|s| s.as_ref().to_string()).collect();
    let anchor: Vec<String> = anchor.iter().map(|s| s.as_ref().to_string()).collect();
    rho.layout().indices_of(&lost)?;
    rho.layout().indices_of(&anchor)?;
    if lost.iter().any(|l| anchor.contains(l)) {
        return Err(Error::OverlappingSets("lost and anchor systems overlap".into()));
    }
    let order: Vec<String> = rho.layout().labels().into_iter().map(String::from).collect();
    let target = FidelityTarget::new(rho)?;
    let reduced = rho.trace_out(&lost)?;
    let marginal = rho.partial_trace(&sorted_union(rho, &lost, &anchor))?;
    let fid = |ch: &Channel| -> Result<f64> {
        let out = channels::apply_channel(ch, &reduced)?.reordered(&order)?;
        target.fidelity(&out)
    };

    let mut best: Option<RecoveryResult> = None;
    for (ch, t, source) in petz_candidates(&marginal, &anchor)? {
        let f = fid(&ch)?;
        if best.as_ref().is_none_or(|b| f > b.fidelity) {
            best = Some(RecoveryResult { channel: ch, fidelity: f, t, source });
        }
        if f >= stop_at {
            break;
        }
    }
    let mut best = best.ok_or_else(|| Error::OptimizerFailure("no recovery candidate".into()))?;
    if best.fidelity < stop_at && cfg.max_iters > 0 {
        let score = |chs: &[Channel]| -> Result<f64> { Ok(-fid(&chs[0])?) };
        let (chs, v) = kraus_descent(std::slice::from_ref(&best.channel), &score, cfg, cfg.max_iters, -stop_at)?;
        if -v > best.fidelity {
            let channel = chs.into_iter().next().expect("one channel");
            best = RecoveryResult { fidelity: fid(&channel)?, channel, t: None, source: RecoverySource::KrausAscent };
        }
    }
    Ok(best)
}

fn apply_local(reduced: &DensityMatrix, channels: &[Option<&Channel>], order: &[String]) -> Result<DensityMatrix> {
    let mut state = reduced.clone();
    for ch in channels.iter().flatten() {
        state = channels::apply_channel(ch, &state)?;
    }
    state.reordered(order)
}

/// Searches one recovery map A_i′ → A_iA_i′ per masked pair, minimizing
/// `score` of the recovered state. Order: a common grid index for all masked
/// parties, then coordinate descent over per-party candidates, then (if
/// `ascent_sweeps > 0`) a joint Kraus descent. Stops once `score ≤ stop_at`.
pub fn search_local_recoveries(
    rho: &DensityMatrix,
    pairs: &[PartyPair],
    mask: &[bool],
    cfg: &OptimizerConfig,
    ascent_sweeps: usize,
    score: &dyn Fn(&DensityMatrix) -> Result<f64>,
    stop_at: f64,
) -> Result<LocalRecoverySearch> {
    cfg.validate()?;
    if mask.len() != pairs.len() {
        return Err(Error::ArityMismatch { expected: pairs.len(), got: mask.len() });
    }
    let order: Vec<String> = rho.layout().labels().into_iter().map(String::from).collect();
    let lost: Vec<String> = pairs.iter().zip(mask).filter(|(_, &m)| m).flat_map(|(p, _)| p.system.clone()).collect();
    let reduced = rho.trace_out(&lost)?;
    let masked: Vec<usize> = (0..pairs.len()).filter(|&i| mask[i]).collect();
    if masked.is_empty() {
        let s = score(rho)?;
        return Ok(LocalRecoverySearch { channels: vec![None; pairs.len()], score: s, recovered: rho.clone() });
    }

    let mut cands: Vec<Vec<Channel>> = Vec::new();
    for &i in &masked {
        let p = &pairs[i];
        let marginal = rho.partial_trace(&sorted_union(rho, &p.system, &p.extension))?;
        cands.push(petz_candidates(&marginal, &p.extension)?.into_iter().map(|c| c.0).collect());
    }
    let n_cand = cands[0].len();
    let eval = |choice: &[usize]| -> Result<(f64, DensityMatrix)> {
        let chs: Vec<Option<&Channel>> = choice.iter().zip(&cands).map(|(&k, c)| Some(&c[k])).collect();
        let out = apply_local(&reduced, &chs, &order)?;
        Ok((score(&out)?, out))
    };

    let mut choice = vec![0; masked.len()];
    let (mut best, mut best_out) = eval(&choice)?;
    'common: for k in 1..n_cand {
        if best <= stop_at {
            break 'common;
        }
        let c = vec![k; masked.len()];
        let (s, out) = eval(&c)?;
        if s < best {
            (best, best_out, choice) = (s, out, c);
        }
    }
    if masked.len() > 1 {
        for _pass in 0..3 {
            let mut improved = false;
            for m in 0..masked.len() {
                for k in 0..n_cand {
                    if best <= stop_at {
                        break;
                    }
                    if k == choice[m] {
                        continue;
                    }
                    let mut c = choice.clone();
                    c[m] = k;
                    let (s, out) = eval(&c)?;
                    if s < best {
                        (best, best_out, choice) = (s, out, c);
                        improved = true;
                    }
                }
            }
            if !improved || best <= stop_at {
                break;
            }
        }
    }
    let mut chosen: Vec<Channel> = choice.iter().zip(&cands).map(|(&k, c)| c[k].clone()).collect();
    if ascent_sweeps > 0 && best > stop_at {
        let joint = |chs: &[Channel]| -> Result<f64> {
            let refs: Vec<Option<&Channel>> = chs.iter().map(Some).collect();
            score(&apply_local(&reduced, &refs, &order)?)
        };
        let (chs, v) = kraus_descent(&chosen, &joint, cfg, ascent_sweeps, stop_at)?;
        if v < best {
            let refs: Vec<Option<&Channel>> = chs.iter().map(Some).collect();
            best_out = apply_local(&reduced, &refs, &order)?;
            best = score(&best_out)?;
            chosen = chs;
        }
    }
    let mut channels = vec![None; pairs.len()];
    for (&i, ch) in masked.iter().zip(chosen) {
        channels[i] = Some(ch);
    }
    Ok(LocalRecoverySearch { channels, score: best, recovered: best_out })
}

/// The mask-`j` member of the local recoverability family with best-found
/// local recoveries (trace distance minimized).
pub fn local_recovery_suite(
    rho: &DensityMatrix,
    pairs: &[PartyPair],
    mask: &[bool],
    cfg: &OptimizerConfig,
    tol: &ToleranceProfile,
) -> Result<LocalRecovery> {
    let lhs = measures::gap(rho, pairs, tol)?;
    if mask.len() != pairs.len() {
        return Err(Error::ArityMismatch { expected: pairs.len(), got: mask.len() });
    }
    let weight = mask.iter().filter(|&&m| m).count();
    if weight == 0 {
        return Ok(LocalRecovery {
            mask: mask.to_vec(),
            channels: vec![None; pairs.len()],
            lhs,
            rhs: 0.0,
            trace_distance: 0.0,
        });
    }
    let score = |out: &DensityMatrix| measures::trace_distance(rho, out);
    let sweeps = cfg.max_iters.min(50);
    let search = search_local_recoveries(rho, pairs, mask, cfg, sweeps, &score, cfg.tol)?;
    let td = search.score;
    let rhs = (td / (2.0 * weight as f64)).powi(2);
    Ok(LocalRecovery { mask: mask.to_vec(), channels: search.channels, lhs, rhs, trace_distance: td })
}
