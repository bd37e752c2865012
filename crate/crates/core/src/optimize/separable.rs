//! Certified upper bounds on the trace distance to fully separable states.
//!
//! Fully-corrective Frank-Wolfe on ½‖ρ − σ‖_F² over the convex hull of pure
//! product states. The linear minimization oracle alternates minimum
//! eigenvectors party by party. Every iterate is an explicit mixture of
//! product states, so ‖ρ − σ‖₁ bounds the distance to SEP from above.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::OptimizerConfig;
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, SystemLayout};
use crate::linalg::{self, ComplexMatrix};
use crate::states::{complex_normal, derive_seed, rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableWitness {
    /// ‖ρ − witness‖₁ for the best iterate.
    pub ub: f64,
    /// Fully separable across the requested parts, in ρ's label order.
    pub witness: DensityMatrix,
    /// Best-so-far bound after each iteration (non-increasing).
    pub history: Vec<f64>,
    pub atoms: usize,
}

fn kron_all(vs: &[Vec<C64>]) -> Vec<C64> {
    let mut acc = vec![C64::new(1.0, 0.0)];
    for v in vs {
        acc = linalg::kron_vec(&acc, v);
    }
    acc
}

fn normalize(v: &mut [C64]) {
    let n = linalg::vec_norm(v);
    v.iter_mut().for_each(|z| *z /= n);
}

/// ⟨φ_{−i}| G |φ_{−i}⟩ as an operator on party i.
fn effective_operator(g: &ComplexMatrix, factors: &[Vec<C64>], dims: &[usize], i: usize) -> ComplexMatrix {
    let total: usize = dims.iter().product();
    let di = dims[i];
    let stride: usize = dims[i + 1..].iter().product();
    // weight of each full index excluding party i's digit
    let coeff = |idx: usize| -> C64 {
        let mut rem = idx;
        let mut c = C64::new(1.0, 0.0);
        for j in (0..dims.len()).rev() {
            let digit = rem % dims[j];
            rem /= dims[j];
            if j != i {
                c *= factors[j][digit];
            }
        }
        c
    };
    let coeffs: Vec<C64> = (0..total).map(coeff).collect();
    let digit_i = |idx: usize| (idx / stride) % di;
    let mut m = ComplexMatrix::zeros(di, di);
    for r in 0..total {
        let cr = coeffs[r].conj();
        if cr == C64::new(0.0, 0.0) {
            continue;
        }
        let a = digit_i(r);
        for c in 0..total {
            let b = digit_i(c);
            m[(a, b)] += cr * g[(r, c)] * coeffs[c];
        }
    }
    m
}

/// Product vector approximately minimizing ⟨ψ|G|ψ⟩.
fn product_lmo(g: &ComplexMatrix, dims: &[usize], start: Vec<Vec<C64>>) -> (Vec<Vec<C64>>, f64) {
    let mut factors = start;
    let mut value = f64::INFINITY;
    for _ in 0..50 {
        for i in 0..dims.len() {
            let m = effective_operator(g, &factors, dims, i).hermitian_part();
            if let Ok(eig) = linalg::hermitian_eig(&m, f64::INFINITY) {
                factors[i] = eig.vector(0);
            }
        }
        let psi = kron_all(&factors);
        let v = linalg::inner(&psi, &g.mul_vec(&psi)).re;
        if value - v < 1e-13 {
            value = value.min(v);
            break;
        }
        value = v;
    }
    (factors, value)
}

/// Projected-gradient minimization of ½ wᵀQw − bᵀw over the simplex.
fn simplex_qp(q: &[Vec<f64>], b: &[f64], mut w: Vec<f64>, iters: usize) -> Vec<f64> {
    let n = w.len();
    let lip = (0..n).map(|i| q[i].iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-12);
    for _ in 0..iters {
        let grad: Vec<f64> = (0..n).map(|i| q[i].iter().zip(&w).map(|(a, x)| a * x).sum::<f64>() - b[i]).collect();
        let y: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| x - g / lip).collect();
        let next = project_simplex(&y);
        let change: f64 = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
        w = next;
        if change < 1e-15 {
            break;
        }
    }
    w
}

fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        css += uj;
        let t = (css - 1.0) / (j as f64 + 1.0);
        if uj - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn mixture_matrix(atoms: &[Vec<C64>], w: &[f64], d: usize) -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(d, d);
    for (psi, &wi) in atoms.iter().zip(w) {
        if wi <= 0.0 {
            continue;
        }
        for a in 0..d {
            let pa = psi[a] * wi;
            for b in 0..d {
                s[(a, b)] += pa * psi[b].conj();
            }
        }
    }
    s
}

/// Upper bound on min_{σ ∈ SEP} ‖ρ − σ‖₁ with an explicit separable witness.
pub fn separable_distance_witness<S: AsRef<str>>(
    rho: &DensityMatrix,
    parts: &[Vec<S>],
    cfg: &OptimizerConfig,
) -> Result<SeparableWitness> {
    cfg.validate()?;
    let merged = rho.merge_parts(parts)?;
    let dims = merged.layout().dims();
    let d = merged.dim();
    let target = merged.matrix();

    // initial atoms: products of marginal eigenvectors
    let mut eig_vecs = Vec::new();
    for l in merged.layout().labels() {
        let e = merged.partial_trace(&[l])?.eig()?;
        eig_vecs.push((0..e.dim()).map(|k| e.vector(k)).collect::<Vec<_>>());
    }
    let mut atoms: Vec<Vec<C64>> = Vec::new();
    let mut factor_sets: Vec<Vec<Vec<C64>>> = Vec::new();
    for idx in 0..d {
        let mut rem = idx;
        let mut f = vec![Vec::new(); dims.len()];
        for i in (0..dims.len()).rev() {
            f[i] = eig_vecs[i][rem % dims[i]].clone();
            rem /= dims[i];
        }
        atoms.push(kron_all(&f));
        factor_sets.push(f);
    }

    let overlap = |a: &[C64], b: &[C64]| linalg::inner(a, b).norm_sqr();
    let expect = |a: &[C64]| linalg::inner(a, &target.mul_vec(a)).re;
    let mut q: Vec<Vec<f64>> = atoms.iter().map(|a| atoms.iter().map(|b| overlap(a, b)).collect()).collect();
    let mut bvec: Vec<f64> = atoms.iter().map(|a| expect(a)).collect();
    let mut w = simplex_qp(&q, &bvec, vec![1.0 / atoms.len() as f64; atoms.len()], 500);

    let mut g = rng(derive_seed(cfg.seed, 0));
    let mut best_ub = f64::INFINITY;
    let mut best_w = w.clone();
    let mut best_atoms = atoms.clone();
    let mut history = Vec::with_capacity(cfg.max_iters + 1);
    for it in 0..=cfg.max_iters {
        let sigma = mixture_matrix(&atoms, &w, d);
        let ub = linalg::trace_norm(&(target - &sigma))?;
        if ub < best_ub {
            best_ub = ub;
            best_w = w.clone();
            best_atoms = atoms.clone();
        }
        history.push(best_ub);
        if best_ub <= cfg.tol || it == cfg.max_iters {
            break;
        }
        // gradient of ½‖σ − ρ‖²
        let grad = &sigma - target;
        let mut best_new: Option<(Vec<Vec<C64>>, f64)> = None;
        let mut starts: Vec<Vec<Vec<C64>>> = Vec::new();
        if let Some(k) = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])) {
            starts.push(factor_sets[k].clone());
        }
        for _ in 0..cfg.restarts {
            starts.push(
                dims.iter()
                    .map(|&di| {
                        let mut v: Vec<C64> = (0..di).map(|_| complex_normal(&mut g)).collect();
                        normalize(&mut v);
                        v
                    })
                    .collect(),
            );
        }
        for s in starts {
            let (f, v) = product_lmo(&grad, &dims, s);
            if best_new.as_ref().is_none_or(|b| v < b.1) {
                best_new = Some((f, v));
            }
        }
        let (f, v) = best_new.ok_or_else(|| Error::OptimizerFailure("product oracle produced nothing".into()))?;
        // duality gap ⟨σ − ψψ†, ∇⟩ ≥ 0 bounds suboptimality of the Frobenius objective
        let current = grad.trace_product_re(&sigma);
        if current - v < 1e-16 {
            break;
        }
        let psi = kron_all(&f);
        q.iter_mut().zip(&atoms).for_each(|(row, a)| row.push(overlap(a, &psi)));
        let mut new_row: Vec<f64> = atoms.iter().map(|a| overlap(&psi, a)).collect();
        new_row.push(1.0);
        q.push(new_row);
        bvec.push(expect(&psi));
        atoms.push(psi);
        factor_sets.push(f);
        w.push(0.0);
        w = simplex_qp(&q, &bvec, w, 300);
        // drop atoms with zero weight
        let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 1e-14).collect();
        if keep.len() < w.len() {
            atoms = keep.iter().map(|&i| atoms[i].clone()).collect();
            factor_sets = keep.iter().map(|&i| factor_sets[i].clone()).collect();
            bvec = keep.iter().map(|&i| bvec[i]).collect();
            q = keep.iter().map(|&i| keep.iter().map(|&j| q[i][j]).collect()).collect();
            let s: f64 = keep.iter().map(|&i| w[i]).sum();
            w = keep.iter().map(|&i| w[i] / s).collect();
        }
    }

    let sigma = mixture_matrix(&best_atoms, &best_w, d);
    let flat: Vec<(String, usize)> = parts
        .iter()
        .flat_map(|p| p.iter().map(|l| l.as_ref().to_string()))
        .map(|l| {
            let dim = rho.layout().dim_of(&l)?;
            Ok((l, dim))
        })
        .collect::<Result<_>>()?;
    let witness =
        DensityMatrix::from_parts_clipped(SystemLayout::new(flat)?, &sigma)?.reordered(&rho.layout().labels())?;
    let ub = linalg::trace_norm(&(rho.matrix() - witness.matrix()))?;
    if let Some(last) = history.last_mut() {
        *last = last.min(ub);
    }
    Ok(SeparableWitness { ub, witness, history, atoms: best_atoms.len() })
}
