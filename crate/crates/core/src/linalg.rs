//! Dense complex matrices and the Hermitian eigensolver everything else sits on.
//!
//! Matrices are stored row-major. The eigensolver is a cyclic complex Jacobi
//! iteration; it is slow compared to tridiagonal QR but very accurate, and the
//! matrices handled here never exceed a few hundred rows.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting NaN/Inf.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        if let Some(i) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(i / cols.max(1), i % cols.max(1)));
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// Builds from separate real and imaginary row lists.
    pub fn from_re_im(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let rows = re.len();
        let cols = re.first().map_or(0, Vec::len);
        if im.len() != rows {
            return Err(Error::Shape("real and imaginary parts differ in row count".into()));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for (r, (rr, ir)) in re.iter().zip(im).enumerate() {
            if rr.len() != cols || ir.len() != cols {
                return Err(Error::Shape(format!("row {r} has the wrong length")));
            }
            data.extend(rr.iter().zip(ir).map(|(&a, &b)| C64::new(a, b)));
        }
        Self::new(rows, cols, data)
    }

    /// Outer product |u><v|.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |r, c| u[r] * v[c].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn re_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).iter().map(|z| z.re).collect()).collect()
    }

    pub fn im_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).iter().map(|z| z.im).collect()).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].re).collect()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max-entry distance to the adjoint.
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut err: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                err = err.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        err
    }

    /// (M + M†) / 2.
    pub fn hermitian_part(&self) -> Self {
        let n = self.rows;
        Self::from_fn(n, n, |r, c| (self[(r, c)] + self[(c, r)].conj()) * 0.5)
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![C64::new(0.0, 0.0); n * m];
        for i in 0..n {
            let orow = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let brow = &rhs.data[p * m..(p + 1) * m];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Self { rows: n, cols: m, data: out }
    }

    /// self · rhs†, without materializing the adjoint.
    pub fn matmul_adjoint(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.cols, "matmul_adjoint shape mismatch");
        let (n, k, m) = (self.rows, self.cols, rhs.rows);
        let mut out = vec![C64::new(0.0, 0.0); n * m];
        for i in 0..n {
            let arow = &self.data[i * k..(i + 1) * k];
            for j in 0..m {
                let brow = &rhs.data[j * k..(j + 1) * k];
                out[i * m + j] = arow.iter().zip(brow).map(|(a, b)| a * b.conj()).sum();
            }
        }
        Self { rows: n, cols: m, data: out }
    }

    /// self† · rhs.
    pub fn adjoint_matmul(&self, rhs: &Self) -> Self {
        self.adjoint().matmul(rhs)
    }

    /// K ρ K†.
    pub fn conjugate(&self, rho: &Self) -> Self {
        self.matmul(rho).matmul_adjoint(self)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// Kronecker product self ⊗ rhs.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (r1, c1, r2, c2) = (self.rows, self.cols, rhs.rows, rhs.cols);
        let mut out = Self::zeros(r1 * r2, c1 * c2);
        for i in 0..r1 {
            for j in 0..c1 {
                let a = self[(i, j)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for k in 0..r2 {
                    for l in 0..c2 {
                        out[(i * r2 + k, j * c2 + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Real part of Tr(self · rhs) for Hermitian arguments.
    pub fn trace_product_re(&self, rhs: &Self) -> f64 {
        assert_eq!(self.cols, rhs.rows);
        assert_eq!(self.rows, rhs.cols);
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += (self[(i, j)] * rhs[(j, i)]).re;
            }
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues, eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// V diag(g(λ)) V†.
    pub fn reconstruct_with(&self, g: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        let weights: Vec<C64> = self.eigenvalues.iter().map(|&l| g(l)).collect();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, w) in weights.iter().enumerate() {
            if w.re == 0.0 && w.im == 0.0 {
                continue;
            }
            for r in 0..n {
                let vr = v[(r, k)] * w;
                if vr.re == 0.0 && vr.im == 0.0 {
                    continue;
                }
                for c in 0..n {
                    out[(r, c)] += vr * v[(c, k)].conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|l| C64::new(l, 0.0))
    }

    /// Column k as a vector.
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.eigenvectors.column(k)
    }
}

fn check_hermitian(m: &ComplexMatrix, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Shape(format!("{}x{} matrix is not square", m.rows, m.cols)));
    }
    let err = m.hermiticity_error();
    if err > tol {
        return Err(Error::NotHermitian(err));
    }
    Ok(())
}

/// Full eigendecomposition of a Hermitian matrix. The input is symmetrized first.
pub fn hermitian_eig(m: &ComplexMatrix, hermiticity_tol: f64) -> Result<HermitianEig> {
    check_hermitian(m, hermiticity_tol)?;
    let n = m.rows;
    let mut a = m.hermitian_part().into_vec();
    let mut v = ComplexMatrix::identity(n).into_vec();
    jacobi(&mut a, n, Some(&mut v))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
    let eigenvalues = order.iter().map(|&i| a[i * n + i].re).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    Ok(HermitianEig { eigenvalues, eigenvectors })
}

/// Eigenvalues only (ascending); skips eigenvector accumulation.
pub fn hermitian_eigenvalues(m: &ComplexMatrix, hermiticity_tol: f64) -> Result<Vec<f64>> {
    check_hermitian(m, hermiticity_tol)?;
    let n = m.rows;
    let mut a = m.hermitian_part().into_vec();
    jacobi(&mut a, n, None)?;
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Cyclic Jacobi on a Hermitian matrix stored row-major in `a`. On return the
/// diagonal holds the eigenvalues and `v` (if given) has been right-multiplied
/// by every rotation.
fn jacobi(a: &mut [C64], n: usize, mut v: Option<&mut Vec<C64>>) -> Result<()> {
    if n <= 1 {
        if n == 1 {
            a[0] = C64::new(a[0].re, 0.0);
        }
        return Ok(());
    }
    let norm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(());
    }
    let floor = 1e-17 * norm;
    for i in 0..n {
        a[i * n + i] = C64::new(a[i * n + i].re, 0.0);
    }
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let r = apq.norm();
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                if r <= floor || r <= f64::EPSILON * (app * aqq).abs().sqrt() {
                    a[p * n + q] = C64::new(0.0, 0.0);
                    a[q * n + p] = C64::new(0.0, 0.0);
                    continue;
                }
                rotated = true;
                let phase = apq / r;
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta == 0.0 { 1.0 } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let s_ph = phase * s; // s e^{iφ}
                let s_ph_conj = s_ph.conj(); // s e^{-iφ}

                // A <- A U (columns p, q)
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * c - s_ph_conj * akq;
                    a[k * n + q] = s_ph * akp + akq * c;
                }
                // A <- U† A (rows p, q)
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = apk * c - s_ph * aqk;
                    a[q * n + k] = s_ph_conj * apk + aqk * c;
                }
                a[p * n + q] = C64::new(0.0, 0.0);
                a[q * n + p] = C64::new(0.0, 0.0);
                a[p * n + p] = C64::new(app - t * r, 0.0);
                a[q * n + q] = C64::new(aqq + t * r, 0.0);

                if let Some(v) = v.as_deref_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = vkp * c - s_ph_conj * vkq;
                        v[k * n + q] = s_ph * vkp + vkq * c;
                    }
                }
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(Error::NoConvergence(MAX_SWEEPS))
}

/// Default support cutoff: 1e-10 times the largest eigenvalue.
pub fn default_support_cutoff(eig: &HermitianEig) -> f64 {
    1e-10 * eig.max_eigenvalue().max(0.0)
}

/// Applies a complex-valued scalar function on the support of a decomposed PSD
/// matrix. Eigenvalues at or below `cutoff` map to zero.
pub fn spectral_map(eig: &HermitianEig, f: impl Fn(f64) -> C64, cutoff: f64) -> Result<ComplexMatrix> {
    for &l in &eig.eigenvalues {
        if l > cutoff {
            let y = f(l);
            if !y.re.is_finite() || !y.im.is_finite() {
                return Err(Error::DomainError(format!("function undefined at eigenvalue {l}")));
            }
        }
    }
    Ok(eig.reconstruct_with(|l| if l > cutoff { f(l) } else { C64::new(0.0, 0.0) }))
}

/// f(M) on the support of a Hermitian PSD matrix: eigenvalues λ ≤ `support_cutoff`
/// are treated as exactly zero and mapped to zero.
pub fn matrix_function_on_support(
    m: &ComplexMatrix,
    f: impl Fn(f64) -> f64,
    support_cutoff: f64,
) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(m, hermiticity_tol_for(m))?;
    spectral_map(&eig, |l| C64::new(f(l), 0.0), support_cutoff)
}

/// Complex-valued variant of [`matrix_function_on_support`], e.g. λ ↦ λ^{(1+it)/2}.
pub fn matrix_function_on_support_complex(
    m: &ComplexMatrix,
    f: impl Fn(f64) -> C64,
    support_cutoff: f64,
) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(m, hermiticity_tol_for(m))?;
    spectral_map(&eig, f, support_cutoff)
}

fn hermiticity_tol_for(m: &ComplexMatrix) -> f64 {
    1e-10 * m.max_abs().max(1.0)
}

/// Schatten-1 norm: sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    let scale = m.max_abs().max(1.0);
    if m.is_square() && m.hermiticity_error() <= 1e-13 * scale {
        let ev = hermitian_eigenvalues(m, f64::INFINITY)?;
        return Ok(ev.iter().map(|l| l.abs()).sum());
    }
    let gram = m.adjoint_matmul(m);
    let ev = hermitian_eigenvalues(&gram, f64::INFINITY)?;
    Ok(ev.iter().map(|l| l.max(0.0).sqrt()).sum())
}

/// Square root of a PSD matrix on its support.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(m, hermiticity_tol_for(m))?;
    let cutoff = default_support_cutoff(&eig);
    spectral_map(&eig, |l| C64::new(l.sqrt(), 0.0), cutoff)
}

/// Inner product <u|v>.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn vec_norm(u: &[C64]) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn kron_vec(u: &[C64], v: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(u.len() * v.len());
    for a in u {
        for b in v {
            out.push(a * b);
        }
    }
    out
}

/// Gram–Schmidt orthonormalization of the columns of `m` (full column rank assumed).
pub fn orthonormalize_columns(m: &ComplexMatrix) -> ComplexMatrix {
    let (rows, cols) = (m.rows(), m.cols());
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(cols);
    for c in 0..cols {
        let mut v = m.column(c);
        for _ in 0..2 {
            for b in &basis {
                let proj = inner(b, &v);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
        }
        let nrm = vec_norm(&v);
        for x in &mut v {
            *x /= nrm;
        }
        basis.push(v);
    }
    ComplexMatrix::from_fn(rows, cols, |r, c| basis[c][r])
}

/// Maps G to G (G†G)^{-1/2}, the closest isometry (polar factor).
pub fn polar_isometry(g: &ComplexMatrix) -> Result<ComplexMatrix> {
    let gram = g.adjoint_matmul(g);
    let eig = hermitian_eig(&gram, f64::INFINITY)?;
    if eig.min_eigenvalue() <= 1e-14 * eig.max_eigenvalue().max(1e-300) {
        return Err(Error::DomainError("rank-deficient matrix has no polar isometry".into()));
    }
    let inv_sqrt = eig.reconstruct_with(|l| C64::new(1.0 / l.sqrt(), 0.0));
    Ok(g.matmul(&inv_sqrt))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pseudo_random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        // small LCG, good enough for shape coverage
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let g = ComplexMatrix::from_fn(n, n, |_, _| c(next(), next()));
        g.hermitian_part()
    }

    #[test]
    fn identity_eigenvalues() {
        let e = hermitian_eig(&ComplexMatrix::identity(2), 1e-12).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_eigenvalues() {
        let m = ComplexMatrix::from_real_diagonal(&[0.8, 0.2]);
        let e = hermitian_eig(&m, 1e-12).unwrap();
        assert!((e.eigenvalues[0] - 0.2).abs() < 1e-15);
        assert!((e.eigenvalues[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn pauli_x_and_y() {
        let x = ComplexMatrix::new(2, 2, vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]).unwrap();
        let e = hermitian_eig(&x, 1e-12).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!(e.reconstruct().max_abs_diff(&x) < 1e-14);

        let y = ComplexMatrix::new(2, 2, vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]).unwrap();
        let e = hermitian_eig(&y, 1e-12).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!(e.reconstruct().max_abs_diff(&y) < 1e-14);
    }

    #[test]
    fn not_hermitian_is_rejected() {
        let m = ComplexMatrix::new(2, 2, vec![c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]).unwrap();
        assert!(matches!(hermitian_eig(&m, 1e-10), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn non_finite_is_rejected() {
        assert!(matches!(ComplexMatrix::new(1, 1, vec![c(f64::NAN, 0.)]), Err(Error::NonFinite(0, 0))));
    }

    #[test]
    fn random_reconstruction_and_unitarity() {
        for (n, seed) in [(3, 1), (8, 2), (16, 3), (64, 4)] {
            let m = pseudo_random_hermitian(n, seed);
            let e = hermitian_eig(&m, 1e-12).unwrap();
            let scale = m.max_abs().max(1.0);
            assert!(e.reconstruct().max_abs_diff(&m) <= 1e-10 * scale);
            let vtv = e.eigenvectors.adjoint_matmul(&e.eigenvectors);
            assert!(vtv.max_abs_diff(&ComplexMatrix::identity(n)) <= 1e-10);
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let only = hermitian_eigenvalues(&m, 1e-12).unwrap();
            for (a, b) in only.iter().zip(&e.eigenvalues) {
                assert!((a - b).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn degenerate_spectrum() {
        // rank-one projector plus identity block
        let v = vec![c(0.5, 0.5), c(0.5, -0.5), c(0., 0.)];
        let m = ComplexMatrix::outer(&v, &v);
        let e = hermitian_eig(&m, 1e-12).unwrap();
        assert!(e.eigenvalues[0].abs() < 1e-15 && e.eigenvalues[1].abs() < 1e-15);
        assert!((e.eigenvalues[2] - 1.0).abs() < 1e-14);
        assert!(e.reconstruct().max_abs_diff(&m) < 1e-14);
    }

    #[test]
    fn matrix_functions_on_support() {
        let d = ComplexMatrix::from_real_diagonal(&[4.0, 0.0]);
        let s = matrix_function_on_support(&d, f64::sqrt, 1e-12).unwrap();
        assert!(s.max_abs_diff(&ComplexMatrix::from_real_diagonal(&[2.0, 0.0])) < 1e-15);

        let inv = matrix_function_on_support(&d, |x| x.powf(-0.5), 1e-12).unwrap();
        assert!(inv.max_abs_diff(&ComplexMatrix::from_real_diagonal(&[0.5, 0.0])) < 1e-15);

        let half = ComplexMatrix::identity(2).scale(0.5);
        let l = matrix_function_on_support(&half, f64::ln, 1e-12).unwrap();
        let expect = -std::f64::consts::LN_2;
        assert!((l[(0, 0)].re - expect).abs() < 1e-15 && (l[(1, 1)].re - expect).abs() < 1e-15);
        assert!((expect + std::f64::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn domain_error_on_retained_eigenvalue() {
        let d = ComplexMatrix::from_real_diagonal(&[0.5, 0.5]);
        let r = matrix_function_on_support(&d, |_| f64::NAN, 1e-12);
        assert!(matches!(r, Err(Error::DomainError(_))));
    }

    #[test]
    fn identity_function_reproduces_input() {
        let m = pseudo_random_hermitian(6, 9);
        let shifted = &m + &ComplexMatrix::identity(6).scale(5.0);
        let back = matrix_function_on_support(&shifted, |x| x, 0.0).unwrap();
        assert!(back.max_abs_diff(&shifted) < 1e-10);
    }

    #[test]
    fn trace_norm_cases() {
        assert_eq!(trace_norm(&ComplexMatrix::zeros(3, 3)).unwrap(), 0.0);
        let p0 = ComplexMatrix::from_real_diagonal(&[1.0, 0.0]);
        let p1 = ComplexMatrix::from_real_diagonal(&[0.0, 1.0]);
        assert!((trace_norm(&(&p0 - &p1)).unwrap() - 2.0).abs() < 1e-15);
        let d = ComplexMatrix::from_real_diagonal(&[0.3, -0.1]);
        assert!((trace_norm(&d).unwrap() - 0.4).abs() < 1e-15);
        // non-Hermitian: |0><1| has a single unit singular value
        let mut n = ComplexMatrix::zeros(2, 2);
        n[(0, 1)] = c(1.0, 0.0);
        assert!((trace_norm(&n).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polar_isometry_is_isometric() {
        let g = ComplexMatrix::from_fn(4, 2, |r, cc| c((r + 2 * cc) as f64 * 0.3 - 0.5, (r * cc) as f64 * 0.1 + 0.2));
        let u = polar_isometry(&g).unwrap();
        assert!(u.adjoint_matmul(&u).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);
    }
}
