//! Compass (coordinate pattern) search, the workhorse behind every
//! continuous optimizer in this crate.

use num_complex::Complex64 as C64;

use crate::linalg::ComplexMatrix;

/// Number of real parameters of [`givens_unitary`] in dimension `d`.
pub(crate) fn givens_param_count(d: usize) -> usize {
    d * d.saturating_sub(1)
}

/// Product of complex Givens rotations, one (θ, φ) pair per index pair p < q.
/// Together with diagonal phases these reach every unitary, so the columns
/// range over all orthonormal bases up to phases.
pub(crate) fn givens_unitary(d: usize, params: &[f64]) -> ComplexMatrix {
    debug_assert_eq!(params.len(), givens_param_count(d));
    let mut u = ComplexMatrix::identity(d);
    let mut k = 0;
    for p in 0..d {
        for q in p + 1..d {
            let (theta, phi) = (params[k], params[k + 1]);
            k += 2;
            let (c, s) = (theta.cos(), theta.sin());
            let e = C64::from_polar(1.0, phi);
            // u <- u G, G acting on columns p, q
            for r in 0..d {
                let up = u[(r, p)];
                let uq = u[(r, q)];
                u[(r, p)] = up * c + uq * e * s;
                u[(r, q)] = -up * e.conj() * s + uq * c;
            }
        }
    }
    u
}

/// Result of a minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct CompassResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub sweeps: usize,
    pub evaluations: usize,
}

/// Minimizes `f` from `x0`. Each sweep tries ±step along every coordinate,
/// keeping any improvement; a sweep without improvement halves the step.
/// Stops when the step drops below `tol`, after `max_sweeps` sweeps, or once
/// the value reaches `stop_below`. Non-finite values count as +∞.
pub fn compass_search(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    step_init: f64,
    tol: f64,
    max_sweeps: usize,
    stop_below: f64,
) -> CompassResult {
    let clean = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    let mut x = x0.to_vec();
    let mut fx = clean(f(&x));
    let mut evaluations = 1;
    let mut step = step_init;
    let mut sweeps = 0;
    while sweeps < max_sweeps && step >= tol && fx > stop_below {
        sweeps += 1;
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let old = x[i];
                x[i] = old + dir * step;
                let v = clean(f(&x));
                evaluations += 1;
                if v < fx {
                    fx = v;
                    improved = true;
                    break;
                }
                x[i] = old;
            }
            if fx <= stop_below {
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    CompassResult { x, value: fx, sweeps, evaluations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn givens_is_unitary() {
        let params: Vec<f64> = (0..givens_param_count(4)).map(|i| 0.3 * i as f64 - 1.0).collect();
        let u = givens_unitary(4, &params);
        assert!(u.adjoint_matmul(&u).max_abs_diff(&ComplexMatrix::identity(4)) < 1e-13);
        assert_eq!(givens_unitary(3, &[0.0; 6]), ComplexMatrix::identity(3));
    }

    #[test]
    fn finds_quadratic_minimum() {
        let r = compass_search(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            0.5,
            1e-10,
            10_000,
            f64::NEG_INFINITY,
        );
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn respects_stop_value_and_nan() {
        let r =
            compass_search(|x| if x[0] > 0.7 { f64::NAN } else { -x[0] }, &[0.0], 0.25, 1e-12, 1000, f64::NEG_INFINITY);
        assert!(r.x[0] <= 0.7 && r.x[0] > 0.69);
        let r = compass_search(|x| x[0].abs(), &[5.0], 1.0, 1e-12, 1000, 2.5);
        assert!(r.value <= 2.5);
        assert!(r.x[0] > 1.0);
    }
}
