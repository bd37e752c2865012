//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerics.

#![allow(dead_code)]

use num_complex::Complex64 as C64;

fn xlogx(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.ln()
    }
}

/// Mutual information of a 2×2 joint distribution, in nats.
fn classical_mi(p: [[f64; 2]; 2]) -> f64 {
    let pa = [p[0][0] + p[0][1], p[1][0] + p[1][1]];
    let pb = [p[0][0] + p[1][0], p[0][1] + p[1][1]];
    let h = |v: &[f64]| -> f64 { -v.iter().map(|&x| xlogx(x)).sum::<f64>() };
    h(&pa) + h(&pb) - h(&[p[0][0], p[0][1], p[1][0], p[1][1]])
}

/// Orthonormal qubit basis with Bloch angles (θ, φ).
fn qubit_basis(theta: f64, phi: f64) -> [[C64; 2]; 2] {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let e = C64::from_polar(1.0, phi);
    [[C64::new(c, 0.0), e * s], [-e.conj() * s, C64::new(c, 0.0)]]
}

/// Φ⁺ discord by brute force: 2 ln 2 minus the best classical mutual
/// information over product projective bases, θ on a 1° grid and φ on a 45°
/// grid for each party.
pub fn bell_discord_grid() -> f64 {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut best: f64 = 0.0;
    let deg = std::f64::consts::PI / 180.0;
    let bases: Vec<[[C64; 2]; 2]> =
        (0..=180).flat_map(|t| (0..8).map(move |f| qubit_basis(t as f64 * deg, f as f64 * 45.0 * deg))).collect();
    for a in &bases {
        for b in &bases {
            let mut p = [[0.0; 2]; 2];
            for (i, va) in a.iter().enumerate() {
                for (j, vb) in b.iter().enumerate() {
                    // ⟨a_i b_j|Φ⁺⟩
                    let amp = (va[0].conj() * vb[0].conj() + va[1].conj() * vb[1].conj()) * r;
                    p[i][j] = amp.norm_sqr();
                }
            }
            best = best.max(classical_mi(p));
        }
    }
    2.0 * std::f64::consts::LN_2 - best
}

/// 8×8 real matrix of the qubit permutation sending (x₀, x₁, x₂) to the
/// positions given by `perm`.
fn permutation_matrix(perm: [usize; 3]) -> [[f64; 8]; 8] {
    let mut m = [[0.0; 8]; 8];
    #[allow(clippy::needless_range_loop)]
    for x in 0..8 {
        let bits = [(x >> 2) & 1, (x >> 1) & 1, x & 1];
        let mut out = [0; 3];
        for k in 0..3 {
            out[perm[k]] = bits[k];
        }
        let y = out[0] << 2 | out[1] << 1 | out[2];
        m[y][x] = 1.0;
    }
    m
}

fn is_psd(m: &[[f64; 8]; 8]) -> bool {
    // Cholesky with a tiny shift
    let mut l = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] + 1e-12 - s;
                if d <= 0.0 {
                    return false;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    true
}

/// Whether the Werner state pΨ⁻ + (1−p)I/4 has a B-symmetric extension
/// ω_ABB′, searched over the U⊗U⊗U-invariant ansatz
/// ω = a·I + b(S_AB + S_AB′) + c·S_BB′ + d(C + C²) on a (b, c) grid, with
/// a, d fixed by the marginal constraint.
pub fn werner_two_extendible_grid(p: f64) -> bool {
    let id = permutation_matrix([0, 1, 2]);
    let s_ab = permutation_matrix([1, 0, 2]);
    let s_ab2 = permutation_matrix([2, 1, 0]);
    let s_bb = permutation_matrix([0, 2, 1]);
    let c1 = permutation_matrix([1, 2, 0]);
    let c2 = permutation_matrix([2, 0, 1]);
    let steps = 400;
    for i in 0..=steps {
        let b = -0.5 + i as f64 / steps as f64;
        for j in 0..=steps {
            let c = -0.5 + j as f64 / steps as f64;
            let a = ((1.0 + p) / 4.0 - b - c) / 2.0;
            let d = -p / 4.0 - b;
            let mut m = [[0.0; 8]; 8];
            for r in 0..8 {
                for k in 0..8 {
                    m[r][k] =
                        a * id[r][k] + b * (s_ab[r][k] + s_ab2[r][k]) + c * s_bb[r][k] + d * (c1[r][k] + c2[r][k]);
                }
            }
            if is_psd(&m) {
                return true;
            }
        }
    }
    false
}

/// I(A;B|C) of a three-bit distribution indexed 4a + 2b + c.
pub fn classical_cmi(p: &[f64; 8]) -> f64 {
    let idx = |a: usize, b: usize, c: usize| a << 2 | b << 1 | c;
    let mut h_abc = 0.0;
    let mut pac = [[0.0; 2]; 2];
    let mut pbc = [[0.0; 2]; 2];
    let mut pc = [0.0; 2];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                let x = p[idx(a, b, c)];
                h_abc -= xlogx(x);
                pac[a][c] += x;
                pbc[b][c] += x;
                pc[c] += x;
            }
        }
    }
    let h2 = |m: [[f64; 2]; 2]| -> f64 { -m.iter().flatten().map(|&x| xlogx(x)).sum::<f64>() };
    let hc = -pc.iter().map(|&x| xlogx(x)).sum::<f64>();
    h2(pac) + h2(pbc) - hc - h_abc
}
