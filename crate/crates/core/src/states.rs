//! Named states, classical/separable/flag constructions, seeded random
//! generators and the `builtin:` / `random:` / `file:` state URIs.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64 as C64;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::channels::Channel;
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, PureState, SystemLayout};
use crate::linalg::{self, ComplexMatrix};

/// Seeded ChaCha20 stream.
pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Independent child seed for `stream` (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in [0, 1) with 53 random bits.
pub fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Two independent standard normals (Box-Muller).
pub fn gaussian_pair(rng: &mut impl RngCore) -> (f64, f64) {
    let u1 = 1.0 - uniform(rng); // (0, 1]
    let u2 = uniform(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    (r * (2.0 * PI * u2).cos(), r * (2.0 * PI * u2).sin())
}

/// Complex normal with E|z|² = 1.
pub fn complex_normal(rng: &mut impl RngCore) -> C64 {
    let (a, b) = gaussian_pair(rng);
    C64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre(rows: usize, cols: usize, rng: &mut impl RngCore) -> ComplexMatrix {
    let data = (0..rows * cols).map(|_| complex_normal(rng)).collect();
    ComplexMatrix::from_vec_unchecked(rows, cols, data)
}

/// Haar-random unitary (Gram-Schmidt of a Ginibre matrix).
pub fn haar_unitary(d: usize, rng: &mut impl RngCore) -> ComplexMatrix {
    linalg::orthonormalize_columns(&ginibre(d, d, rng))
}

pub fn random_pure(layout: &SystemLayout, rng: &mut impl RngCore) -> PureState {
    let v: Vec<C64> = (0..layout.total_dim()).map(|_| complex_normal(rng)).collect();
    PureState::normalized(layout.clone(), v).expect("gaussian vector is nonzero")
}

/// Random channel with `n_kraus` Kraus operators: blocks of the polar factor
/// of a stacked Ginibre matrix.
pub fn random_channel(
    in_layout: &SystemLayout,
    out_layout: &SystemLayout,
    n_kraus: usize,
    rng: &mut impl RngCore,
) -> Result<Channel> {
    let (din, dout) = (in_layout.total_dim(), out_layout.total_dim());
    if n_kraus * dout < din {
        return Err(Error::InvalidChannel(format!("{n_kraus} Kraus operators cannot be trace preserving here")));
    }
    let v = linalg::polar_isometry(&ginibre(n_kraus * dout, din, rng))?;
    let kraus = (0..n_kraus).map(|k| ComplexMatrix::from_fn(dout, din, |r, c| v[(k * dout + r, c)])).collect();
    Channel::new(in_layout.clone(), out_layout.clone(), kraus)
}

/// Random-state ensembles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ensemble {
    HaarPure,
    /// Marginal of a Haar pure state on the layout ⊗ an environment of this dimension.
    TracedPure(usize),
}

pub fn random_state(ensemble: Ensemble, layout: &SystemLayout, seed: u64) -> Result<DensityMatrix> {
    let mut r = rng(seed);
    random_state_from(ensemble, layout, &mut r)
}

pub fn random_state_from(ensemble: Ensemble, layout: &SystemLayout, rng: &mut impl RngCore) -> Result<DensityMatrix> {
    match ensemble {
        Ensemble::HaarPure => Ok(random_pure(layout, rng).density()),
        Ensemble::TracedPure(env) => {
            let d = layout.total_dim();
            let g = ginibre(d, env.max(1), rng);
            let m = g.matmul_adjoint(&g);
            let tr = m.trace().re;
            Ok(DensityMatrix::from_parts_unchecked(layout.clone(), m.scale(1.0 / tr)))
        }
    }
}

/// Random mixed state on a layout (traced ensemble with a full-rank environment).
pub fn random_mixed(layout: &SystemLayout, rng: &mut impl RngCore) -> DensityMatrix {
    random_state_from(Ensemble::TracedPure(layout.total_dim()), layout, rng).expect("traced ensemble")
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidState(format!("probability {x} is not a nonnegative number")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized(sum));
    }
    Ok(())
}

/// Diagonal state with joint distribution `dist` indexed by computational basis index.
pub fn classical_state(dist: &[f64], layout: &SystemLayout) -> Result<DensityMatrix> {
    if dist.len() != layout.total_dim() {
        return Err(Error::DimensionMismatch(format!(
            "distribution has {} entries, layout {layout} needs {}",
            dist.len(),
            layout.total_dim()
        )));
    }
    check_distribution(dist)?;
    Ok(DensityMatrix::from_parts_unchecked(layout.clone(), ComplexMatrix::from_real_diagonal(dist)))
}

fn check_terms(weights: &[f64], factors: &[Vec<DensityMatrix>]) -> Result<()> {
    if weights.len() != factors.len() {
        return Err(Error::ArityMismatch { expected: weights.len(), got: factors.len() });
    }
    check_distribution(weights)?;
    let first = factors.first().ok_or_else(|| Error::InvalidState("no terms".into()))?;
    for term in factors {
        if term.len() != first.len() {
            return Err(Error::ArityMismatch { expected: first.len(), got: term.len() });
        }
        for (a, b) in term.iter().zip(first) {
            if a.layout() != b.layout() {
                return Err(Error::LayoutMismatch(format!("{} vs {}", a.layout(), b.layout())));
            }
        }
    }
    Ok(())
}

fn tensor_all(states: &[DensityMatrix]) -> Result<DensityMatrix> {
    let mut it = states.iter();
    let mut acc = it.next().ok_or_else(|| Error::InvalidState("empty product".into()))?.clone();
    for s in it {
        acc = acc.tensor(s)?;
    }
    Ok(acc)
}

/// Σ_z p(z) σ¹_z ⊗ ⋯ ⊗ σ^l_z; `factors[z]` lists the per-party states of term z.
pub fn separable_state(weights: &[f64], factors: &[Vec<DensityMatrix>]) -> Result<DensityMatrix> {
    check_terms(weights, factors)?;
    let terms: Vec<DensityMatrix> = factors.iter().map(|t| tensor_all(t)).collect::<Result<_>>()?;
    DensityMatrix::mixture(weights, &terms)
}

/// Label of the flag register attached to a party whose first label is `label`.
pub fn prime_label(label: &str) -> String {
    format!("{label}'")
}

/// Σ_x p(x) ⊗_i (σ^i_x ⊗ |x⟩⟨x|_{A_i′}); each party is followed by its flag.
pub fn flag_extension(weights: &[f64], factors: &[Vec<DensityMatrix>]) -> Result<DensityMatrix> {
    check_terms(weights, factors)?;
    let n = weights.len();
    let mut terms = Vec::with_capacity(n);
    for (x, term) in factors.iter().enumerate() {
        let mut parts = Vec::with_capacity(2 * term.len());
        for sigma in term {
            parts.push(sigma.clone());
            let first = sigma.layout().labels()[0].to_string();
            let flag = SystemLayout::new([(prime_label(&first), n)])?;
            parts.push(DensityMatrix::basis_state(flag, x)?);
        }
        terms.push(tensor_all(&parts)?);
    }
    DensityMatrix::mixture(weights, &terms)
}

/// Pairs (party labels, flag label) matching [`flag_extension`].
pub fn flag_pairs(factors: &[Vec<DensityMatrix>]) -> Vec<crate::measures::PartyPair> {
    factors[0]
        .iter()
        .map(|s| {
            let labels: Vec<String> = s.layout().labels().iter().map(|l| l.to_string()).collect();
            crate::measures::PartyPair { extension: vec![prime_label(&labels[0])], system: labels }
        })
        .collect()
}

fn param(params: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.parse::<f64>().map_err(|_| Error::Parse(format!("parameter {key}={v} is not a number"))),
    }
}

fn count_param(params: &BTreeMap<String, String>, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.parse::<usize>().map_err(|_| Error::Parse(format!("parameter {key}={v} is not a count"))),
    }
}

fn party_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("A{i}")).collect()
}

fn amplitude_state(layout: SystemLayout, entries: &[(usize, C64)]) -> Result<DensityMatrix> {
    let mut amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
    for &(i, a) in entries {
        amps[i] = a;
    }
    Ok(PureState::normalized(layout, amps)?.density())
}

fn probability(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::DomainError(format!("mixing parameter {p} outside [0, 1]")));
    }
    Ok(p)
}

/// Textbook states. Multi-party families (`ghz`, `w`, `mixed`) use labels
/// A1..An; two-party ones use A and B.
pub fn named_state(name: &str, params: &BTreeMap<String, String>) -> Result<DensityMatrix> {
    let one = C64::new(1.0, 0.0);
    let ab = || SystemLayout::qubits(&["A", "B"]);
    match name {
        "ghz" => {
            let n = count_param(params, "n", 3)?.max(1);
            let layout = SystemLayout::qubits(&party_labels(n))?;
            let last = layout.total_dim() - 1;
            amplitude_state(layout, &[(0, one), (last, one)])
        }
        "w" => {
            let n = count_param(params, "n", 3)?.max(1);
            let layout = SystemLayout::qubits(&party_labels(n))?;
            let entries: Vec<(usize, C64)> = (0..n).map(|i| (1usize << i, one)).collect();
            amplitude_state(layout, &entries)
        }
        "bell" | "phi+" => amplitude_state(ab()?, &[(0, one), (3, one)]),
        "psi-" => amplitude_state(ab()?, &[(1, one), (2, -one)]),
        "werner" => {
            // p Ψ⁻ + (1 − p) I/4
            let p = probability(param(params, "p", 0.5)?)?;
            let singlet = named_state("psi-", params)?;
            let m = &singlet.matrix().scale(p) + &ComplexMatrix::identity(4).scale((1.0 - p) / 4.0);
            DensityMatrix::new(ab()?, m)
        }
        "isotropic" => {
            // p Φ⁺_d + (1 − p) I/d²
            let p = probability(param(params, "p", 0.5)?)?;
            let d = count_param(params, "d", 2)?.max(2);
            let layout = SystemLayout::new([("A", d), ("B", d)])?;
            let entries: Vec<(usize, C64)> = (0..d).map(|i| (i * d + i, one)).collect();
            let phi = amplitude_state(layout.clone(), &entries)?;
            let m = &phi.matrix().scale(p) + &ComplexMatrix::identity(d * d).scale((1.0 - p) / (d * d) as f64);
            DensityMatrix::new(layout, m)
        }
        "classical" => classical_state(&[0.5, 0.0, 0.0, 0.5], &ab()?),
        "separable" => {
            // ½ |00⟩⟨00| + ½ |++⟩⟨++|: separable but not classical
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let a = SystemLayout::qubits(&["A"])?;
            let b = SystemLayout::qubits(&["B"])?;
            let zero_a = DensityMatrix::basis_state(a.clone(), 0)?;
            let zero_b = DensityMatrix::basis_state(b.clone(), 0)?;
            let plus_a = amplitude_state(a, &[(0, one * s), (1, one * s)])?;
            let plus_b = amplitude_state(b, &[(0, one * s), (1, one * s)])?;
            separable_state(&[0.5, 0.5], &[vec![zero_a, zero_b], vec![plus_a, plus_b]])
        }
        "product" => {
            let a = DensityMatrix::basis_state(SystemLayout::qubits(&["A"])?, 0)?;
            let b = amplitude_state(SystemLayout::qubits(&["B"])?, &[(0, one), (1, one)])?;
            a.tensor(&b)
        }
        "mixed" => {
            let n = count_param(params, "n", 2)?.max(1);
            Ok(DensityMatrix::maximally_mixed(SystemLayout::qubits(&party_labels(n))?))
        }
        other => Err(Error::UnknownName(other.to_string())),
    }
}

/// Where a state comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StateSpec {
    Builtin { name: String, params: BTreeMap<String, String> },
    File(PathBuf),
    Random { ensemble: Ensemble, dims: Vec<usize>, seed: u64 },
}

/// Splits `name?k=v&k2=v2`.
pub fn parse_query(text: &str) -> Result<(String, BTreeMap<String, String>)> {
    let (name, query) = text.split_once('?').unwrap_or((text, ""));
    let mut params = BTreeMap::new();
    for kv in query.split('&').filter(|s| !s.is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse(format!("malformed parameter `{kv}`")))?;
        params.insert(k.to_string(), v.to_string());
    }
    Ok((name.to_string(), params))
}

pub fn parse_dims(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|d| d.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad dimension `{d}`"))))
        .collect()
}

impl StateSpec {
    pub fn parse(text: &str) -> Result<Self> {
        if let Some(rest) = text.strip_prefix("builtin:") {
            let (name, params) = parse_query(rest)?;
            return Ok(Self::Builtin { name, params });
        }
        if let Some(rest) = text.strip_prefix("random:") {
            let (name, params) = parse_query(rest)?;
            let dims = parse_dims(params.get("dims").map(String::as_str).unwrap_or("2,2"))?;
            let seed = match params.get("seed") {
                Some(s) => s.parse().map_err(|_| Error::Parse(format!("bad seed `{s}`")))?,
                None => 0,
            };
            let ensemble = match name.as_str() {
                "haar" => Ensemble::HaarPure,
                "traced" => {
                    let total: usize = dims.iter().product();
                    Ensemble::TracedPure(count_param(&params, "env", total)?)
                }
                other => return Err(Error::UnknownName(other.to_string())),
            };
            return Ok(Self::Random { ensemble, dims, seed });
        }
        let path = text.strip_prefix("file:").unwrap_or(text);
        if path.is_empty() {
            return Err(Error::Parse("empty state specification".into()));
        }
        Ok(Self::File(PathBuf::from(path)))
    }

    pub fn load(&self) -> Result<DensityMatrix> {
        match self {
            Self::Builtin { name, params } => named_state(name, params),
            Self::File(path) => {
                let text = std::fs::read_to_string(path)?;
                // keep the validation error instead of burying it in a JSON error
                let raw: crate::hilbert::StateJson = serde_json::from_str(&text)?;
                DensityMatrix::try_from(raw)
            }
            Self::Random { ensemble, dims, seed } => {
                let labels = party_labels(dims.len());
                let layout = SystemLayout::new(labels.into_iter().zip(dims.iter().copied()))?;
                random_state(*ensemble, &layout, *seed)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{self, ToleranceProfile};

    fn no_params() -> BTreeMap<String, String> {
        BTreeMap::new()
    }

    fn with(k: &str, v: &str) -> BTreeMap<String, String> {
        [(k.to_string(), v.to_string())].into_iter().collect()
    }

    #[test]
    fn classical_examples() {
        let l = SystemLayout::qubits(&["A", "B"]).unwrap();
        let s = classical_state(&[0.5, 0.0, 0.0, 0.5], &l).unwrap();
        assert_eq!(s.matrix()[(3, 3)].re, 0.5);
        let point = classical_state(&[0.0, 1.0, 0.0, 0.0], &l).unwrap();
        assert_eq!(point.rank().unwrap(), 1);
        let uni = classical_state(&[0.25; 4], &l).unwrap();
        assert_eq!(uni, DensityMatrix::maximally_mixed(l.clone()));
        assert!(matches!(classical_state(&[0.5, 0.4, 0.0, 0.0], &l), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn named_examples() {
        let tol = ToleranceProfile::default();
        let bell = named_state("bell", &no_params()).unwrap();
        let a = bell.partial_trace(&["A"]).unwrap();
        assert!(a.matrix().max_abs_diff(&ComplexMatrix::identity(2).scale(0.5)) < 1e-15);
        let w0 = named_state("werner", &with("p", "0")).unwrap();
        assert!(w0.matrix().max_abs_diff(&ComplexMatrix::identity(4).scale(0.25)) < 1e-15);
        let ghz = named_state("ghz", &with("n", "3")).unwrap();
        assert!(measures::von_neumann_entropy(&ghz, &tol).unwrap() < 1e-12);
        assert_eq!(ghz.layout().labels(), vec!["A1", "A2", "A3"]);
        let w = named_state("w", &no_params()).unwrap();
        assert!((w.matrix()[(1, 1)].re - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(named_state("nope", &no_params()), Err(Error::UnknownName(_))));
        assert!(named_state("werner", &with("p", "1.5")).is_err());
        for name in ["psi-", "isotropic", "classical", "separable", "product", "mixed"] {
            named_state(name, &no_params()).unwrap();
        }
    }

    #[test]
    fn random_states_are_valid_and_deterministic() {
        let l = SystemLayout::qubits(&["A", "B"]).unwrap();
        let p = random_state(Ensemble::HaarPure, &l, 7).unwrap();
        assert_eq!(p.rank().unwrap(), 1);
        let m = random_state(Ensemble::TracedPure(4), &l, 7).unwrap();
        assert_eq!(m.rank().unwrap(), 4);
        DensityMatrix::new(l.clone(), m.matrix().clone()).unwrap();
        let again = random_state(Ensemble::TracedPure(4), &l, 7).unwrap();
        assert_eq!(m, again);
        assert_ne!(m, random_state(Ensemble::TracedPure(4), &l, 8).unwrap());
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut r = rng(3);
        let u = haar_unitary(6, &mut r);
        assert!(u.adjoint_matmul(&u).max_abs_diff(&ComplexMatrix::identity(6)) < 1e-12);
        let ch =
            random_channel(&SystemLayout::qubits(&["A"]).unwrap(), &SystemLayout::qubits(&["A"]).unwrap(), 3, &mut r)
                .unwrap();
        assert!(ch.trace_preservation_error() < 1e-12);
    }

    #[test]
    fn flag_extension_traces_to_separable() {
        let mut r = rng(11);
        let factors: Vec<Vec<DensityMatrix>> = (0..3)
            .map(|_| {
                vec![
                    random_mixed(&SystemLayout::qubits(&["A1"]).unwrap(), &mut r),
                    random_mixed(&SystemLayout::qubits(&["A2"]).unwrap(), &mut r),
                ]
            })
            .collect();
        let w = [0.2, 0.5, 0.3];
        let sep = separable_state(&w, &factors).unwrap();
        let ext = flag_extension(&w, &factors).unwrap();
        assert_eq!(ext.layout().labels(), vec!["A1", "A1'", "A2", "A2'"]);
        let back = ext.partial_trace(&["A1", "A2"]).unwrap();
        assert!(back.matrix().max_abs_diff(sep.matrix()) < 1e-12);
        let pairs = flag_pairs(&factors);
        let g = measures::gap(&ext, &pairs, &ToleranceProfile::default()).unwrap();
        assert!(g.abs() < 1e-9);
    }

    #[test]
    fn spec_parsing() {
        let s = StateSpec::parse("builtin:werner?p=0.9").unwrap();
        assert_eq!(s, StateSpec::Builtin { name: "werner".into(), params: with("p", "0.9") });
        let r = StateSpec::parse("random:traced?dims=2,2&env=4&seed=42").unwrap();
        assert_eq!(r, StateSpec::Random { ensemble: Ensemble::TracedPure(4), dims: vec![2, 2], seed: 42 });
        assert_eq!(r.load().unwrap().layout().labels(), vec!["A1", "A2"]);
        assert_eq!(StateSpec::parse("file:x.json").unwrap(), StateSpec::File("x.json".into()));
        assert!(StateSpec::parse("random:bogus").is_err());
        assert_eq!(StateSpec::parse("builtin:ghz?n=3").unwrap().load().unwrap().dim(), 8);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(5, 9), derive_seed(5, 9));
    }
}
