//! Campaign ensembles, written `name?key=value&...`:
//!
//! - `haar?dims=2,2,2,2`: Haar pure states.
//! - `traced?dims=..&env=4`: marginals of Haar pure states with an environment.
//! - `classical?dims=..`: diagonal states with a flat-Dirichlet distribution.
//! - `separable?dims=..&terms=3`: mixtures of products of random mixed states.
//! - `flag?dims=..&terms=3`: flag extensions of such mixtures; `dims` lists the parties only.
//! - `eb-fixed?dims=..&eps=0,0.01`: (1−ε)(ℰ¹⊗⋯)(σ) + ετ where ℰ^i dephases in a
//!   random basis (so ℰ^i∘ℰ^i = ℰ^i); trial t uses the (t mod n)-th ε.
//!
//! `layout=pairs` reads `dims` as (A1, A1′, A2, A2′, ...); `layout=plain` as
//! A1..An with empty extensions. The default is `pairs` for an even number of
//! at least four dimensions and `plain` otherwise.

use std::collections::BTreeMap;
use std::fmt;

use super::checks::EbSpec;
use crate::channels::{self, Povm};
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, SystemLayout};
use crate::measures::PartyPair;
use crate::states::{
    classical_state, derive_seed, flag_extension, flag_pairs, haar_unitary, parse_dims, parse_query, prime_label,
    random_mixed, random_state_from, rng, separable_state, uniform, Ensemble,
};

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Haar,
    Traced { env: usize },
    Classical,
    Separable { terms: usize },
    Flag { terms: usize },
    EbFixed { eps: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    text: String,
    kind: Kind,
    dims: Vec<usize>,
    paired: bool,
}

/// One generated trial.
#[derive(Clone, Debug)]
pub struct Instance {
    pub state: DensityMatrix,
    pub pairs: Vec<PartyPair>,
    /// The measure-and-prepare channels the state was built from (`eb-fixed` only).
    pub eb: Option<Vec<EbSpec>>,
    /// Seed for any extra randomness a check needs (random channels, partner states).
    pub aux_seed: u64,
}

impl Instance {
    pub fn parts(&self) -> Vec<Vec<String>> {
        self.pairs.iter().map(PartyPair::labels).collect()
    }
}

fn get_count(params: &BTreeMap<String, String>, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| Error::Parse(format!("{key}={v} is not a count"))),
    }
}

fn dirichlet(n: usize, g: &mut impl rand_core::RngCore) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -(1.0 - uniform(g)).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    // exact normalization for the 1e-12 distribution check
    let rest: f64 = w[..n - 1].iter().sum();
    w[n - 1] = (1.0 - rest).max(0.0);
    w
}

impl EnsembleSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let (name, params) = parse_query(text)?;
        let dims = parse_dims(params.get("dims").map(String::as_str).unwrap_or("2,2"))?;
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Parse(format!("ensemble `{text}` needs positive dimensions")));
        }
        let kind = match name.as_str() {
            "haar" => Kind::Haar,
            "traced" => Kind::Traced { env: get_count(&params, "env", dims.iter().product())?.max(1) },
            "classical" => Kind::Classical,
            "separable" => Kind::Separable { terms: get_count(&params, "terms", 3)?.max(1) },
            "flag" => Kind::Flag { terms: get_count(&params, "terms", 3)?.max(1) },
            "eb-fixed" => {
                let eps = params
                    .get("eps")
                    .map(String::as_str)
                    .unwrap_or("0.01")
                    .split(',')
                    .map(|e| e.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad ε `{e}`"))))
                    .collect::<Result<Vec<f64>>>()?;
                if eps.iter().any(|e| !(0.0..=1.0).contains(e)) {
                    return Err(Error::DomainError(format!("ε values {eps:?} must lie in [0, 1]")));
                }
                Kind::EbFixed { eps }
            }
            other => return Err(Error::UnknownName(format!("ensemble {other}"))),
        };
        let default_paired = matches!(kind, Kind::Haar | Kind::Traced { .. } | Kind::Classical)
            && dims.len() >= 4
            && dims.len() % 2 == 0;
        let paired = match params.get("layout").map(String::as_str) {
            None => default_paired,
            Some("pairs") => {
                if !matches!(kind, Kind::Haar | Kind::Traced { .. } | Kind::Classical) || dims.len() % 2 != 0 {
                    return Err(Error::Parse(format!(
                        "`layout=pairs` needs an even dims list and haar/traced/classical: {text}"
                    )));
                }
                true
            }
            Some("plain") => false,
            Some(other) => return Err(Error::Parse(format!("unknown layout `{other}`"))),
        };
        Ok(Self { text: text.to_string(), kind, dims, paired })
    }

    fn layout_and_pairs(&self) -> Result<(SystemLayout, Vec<PartyPair>)> {
        let mut subs = Vec::new();
        let mut pairs = Vec::new();
        if self.paired {
            for (i, d) in self.dims.chunks(2).enumerate() {
                let a = format!("A{}", i + 1);
                let p = prime_label(&a);
                subs.push((a.clone(), d[0]));
                subs.push((p.clone(), d[1]));
                pairs.push(PartyPair::new(&[a], &[p]));
            }
        } else {
            for (i, &d) in self.dims.iter().enumerate() {
                let a = format!("A{}", i + 1);
                subs.push((a.clone(), d));
                pairs.push(PartyPair { system: vec![a], extension: vec![] });
            }
        }
        Ok((SystemLayout::new(subs)?, pairs))
    }

    fn random_factors(&self, terms: usize, g: &mut impl rand_core::RngCore) -> Result<Vec<Vec<DensityMatrix>>> {
        (0..terms)
            .map(|_| {
                self.dims
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| Ok(random_mixed(&SystemLayout::new([(format!("A{}", i + 1), d)])?, g)))
                    .collect()
            })
            .collect()
    }

    /// Instance for `trial`, drawn from the stream `trial_seed`.
    pub fn generate(&self, trial: u64, trial_seed: u64) -> Result<Instance> {
        let mut g = rng(trial_seed);
        let aux_seed = derive_seed(trial_seed, 0xa0);
        let (layout, pairs) = self.layout_and_pairs()?;
        let plain = |state: DensityMatrix, pairs| Instance { state, pairs, eb: None, aux_seed };
        match &self.kind {
            Kind::Haar => Ok(plain(random_state_from(Ensemble::HaarPure, &layout, &mut g)?, pairs)),
            Kind::Traced { env } => Ok(plain(random_state_from(Ensemble::TracedPure(*env), &layout, &mut g)?, pairs)),
            Kind::Classical => {
                let p = dirichlet(layout.total_dim(), &mut g);
                Ok(plain(classical_state(&p, &layout)?, pairs))
            }
            Kind::Separable { terms } => {
                let w = dirichlet(*terms, &mut g);
                let factors = self.random_factors(*terms, &mut g)?;
                Ok(plain(separable_state(&w, &factors)?, pairs))
            }
            Kind::Flag { terms } => {
                let w = dirichlet(*terms, &mut g);
                let factors = self.random_factors(*terms, &mut g)?;
                let pairs = flag_pairs(&factors);
                Ok(plain(flag_extension(&w, &factors)?, pairs))
            }
            Kind::EbFixed { eps } => {
                let eps = eps[(trial % eps.len() as u64) as usize];
                let mut eb = Vec::new();
                for (label, d) in layout.subsystems() {
                    let single = SystemLayout::new([(label.clone(), *d)])?;
                    let u = haar_unitary(*d, &mut g);
                    let povm = Povm::from_basis(label, &u)?;
                    let preps = povm
                        .effects()
                        .iter()
                        .map(|e| DensityMatrix::new(single.clone(), e.clone()))
                        .collect::<Result<Vec<_>>>()?;
                    eb.push(EbSpec { povm, preps });
                }
                let sigma = random_mixed(&layout, &mut g);
                let tau = random_mixed(&layout, &mut g);
                let mut fixed = sigma;
                for e in &eb {
                    fixed = channels::apply_channel(&e.channel()?, &fixed)?;
                }
                let fixed = fixed.reordered(&layout.labels())?;
                let state = DensityMatrix::from_parts_unchecked(
                    layout.clone(),
                    &fixed.matrix().scale(1.0 - eps) + &tau.matrix().scale(eps),
                );
                Ok(Instance { state, pairs, eb: Some(eb), aux_seed })
            }
        }
    }
}

impl fmt::Display for EnsembleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_layout_by_default() {
        let e = EnsembleSpec::parse("haar?dims=2,2,2,2").unwrap();
        let i = e.generate(0, 1).unwrap();
        assert_eq!(i.state.layout().labels(), vec!["A1", "A1'", "A2", "A2'"]);
        assert_eq!(i.pairs.len(), 2);
        let p = EnsembleSpec::parse("traced?dims=2,2,2&env=3").unwrap().generate(0, 1).unwrap();
        assert_eq!(p.pairs.len(), 3);
        assert!(p.pairs.iter().all(|q| q.extension.is_empty()));
    }

    #[test]
    fn generation_is_deterministic() {
        for text in ["classical?dims=2,3", "separable?dims=2,2&terms=2", "flag?dims=2,2", "eb-fixed?dims=2,2&eps=0.1"] {
            let e = EnsembleSpec::parse(text).unwrap();
            let a = e.generate(3, 99).unwrap();
            let b = e.generate(3, 99).unwrap();
            assert_eq!(a.state, b.state, "{text}");
        }
    }

    #[test]
    fn eb_fixed_at_zero_eps_is_a_fixed_point() {
        let e = EnsembleSpec::parse("eb-fixed?dims=2,3&eps=0").unwrap();
        let i = e.generate(0, 5).unwrap();
        let mut out = i.state.clone();
        for s in i.eb.as_ref().unwrap() {
            out = channels::apply_channel(&s.channel().unwrap(), &out).unwrap();
        }
        let out = out.reordered(&["A1", "A2"]).unwrap();
        assert!(out.matrix().max_abs_diff(i.state.matrix()) < 1e-12);
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(EnsembleSpec::parse("bures?dims=2").is_err());
        assert!(EnsembleSpec::parse("flag?dims=2,2&layout=pairs").is_err());
    }
}
