//! Seeded campaigns: trial t draws its instance from `derive_seed(seed, t)`
//! and reports are collected in trial order, so the outcome does not depend
//! on the worker count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::{self, EbSpec};
use super::ensemble::{EnsembleSpec, Instance};
use super::{CheckConfig, CheckId, ReplayRecord, Tier, VerificationReport};
use crate::channels::Povm;
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, SystemLayout};
use crate::optimize::{dykstra_k_extendibility, FeasibilityStatus};
use crate::states::{derive_seed, random_channel, random_mixed, rng, uniform};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub check_id: CheckId,
    pub tier: Tier,
    pub ensemble: String,
    pub seed: u64,
    pub trials: u64,
    /// Number of reports (several per trial for `remark2`).
    pub reports: usize,
    /// Failing reports that are not undecided; for `conjecture` these are the
    /// candidate counterexamples.
    pub violations: usize,
    pub undecided: usize,
    /// `None` when there are no reports.
    pub min_slack: Option<f64>,
    pub violation_reports: Vec<VerificationReport>,
}

impl CampaignSummary {
    /// Theorem-tier campaign with a violation.
    pub fn theorem_violated(&self) -> bool {
        self.tier == Tier::Theorem && self.violations > 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Campaign {
    pub summary: CampaignSummary,
    pub reports: Vec<VerificationReport>,
}

fn split_abc(state: &DensityMatrix) -> Result<(Vec<String>, Vec<String>, Vec<String>)> {
    let labels: Vec<String> = state.layout().labels().into_iter().map(String::from).collect();
    if labels.len() < 3 {
        return Err(Error::Shape(format!("a tripartite check needs at least 3 subsystems, got {}", labels.len())));
    }
    let n = labels.len();
    Ok((vec![labels[0].clone()], vec![labels[n - 1].clone()], labels[1..n - 1].to_vec()))
}

fn dephasers(state: &DensityMatrix, parts: &[Vec<String>]) -> Result<Vec<EbSpec>> {
    parts
        .iter()
        .map(|p| {
            let d = state.layout().dim_of_set(p)?;
            let layout = SystemLayout::new([("X", d)])?;
            let preps = (0..d).map(|k| DensityMatrix::basis_state(layout.clone(), k)).collect::<Result<Vec<_>>>()?;
            Ok(EbSpec { povm: Povm::computational("X", d), preps })
        })
        .collect()
}

fn run_check(check: CheckId, inst: &Instance, cfg: &CheckConfig) -> Result<Vec<VerificationReport>> {
    let rho = &inst.state;
    let pairs = &inst.pairs;
    let parts = inst.parts();
    let one = |r: Result<VerificationReport>| r.map(|r| vec![r]);
    match check {
        CheckId::Lemma1 => one(checks::check_lemma1(rho, pairs, cfg)),
        CheckId::EsqCemi => one(checks::check_esq_le_cemi(rho, pairs, cfg)),
        CheckId::DimensionBound => one(checks::check_dimension_bound(rho, pairs, cfg)),
        CheckId::RelativeEntropy => one(checks::check_relative_entropy_form(rho, &parts, cfg)),
        CheckId::Monotone => {
            let mut g = rng(inst.aux_seed);
            let local = parts
                .iter()
                .map(|p| {
                    let l = rho.layout().select(p)?;
                    random_channel(&l, &l, 2, &mut g)
                })
                .collect::<Result<Vec<_>>>()?;
            one(checks::check_monotonicity(rho, &parts, &local, cfg))
        }
        CheckId::Ssa => {
            let (a, b, c) = split_abc(rho)?;
            one(checks::check_ssa(rho, &a, &b, &c, cfg))
        }
        CheckId::Fannes => {
            let mut g = rng(inst.aux_seed);
            let s = uniform(&mut g);
            let tau = random_mixed(rho.layout(), &mut g);
            let sigma = DensityMatrix::from_parts_unchecked(
                rho.layout().clone(),
                &rho.matrix().scale(1.0 - s) + &tau.matrix().scale(s),
            );
            one(checks::check_fannes(rho, &sigma, cfg))
        }
        CheckId::Prop1Forward => {
            let eb = match &inst.eb {
                Some(eb) => eb.clone(),
                None => dephasers(rho, &parts)?,
            };
            one(checks::check_prop1_forward(rho, &parts, &eb, cfg))
        }
        CheckId::Prop1Converse => one(checks::check_prop1_converse(rho, &parts, cfg)),
        CheckId::Definetti => {
            let cert = dykstra_k_extendibility(rho, &parts[1..], cfg.k, &cfg.optimizer)?;
            if cert.status == FeasibilityStatus::Feasible {
                one(checks::check_definetti(rho, &cert, &parts, cfg))
            } else {
                let dims = parts.iter().map(|p| rho.layout().dim_of_set(p)).collect::<Result<Vec<_>>>()?;
                let f = checks::definetti_rhs(&dims, cfg.k)?;
                let r = VerificationReport::new(check, "", f, f, cfg.tol_for(check))
                    .undecided()
                    .detail("certificate", cert.status)
                    .detail("k", cfg.k);
                Ok(vec![r])
            }
        }
        CheckId::FawziRenner => {
            let (a, b, c) = split_abc(rho)?;
            one(checks::check_fawzi_renner(rho, &a, &b, &c, cfg))
        }
        CheckId::LocalRecoverability => one(checks::check_local_recoverability(rho, pairs, cfg)),
        CheckId::Remark2 => checks::check_remark2_family(rho, pairs, cfg),
        CheckId::Conjecture => one(checks::conjecture_trial(rho, pairs, cfg)),
        CheckId::Prop4SingleLetter => one(checks::check_prop4_single_letter(rho, pairs, cfg)),
    }
}

/// Runs one trial of a campaign; every report carries its replay record, and
/// failing ones also embed the state.
pub fn run_trial(
    check: CheckId,
    ensemble: &EnsembleSpec,
    trial: u64,
    campaign_seed: u64,
    cfg: &CheckConfig,
) -> Result<Vec<VerificationReport>> {
    let start = Instant::now();
    let trial_seed = derive_seed(campaign_seed, trial);
    let inst = ensemble.generate(trial, trial_seed)?;
    let mut local = *cfg;
    local.optimizer.seed = derive_seed(trial_seed, 1);
    let mut reports = run_check(check, &inst, &local)?;
    let elapsed = start.elapsed();
    for r in &mut reports {
        r.instance_descriptor = format!("{ensemble}#{trial}");
        r.seed = trial_seed;
        r.replay =
            Some(ReplayRecord { check_id: check, ensemble: ensemble.to_string(), trial, campaign_seed, config: *cfg });
        r.elapsed = elapsed;
        if !r.holds {
            r.witnesses = Some(serde_json::json!({ "state": inst.state }));
        }
    }
    Ok(reports)
}

/// Campaign on the global rayon pool.
pub fn run_campaign(check: CheckId, ensemble: &str, trials: u64, cfg: &CheckConfig, seed: u64) -> Result<Campaign> {
    cfg.validate()?;
    let spec = EnsembleSpec::parse(ensemble)?;
    let per_trial: Vec<Vec<VerificationReport>> =
        (0..trials).into_par_iter().map(|t| run_trial(check, &spec, t, seed, cfg)).collect::<Result<_>>()?;
    let reports: Vec<VerificationReport> = per_trial.into_iter().flatten().collect();
    Ok(Campaign { summary: summarize(check, &spec, seed, trials, &reports), reports })
}

/// Campaign on a dedicated pool of `workers` threads.
pub fn run_campaign_with_pool(
    check: CheckId,
    ensemble: &str,
    trials: u64,
    workers: usize,
    cfg: &CheckConfig,
    seed: u64,
) -> Result<Campaign> {
    if workers == 0 {
        return Err(Error::Parse("worker count must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::OptimizerFailure(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_campaign(check, ensemble, trials, cfg, seed))
}

fn summarize(
    check: CheckId,
    spec: &EnsembleSpec,
    seed: u64,
    trials: u64,
    reports: &[VerificationReport],
) -> CampaignSummary {
    let min_slack = reports.iter().map(|r| r.slack).fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.min(s))));
    let violation_reports: Vec<VerificationReport> = reports.iter().filter(|r| r.is_violation()).cloned().collect();
    CampaignSummary {
        check_id: check,
        tier: check.tier(),
        ensemble: spec.to_string(),
        seed,
        trials,
        reports: reports.len(),
        violations: violation_reports.len(),
        undecided: reports.iter().filter(|r| r.undecided).count(),
        min_slack,
        violation_reports,
    }
}

/// Regenerates the instance behind `report` and reruns its check; returns the
/// matching report (same mask for `remark2`).
pub fn replay(report: &VerificationReport) -> Result<VerificationReport> {
    let rec = report.replay.as_ref().ok_or_else(|| Error::Parse("report carries no replay record".into()))?;
    let spec = EnsembleSpec::parse(&rec.ensemble)?;
    if let Some(w) = report.witnesses.as_ref().and_then(|w| w.get("state")) {
        let stored: DensityMatrix = serde_json::from_value(w.clone())?;
        let regenerated = spec.generate(rec.trial, derive_seed(rec.campaign_seed, rec.trial))?.state;
        if stored.layout() != regenerated.layout() || stored.matrix().max_abs_diff(regenerated.matrix()) > 1e-12 {
            return Err(Error::InvalidState("embedded state differs from the regenerated instance".into()));
        }
    }
    let reports = run_trial(rec.check_id, &spec, rec.trial, rec.campaign_seed, &rec.config)?;
    let mask = report.details.get("mask");
    reports
        .into_iter()
        .find(|r| r.details.get("mask") == mask)
        .ok_or_else(|| Error::Parse("replayed trial has no matching report".into()))
}
