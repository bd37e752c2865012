//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use qcorr::hilbert::{DensityMatrix, SystemLayout};
use qcorr::measures::ToleranceProfile;
use qcorr::optimize::{
    cemi_upper_bound_search, dykstra_k_extendibility, msq_discord, FeasibilityStatus, OptimizerConfig,
};
use qcorr::states::{
    classical_state, derive_seed, named_state, random_mixed, random_state, rng, separable_state, Ensemble,
};
use qcorr::verify::{self, check_definetti, check_fawzi_renner, definetti_rhs, CheckConfig, CheckId};
use qcorr::Result;

struct Outcome {
    pass: bool,
    note: String,
}

fn outcome(pass: bool, note: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, note: note.into() })
}

fn params(kv: &[(&str, &str)]) -> BTreeMap<String, String> {
    kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn labels(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn cfg() -> CheckConfig {
    CheckConfig::default()
}

fn within(limit: Duration, t: Instant) -> bool {
    t.elapsed() <= limit
}

fn chain_identity() -> Result<Outcome> {
    let t = Instant::now();
    let c = verify::run_campaign(CheckId::Lemma1, "traced?dims=2,2,2,2,2,2&env=8", 200, &cfg(), 1)?;
    let worst = c.reports.iter().map(|r| r.rhs).fold(0.0, f64::max);
    let fast = within(Duration::from_secs(60), t);
    outcome(
        c.summary.violations == 0 && worst <= 1e-9 && fast,
        format!("200 states, 6 orders each, max |gap - chain| = {worst:.2e}, {:.1}s", t.elapsed().as_secs_f64()),
    )
}

fn monotonicity_and_ssa() -> Result<Outcome> {
    let t = Instant::now();
    let m = verify::run_campaign(CheckId::Monotone, "traced?dims=2,2,2&env=4", 200, &cfg(), 2)?;
    let s = verify::run_campaign(CheckId::Ssa, "traced?dims=2,2,2&env=4", 200, &cfg(), 3)?;
    let fast = within(Duration::from_secs(60), t);
    outcome(
        m.summary.violations == 0 && s.summary.violations == 0 && fast,
        format!(
            "monotone min slack {:.2e}, ssa min slack {:.2e}, {:.1}s",
            m.summary.min_slack.unwrap_or(0.0),
            s.summary.min_slack.unwrap_or(0.0),
            t.elapsed().as_secs_f64()
        ),
    )
}

fn relative_entropy_form() -> Result<Outcome> {
    let c = verify::run_campaign(CheckId::RelativeEntropy, "traced?dims=2,2,2&env=4", 100, &cfg(), 4)?;
    let worst = c.reports.iter().map(|r| r.rhs).fold(0.0, f64::max);
    outcome(c.summary.violations == 0 && worst <= 1e-9, format!("100 states, max |I - D| = {worst:.2e}"))
}

/// Σ_c p_c ρ_A^c ⊗ ρ_B^c ⊗ |c⟩⟨c|_C: a Markov chain A − C − B.
fn markov_state(seed: u64) -> Result<DensityMatrix> {
    let mut g = rng(seed);
    let a = SystemLayout::qubits(&["A"])?;
    let b = SystemLayout::qubits(&["B"])?;
    let c = SystemLayout::qubits(&["C"])?;
    let p = qcorr::states::uniform(&mut g);
    let mut terms = Vec::new();
    for k in 0..2 {
        let flag = DensityMatrix::basis_state(c.clone(), k)?;
        terms.push(random_mixed(&a, &mut g).tensor(&random_mixed(&b, &mut g))?.tensor(&flag)?);
    }
    DensityMatrix::mixture(&[p, 1.0 - p], &terms)
}

fn fawzi_renner() -> Result<Outcome> {
    let c = verify::run_campaign(CheckId::FawziRenner, "traced?dims=2,2,2&env=4", 100, &cfg(), 5)?;
    let good = c.reports.iter().filter(|r| r.slack >= -1e-6).count();
    let worst_shortfall = c.reports.iter().filter(|r| r.slack < -1e-6).map(|r| -r.slack).fold(0.0, f64::max);
    let mut min_fid: f64 = 1.0;
    for k in 0..20 {
        let rho = markov_state(derive_seed(55, k))?;
        let r = check_fawzi_renner(&rho, &labels(&["A"]), &labels(&["B"]), &labels(&["C"]), &cfg())?;
        min_fid = min_fid.min(r.details["fidelity"].as_f64().unwrap_or(0.0));
    }
    outcome(
        good >= 95 && min_fid >= 1.0 - 1e-8,
        format!(
            "{good}/100 within 1e-6 (largest shortfall {worst_shortfall:.2e}, soft bound 1e-2: {}); zero-CMI min fidelity 1 - {:.1e}",
            if worst_shortfall < 1e-2 { "met" } else { "exceeded" },
            1.0 - min_fid
        ),
    )
}

fn local_recoverability() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (ens, n) in [("flag?dims=2,2&terms=3", 25), ("flag?dims=2,2,2&terms=2", 25)] {
        let c = verify::run_campaign(CheckId::Remark2, ens, n, &cfg(), 6)?;
        for r in &c.reports {
            worst = worst.max(r.lhs.abs()).max(r.rhs);
        }
        count += c.reports.len();
    }
    let soft = CheckConfig { optimizer: OptimizerConfig { restarts: 1, max_iters: 20, ..Default::default() }, ..cfg() };
    let rnd = verify::run_campaign(CheckId::LocalRecoverability, "traced?dims=2,2,2,2&env=4", 200, &soft, 7)?;
    outcome(
        worst <= 1e-8,
        format!(
            "50 flag extensions, {count} mask reports, max(|lhs|, rhs) = {worst:.2e}; 200 random: min slack {:.3e}, {} below tol",
            rnd.summary.min_slack.unwrap_or(0.0),
            rnd.summary.violations
        ),
    )
}

fn discord() -> Result<Outcome> {
    let t = Instant::now();
    let tol = ToleranceProfile::default();
    let oc = OptimizerConfig::default();
    let ab = SystemLayout::qubits(&["A", "B"])?;
    let parts = vec![labels(&["A"]), labels(&["B"])];
    let mut worst_classical: f64 = 0.0;
    for k in 0..10 {
        let mut g = rng(derive_seed(66, k));
        let mut p: Vec<f64> = (0..4).map(|_| qcorr::states::uniform(&mut g)).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        let last = 1.0 - p[..3].iter().sum::<f64>();
        p[3] = last;
        let rho = classical_state(&p, &ab)?;
        worst_classical = worst_classical.max(msq_discord(&rho, &parts, &oc, &tol)?.value);
    }
    let oracle = common::bell_discord_grid();
    let bell = msq_discord(&named_state("bell", &BTreeMap::new())?, &parts, &oc, &tol)?.value;
    let mut worst_product: f64 = 0.0;
    for k in 0..10 {
        let a = random_state(Ensemble::HaarPure, &SystemLayout::qubits(&["A"])?, derive_seed(67, k))?;
        let b = random_state(Ensemble::TracedPure(2), &SystemLayout::qubits(&["B"])?, derive_seed(68, k))?;
        worst_product = worst_product.max(msq_discord(&a.tensor(&b)?, &parts, &oc, &tol)?.value.abs());
    }
    let fast = within(Duration::from_secs(120), t);
    outcome(
        worst_classical <= 1e-6 && (bell - oracle).abs() <= 1e-4 && (bell - std::f64::consts::LN_2).abs() <= 1e-4 && worst_product <= 1e-9 && fast,
        format!(
            "classical max {worst_classical:.1e}; Bell {bell:.6} vs grid oracle {oracle:.6}; product max {worst_product:.1e}; {:.1}s",
            t.elapsed().as_secs_f64()
        ),
    )
}

fn small_discord_bound() -> Result<Outcome> {
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    for (i, eps) in ["0", "0.01", "0.05"].iter().enumerate() {
        let ens = format!("eb-fixed?dims=2,2&eps={eps}");
        let c = verify::run_campaign(CheckId::Prop1Forward, &ens, 50, &cfg(), 70 + i as u64)?;
        violations += c.summary.violations;
        min_slack = min_slack.min(c.summary.min_slack.unwrap_or(0.0));
    }
    outcome(violations == 0, format!("150 states (50 per ε), violations {violations}, min slack {min_slack:.3e}"))
}

fn entanglement_breaking_closeness() -> Result<Outcome> {
    let c = verify::run_campaign(CheckId::Prop1Converse, "traced?dims=2,2&env=4", 50, &cfg(), 8)?;
    outcome(
        c.summary.violations == 0,
        format!("50 states, violations {}, min slack {:.3e}", c.summary.violations, c.summary.min_slack.unwrap_or(0.0)),
    )
}

fn esq_le_cemi() -> Result<Outcome> {
    let c = verify::run_campaign(CheckId::EsqCemi, "traced?dims=2,2,2,2&env=4", 200, &cfg(), 9)?;
    outcome(c.summary.violations == 0, format!("200 extensions, min slack {:.3e}", c.summary.min_slack.unwrap_or(0.0)))
}

fn random_separable(seed: u64) -> Result<DensityMatrix> {
    let mut g = rng(seed);
    let a = SystemLayout::qubits(&["A"])?;
    let b = SystemLayout::qubits(&["B"])?;
    let terms = 2 + (seed % 3) as usize;
    let mut w: Vec<f64> = (0..terms).map(|_| 0.1 + qcorr::states::uniform(&mut g)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    let last = 1.0 - w[..terms - 1].iter().sum::<f64>();
    w[terms - 1] = last;
    let factors = (0..terms).map(|_| vec![random_mixed(&a, &mut g), random_mixed(&b, &mut g)]).collect::<Vec<_>>();
    separable_state(&w, &factors)
}

fn cemi_faithfulness() -> Result<Outcome> {
    let tol = ToleranceProfile::default();
    let oc = OptimizerConfig::default();
    let parts = vec![labels(&["A"]), labels(&["B"])];
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let rho = random_separable(derive_seed(100, k))?;
        worst = worst.max(cemi_upper_bound_search(&rho, &parts, &[4, 4], &oc, &tol)?.value);
    }
    let bell = cemi_upper_bound_search(&named_state("bell", &BTreeMap::new())?, &parts, &[4, 4], &oc, &tol)?.value;
    outcome(
        worst <= 1e-3,
        format!(
            "20 separable states, max bound {worst:.2e}; Φ⁺ bound {bell:.4} (soft floor 0.1 {})",
            if bell >= 0.1 { "met" } else { "missed" }
        ),
    )
}

fn extendibility() -> Result<Outcome> {
    let t = Instant::now();
    let oc = OptimizerConfig { restarts: 2, ..Default::default() };
    let mut sep_ok = true;
    let mut sep_states = vec![named_state("separable", &BTreeMap::new())?, named_state("product", &BTreeMap::new())?];
    for k in 0..3 {
        sep_states.push(random_separable(derive_seed(110, k))?);
    }
    for s in &sep_states {
        for k in [2, 3] {
            sep_ok &= dykstra_k_extendibility(s, &[vec!["B"]], k, &oc)?.status == FeasibilityStatus::Feasible;
        }
    }
    let bell = dykstra_k_extendibility(&named_state("bell", &BTreeMap::new())?, &[vec!["B"]], 2, &oc)?.status;
    let w01 = dykstra_k_extendibility(&named_state("werner", &params(&[("p", "0.1")]))?, &[vec!["B"]], 2, &oc)?.status;
    let w09 = dykstra_k_extendibility(&named_state("werner", &params(&[("p", "0.9")]))?, &[vec!["B"]], 2, &oc)?.status;
    let (o01, o09) = (common::werner_two_extendible_grid(0.1), common::werner_two_extendible_grid(0.9));
    let agree = (w01 == FeasibilityStatus::Feasible) == o01 && (w09 == FeasibilityStatus::Feasible) == o09;
    let fast = within(Duration::from_secs(300), t);
    outcome(
        sep_ok
            && bell == FeasibilityStatus::InfeasibleEvidence
            && w01 == FeasibilityStatus::Feasible
            && w09 == FeasibilityStatus::InfeasibleEvidence
            && agree
            && fast,
        format!(
            "separable k=2,3 all Feasible: {sep_ok}; Φ⁺ {bell:?}; Werner 0.1 {w01:?} / 0.9 {w09:?}; oracle {o01}/{o09}; {:.1}s",
            t.elapsed().as_secs_f64()
        ),
    )
}

fn definetti() -> Result<Outcome> {
    let arithmetic = definetti_rhs(&[2, 2, 2], 8)? == 2.0 && definetti_rhs(&[2, 2, 2], 2)? == 8.0;
    let c = cfg();
    let parts = vec![labels(&["A"]), labels(&["B"])];
    let mut passes = 0;
    let mut undecided = 0;
    let mut separable_pass = true;
    let mut states: Vec<(DensityMatrix, bool)> =
        (0..15).map(|k| Ok((random_separable(derive_seed(120, k))?, true))).collect::<Result<_>>()?;
    for p in ["0.35", "0.4", "0.45", "0.5", "0.55"] {
        states.push((named_state("werner", &params(&[("p", p)]))?, false));
    }
    let mut feasible = 0;
    for (rho, separable) in &states {
        let cert = dykstra_k_extendibility(rho, &[vec!["B"]], 2, &c.optimizer)?;
        if cert.status != FeasibilityStatus::Feasible {
            separable_pass &= !separable;
            continue;
        }
        feasible += 1;
        let r = check_definetti(rho, &cert, &parts, &c)?;
        if r.undecided {
            undecided += 1;
        } else if r.holds {
            passes += 1;
        }
        if *separable {
            separable_pass &= r.holds && !r.undecided && r.rhs <= 1e-3;
        }
    }
    outcome(
        arithmetic && feasible == 20 && passes + undecided == 20 && separable_pass,
        format!("arithmetic exact: {arithmetic}; {feasible} Feasible certificates, {passes} PASS, {undecided} Undecided; separable all PASS: {separable_pass}"),
    )
}

fn conjecture() -> Result<Outcome> {
    let t = Instant::now();
    let haar = verify::run_campaign(CheckId::Conjecture, "haar?dims=2,2,2,2", 1000, &cfg(), 13)?;
    let secs = t.elapsed().as_secs_f64();
    let again = verify::run_campaign_with_pool(CheckId::Conjecture, "haar?dims=2,2,2,2", 40, 1, &cfg(), 13)?;
    let deterministic = again.reports[..] == haar.reports[..40];
    let classical = verify::run_campaign(CheckId::Conjecture, "classical?dims=2,2,2,2", 200, &cfg(), 14)?;
    outcome(
        deterministic && classical.summary.violations == 0,
        format!(
            "Haar 1000 trials in {secs:.1}s: {} candidates, min slack {:.3e}; rerun of first 40 identical: {deterministic}; classical 200 trials: {} candidates",
            haar.summary.violations,
            haar.summary.min_slack.unwrap_or(0.0),
            classical.summary.violations
        ),
    )
}

fn determinism() -> Result<Outcome> {
    let mut same = true;
    let runs = [
        (CheckId::Lemma1, "traced?dims=2,2,2,2&env=3", 20),
        (CheckId::FawziRenner, "traced?dims=2,2,2&env=2", 10),
        (CheckId::Conjecture, "haar?dims=2,2,2,2", 10),
        (CheckId::Prop1Converse, "traced?dims=2,2&env=2", 6),
    ];
    for (id, ens, n) in runs {
        let a = verify::run_campaign_with_pool(id, ens, n, 1, &cfg(), 77)?;
        let b = verify::run_campaign_with_pool(id, ens, n, 4, &cfg(), 77)?;
        same &= a.summary == b.summary && a.reports == b.reports;
    }
    outcome(same, "4 campaigns, workers 1 vs 4: summaries and reports identical")
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 14] = [
        ("chain-identity", chain_identity),
        ("monotonicity-ssa", monotonicity_and_ssa),
        ("relative-entropy-form", relative_entropy_form),
        ("fawzi-renner", fawzi_renner),
        ("local-recoverability", local_recoverability),
        ("msq-discord", discord),
        ("small-discord-bound", small_discord_bound),
        ("eb-closeness", entanglement_breaking_closeness),
        ("esq-le-cemi", esq_le_cemi),
        ("cemi-faithfulness", cemi_faithfulness),
        ("k-extendibility", extendibility),
        ("de-finetti", definetti),
        ("conjecture-explorer", conjecture),
        ("determinism", determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let (pass, note) = match f() {
            Ok(o) => (o.pass, o.note),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("{} {n:>2} {name}: {note} [{:.1}s]", if pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
