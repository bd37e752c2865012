//! Subcommand implementations. Each returns the process exit code on success.

use std::path::Path;

use clap::{Args, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use qcorr::hilbert::DensityMatrix;
use qcorr::measures::{self, parse_pairs, parse_parts};
use qcorr::optimize::{
    cemi_upper_bound_search, dykstra_k_extendibility, geometric_cemi, msq_discord_with, optimize_recovery,
    surprisal_of_measurement_recoverability, DiscordOptions,
};
use qcorr::states::StateSpec;
use qcorr::verify::{self, check_definetti, CheckId, VerificationReport};
use qcorr::{Error, Result};

use crate::config::{Format, RunConfig};
use crate::output::{self, emit, sig9, Table};

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Entropies, total information and pairwise conditional informations.
    Measures(StateArgs),
    /// Best-found measured discord.
    Discord {
        #[command(flatten)]
        state: StateArgs,
        /// Rank-one POVMs through a qubit ancilla instead of projective bases.
        #[arg(long)]
        general: bool,
    },
    /// Best-found recovery of the lost systems from the anchor.
    Recover {
        #[arg(long)]
        state: String,
        /// Systems to recover, comma separated.
        #[arg(long)]
        lost: String,
        /// Systems the recovery acts on, comma separated.
        #[arg(long)]
        anchor: String,
    },
    /// Upper bound on the conditional entanglement of multipartite information.
    CemiBound {
        #[command(flatten)]
        state: StateArgs,
        /// Extension dimension per part (one value is broadcast).
        #[arg(long, default_value = "4")]
        ext_dims: String,
        /// Also report the fidelity-based variant.
        #[arg(long)]
        geometric: bool,
    },
    /// Surprisal of measurement recoverability.
    Surprisal(StateArgs),
    /// Per-round and total communication rates of state redistribution.
    PsdRates {
        #[arg(long)]
        state: String,
        /// Pairs like `A1:A1'|A2:A2'`; uncovered systems form the reference.
        #[arg(long)]
        pairs: String,
        /// Party order, e.g. `2,0,1`.
        #[arg(long, conflicts_with = "all_orders")]
        order: Option<String>,
        #[arg(long)]
        all_orders: bool,
    },
    /// k-extendibility search.
    Extendibility {
        #[arg(long)]
        state: String,
        /// Groups to extend, e.g. `B` or `B|C` (default: every system but the first).
        #[arg(long)]
        extend: Option<String>,
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
    /// de Finetti bound on the distance to separable states.
    Definetti {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Seeded verification campaign.
    Verify {
        /// Check id, e.g. lemma1, fr, conjecture.
        check: String,
        /// Instance ensemble, e.g. `traced?dims=2,2,2&env=4` (default per check).
        #[arg(long)]
        ensemble: Option<String>,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Copies per group for definetti.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Rerun the trials behind saved reports and compare.
    Replay {
        /// A report JSON file or the JSON-lines output of `verify`.
        file: std::path::PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct StateArgs {
    /// `builtin:NAME?k=v`, `random:ENSEMBLE?dims=..&seed=..`, or a state JSON file.
    #[arg(long)]
    pub state: String,
    /// Partition like `A1|A2,A3` (default: one part per system).
    #[arg(long)]
    pub parts: Option<String>,
}

impl StateArgs {
    fn load(&self, cfg: &RunConfig) -> Result<(DensityMatrix, Vec<Vec<String>>)> {
        let rho = load_state(&self.state, cfg)?;
        let parts = match &self.parts {
            Some(p) => parse_parts(p)?,
            None => rho.layout().labels().iter().map(|l| vec![l.to_string()]).collect(),
        };
        Ok((rho, parts))
    }
}

/// Random specs without an explicit seed take the run seed.
fn load_state(text: &str, cfg: &RunConfig) -> Result<DensityMatrix> {
    let text = if text.starts_with("random:") && !text.contains("seed=") {
        let sep = if text.contains('?') { '&' } else { '?' };
        format!("{text}{sep}seed={}", cfg.seed())
    } else {
        text.to_string()
    };
    StateSpec::parse(&text)?.load()
}

fn labels(list: &str) -> Vec<String> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn part_name(p: &[String]) -> String {
    p.join(",")
}

fn record(command: &str, state: &str, cfg: &RunConfig, result: impl Serialize) -> Result<Value> {
    Ok(json!({
        "command": command,
        "state": state,
        "seed": cfg.seed(),
        "config": cfg,
        "result": serde_json::to_value(result)?,
    }))
}

pub fn run(cmd: &Command, cfg: &RunConfig) -> Result<i32> {
    let tol = &cfg.check.tolerances;
    let opt = &cfg.check.optimizer;
    match cmd {
        Command::Measures(args) => {
            let (rho, parts) = args.load(cfg)?;
            let mut t = Table::new(cfg);
            let mut entropies = Vec::new();
            for p in &parts {
                let h = measures::marginal_entropy(&rho, p, tol)?;
                t.info(format!("H({})", part_name(p)), h);
                entropies.push(h);
            }
            let total = measures::multipartite_information(&rho, &parts, tol)?;
            t.info("I", total);
            let mut pairwise = Vec::new();
            for i in 0..parts.len() {
                for j in i + 1..parts.len() {
                    let rest: Vec<String> = parts
                        .iter()
                        .enumerate()
                        .filter(|&(m, _)| m != i && m != j)
                        .flat_map(|(_, p)| p.clone())
                        .collect();
                    let v = measures::conditional_mutual_information(&rho, &parts[i], &parts[j], &rest, tol)?;
                    let name = match rest.is_empty() {
                        true => format!("I({};{})", part_name(&parts[i]), part_name(&parts[j])),
                        false => format!("I({};{}|{})", part_name(&parts[i]), part_name(&parts[j]), part_name(&rest)),
                    };
                    t.info(&name, v);
                    pairwise.push(json!({"a": i, "b": j, "value": v}));
                }
            }
            let result =
                json!({"parts": parts, "entropies": entropies, "total_information": total, "pairwise_cmi": pairwise});
            emit(cfg, &t, record("measures", &args.state, cfg, result)?)?;
        }
        Command::Discord { state, general } => {
            let (rho, parts) = state.load(cfg)?;
            let opts = DiscordOptions { general_povm: *general, ..Default::default() };
            let d = msq_discord_with(&rho, &parts, opt, tol, &opts)?;
            let mut t = Table::new(cfg);
            t.info("discord", d.value).info("total information", d.total_information);
            t.info("classical information", d.classical_information);
            t.text("best restart", d.restart.map_or("warm start".to_string(), |r| r.to_string()));
            emit(cfg, &t, record("discord", &state.state, cfg, &d)?)?;
        }
        Command::Recover { state, lost, anchor } => {
            let rho = load_state(state, cfg)?;
            let (lost, anchor) = (labels(lost), labels(anchor));
            let r = optimize_recovery(&rho, &lost, &anchor, opt)?;
            let rest: Vec<String> = rho
                .layout()
                .labels()
                .iter()
                .map(|s| s.to_string())
                .filter(|l| !lost.contains(l) && !anchor.contains(l))
                .collect();
            let mut t = Table::new(cfg);
            t.num("fidelity", r.fidelity).info("-ln F", -r.fidelity.max(0.0).ln());
            if !rest.is_empty() {
                let cmi = measures::conditional_mutual_information(&rho, &lost, &rest, &anchor, tol)?;
                t.info(format!("I({};{}|{})", part_name(&lost), part_name(&rest), part_name(&anchor)), cmi);
            }
            t.text("source", format!("{:?}", r.source));
            if let Some(x) = r.t {
                t.num("t", x);
            }
            emit(cfg, &t, record("recover", state, cfg, &r)?)?;
        }
        Command::CemiBound { state, ext_dims, geometric } => {
            let (rho, parts) = state.load(cfg)?;
            let mut dims = qcorr::states::parse_dims(ext_dims)?;
            if dims.len() == 1 {
                dims = vec![dims[0]; parts.len()];
            }
            let s = cemi_upper_bound_search(&rho, &parts, &dims, opt, tol)?;
            let mut t = Table::new(cfg);
            t.info("cemi upper bound", s.value);
            let mut result = json!({"search": s});
            if *geometric {
                let g = geometric_cemi(&rho, &parts, &dims, opt, tol)?;
                t.info("geometric value", g.value).num("fidelity", g.fidelity);
                result["geometric"] = serde_json::to_value(&g)?;
            }
            emit(cfg, &t, record("cemi-bound", &state.state, cfg, result)?)?;
        }
        Command::Surprisal(args) => {
            let (rho, parts) = args.load(cfg)?;
            let s = surprisal_of_measurement_recoverability(&rho, &parts, opt)?;
            let mut t = Table::new(cfg);
            t.info("surprisal", s.value).num("fidelity", s.fidelity);
            emit(cfg, &t, record("surprisal", &args.state, cfg, &s)?)?;
        }
        Command::PsdRates { state, pairs, order, all_orders } => {
            let rho = load_state(state, cfg)?;
            let pairs = parse_pairs(pairs)?;
            let phi = rho.purify(&fresh_label(&rho))?;
            let orders: Vec<Vec<usize>> = if *all_orders {
                permutations(pairs.len())
            } else if let Some(o) = order {
                vec![parse_order(o)?]
            } else {
                vec![(0..pairs.len()).collect()]
            };
            let mut t = Table::new(cfg);
            let mut rates = Vec::new();
            for o in &orders {
                let r = measures::psd_rates(&phi, &pairs, o, tol)?;
                let key = o.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
                for (round, v) in r.per_round.iter().enumerate() {
                    t.info(format!("[{key}] round {} (party {})", round + 1, o[round]), *v);
                }
                t.info(format!("[{key}] total rate"), r.total_rate);
                rates.push(r);
            }
            emit(cfg, &t, record("psd-rates", state, cfg, json!({"pairs": pairs, "rates": rates}))?)?;
        }
        Command::Extendibility { state, extend, k } => {
            let rho = load_state(state, cfg)?;
            let groups = match extend {
                Some(e) => parse_parts(e)?,
                None => rho.layout().labels().iter().skip(1).map(|l| vec![l.to_string()]).collect(),
            };
            let cert = dykstra_k_extendibility(&rho, &groups, *k, opt)?;
            let mut t = Table::new(cfg);
            t.text("status", format!("{:?}", cert.status)).num("k", cert.k as f64);
            t.num("residual", cert.residual).num("iterations", cert.iterations as f64);
            emit(cfg, &t, record("extendibility", state, cfg, &cert)?)?;
        }
        Command::Definetti { state, k } => {
            let (rho, parts) = state.load(cfg)?;
            let k = k.unwrap_or(cfg.check.k);
            let cert = dykstra_k_extendibility(&rho, &parts[1.min(parts.len())..], k, opt)?;
            let mut check = cfg.check;
            check.k = k;
            let mut t = Table::new(cfg);
            t.text("certificate", format!("{:?}", cert.status));
            let result = match check_definetti(&rho, &cert, &parts, &check) {
                Ok(r) => {
                    t.num("bound", r.lhs).num("separable distance ub", r.rhs).text("holds", r.holds);
                    json!({"certificate": cert, "report": r})
                }
                Err(Error::MissingWitness) => {
                    t.text("holds", "undecided (no extension found)");
                    json!({"certificate": cert, "report": Value::Null})
                }
                Err(e) => return Err(e),
            };
            emit(cfg, &t, record("definetti", &state.state, cfg, result)?)?;
        }
        Command::Verify { check, ensemble, trials, k } => {
            return run_verify(check, ensemble.as_deref(), *trials, *k, cfg)
        }
        Command::Replay { file } => return run_replay(file, cfg),
    }
    Ok(0)
}

fn fresh_label(rho: &DensityMatrix) -> String {
    let mut label = "R".to_string();
    while rho.layout().contains(&label) {
        label.push('_');
    }
    label
}

fn parse_order(text: &str) -> Result<Vec<usize>> {
    text.split(',').map(|s| s.trim().parse().map_err(|_| Error::Parse(format!("bad party index `{s}`")))).collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

fn run_verify(check: &str, ensemble: Option<&str>, trials: u64, k: Option<usize>, cfg: &RunConfig) -> Result<i32> {
    let id: CheckId = check.parse()?;
    let ensemble = ensemble.unwrap_or(id.default_ensemble());
    let mut check_cfg = cfg.check;
    if let Some(k) = k {
        check_cfg.k = k;
    }
    let campaign = verify::run_campaign_with_pool(id, ensemble, trials, cfg.workers, &check_cfg, cfg.seed())?;
    let s = &campaign.summary;
    let body = match cfg.format {
        Format::Json => {
            let mut text = String::new();
            for r in &campaign.reports {
                text.push_str(&serde_json::to_string(r)?);
                text.push('\n');
            }
            text.push_str(&serde_json::to_string(&json!({"summary": s, "config": cfg}))?);
            text.push('\n');
            text
        }
        Format::Csv => {
            let mut text = String::from("trial,lhs,rhs,slack\n");
            for r in &campaign.reports {
                text.push_str(&r.csv_row());
                text.push('\n');
            }
            text
        }
    };
    let mut t = Table::new(cfg);
    t.text("check", s.check_id).text("tier", format!("{:?}", s.tier).to_lowercase());
    t.text("ensemble", &s.ensemble).text("seed", s.seed).text("trials", s.trials).text("reports", s.reports);
    t.text(if id == CheckId::Conjecture { "candidates" } else { "violations" }, s.violations);
    t.text("undecided", s.undecided);
    t.text("min slack", s.min_slack.map_or("-".to_string(), sig9));
    match &cfg.out {
        Some(path) => {
            output::write_file(path, &body)?;
            output::print(&t.plain())?;
        }
        None => {
            output::print(&body)?;
            eprint!("{}", t.plain());
        }
    }
    Ok(if s.theorem_violated() { 1 } else { 0 })
}

fn read_reports(path: &Path) -> Result<Vec<VerificationReport>> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(r) = serde_json::from_str::<VerificationReport>(&text) {
        return Ok(vec![r]);
    }
    let mut out = Vec::new();
    let mut from_summaries = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line)?;
        match v.get("summary") {
            // summaries carry their failing reports; used when nothing else is there
            Some(s) => {
                for r in s.get("violation_reports").and_then(Value::as_array).into_iter().flatten() {
                    from_summaries.push(serde_json::from_value(r.clone())?);
                }
            }
            None => out.push(serde_json::from_value(v)?),
        }
    }
    if out.is_empty() {
        out = from_summaries;
    }
    if out.is_empty() {
        return Err(Error::Parse(format!("no reports in {}", path.display())));
    }
    Ok(out)
}

fn run_replay(path: &Path, cfg: &RunConfig) -> Result<i32> {
    let reports = read_reports(path)?;
    let mut t = Table::new(cfg);
    let mut replayed = Vec::new();
    let mut mismatches = 0;
    for r in &reports {
        let again = verify::replay(r)?;
        let same = (again.lhs - r.lhs).abs() <= 1e-12 && (again.rhs - r.rhs).abs() <= 1e-12;
        if !same {
            mismatches += 1;
        }
        let label = match r.details.get("mask") {
            Some(m) => format!("{} {} mask {}", r.check_id, r.instance_descriptor, m.as_str().unwrap_or("?")),
            None => format!("{} {}", r.check_id, r.instance_descriptor),
        };
        t.text(
            label,
            format!("lhs {} rhs {} {}", sig9(again.lhs), sig9(again.rhs), if same { "reproduced" } else { "MISMATCH" }),
        );
        replayed.push(again);
    }
    t.text("reports", reports.len()).text("mismatches", mismatches);
    emit(cfg, &t, json!({"command": "replay", "file": path, "config": cfg, "reports": replayed}))?;
    Ok(if mismatches > 0 { 3 } else { 0 })
}
