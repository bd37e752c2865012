//! Run configuration: a JSON file merged under the command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use qcorr::verify::CheckConfig;
use qcorr::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Everything a run depends on besides its inputs. Stored next to every result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub check: CheckConfig,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    /// Display entropic quantities in bits; stored values stay in nats.
    pub bits: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { check: CheckConfig::default(), workers: 1, out: None, format: Format::Json, bits: false }
    }
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Worker threads for campaigns and optimizer restarts.
    #[arg(long, global = true, env = "QCORR_WORKERS")]
    pub workers: Option<usize>,
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; explicit flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Optimizer restarts.
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Optimizer iteration budget.
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    /// Report tolerance (overrides the per-check default).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Candidate margin for the conjecture explorer.
    #[arg(long, global = true)]
    pub margin: Option<f64>,
    /// Print entropic quantities in bits.
    #[arg(long, global = true)]
    pub bits: bool,
}

impl GlobalOpts {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load(path)?,
            None => RunConfig::default(),
        };
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(s) = self.seed {
            cfg.check.optimizer.seed = s;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if let Some(r) = self.restarts {
            cfg.check.optimizer.restarts = r;
        }
        if let Some(m) = self.max_iters {
            cfg.check.optimizer.max_iters = m;
        }
        if self.tol.is_some() {
            cfg.check.tol = self.tol;
        }
        if let Some(m) = self.margin {
            cfg.check.margin = m;
        }
        cfg.bits |= self.bits;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Parse("worker count must be at least 1".into()));
        }
        self.check.validate()
    }

    pub fn seed(&self) -> u64 {
        self.check.optimizer.seed
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
