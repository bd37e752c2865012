//! Single-instance inequality checks and seeded random campaigns over them.
//!
//! Every report is oriented so that `lhs ≥ rhs` is the claim: `slack = lhs − rhs`
//! and `holds ⇔ slack ≥ −tol`. Theorem-tier checks are proved statements, so a
//! failing report there points at a numerical bug. Existential-tier checks
//! depend on an optimizer finding a good recovery and only report.

mod campaign;
mod checks;
mod ensemble;

pub use campaign::{replay, run_campaign, run_campaign_with_pool, run_trial, Campaign, CampaignSummary};
pub use checks::{
    check_definetti, check_dimension_bound, check_esq_le_cemi, check_fannes, check_fawzi_renner, check_lemma1,
    check_local_recoverability, check_monotonicity, check_prop1_converse, check_prop1_forward,
    check_prop4_single_letter, check_relative_entropy_form, check_remark2_family, check_ssa, conjecture_trial,
    definetti_rhs, EbSpec,
};
pub use ensemble::{EnsembleSpec, Instance};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::ToleranceProfile;
use crate::optimize::OptimizerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CheckId {
    FawziRenner,
    LocalRecoverability,
    Remark2,
    EsqCemi,
    Prop1Forward,
    Prop1Converse,
    Definetti,
    Conjecture,
    Prop4SingleLetter,
    Monotone,
    Lemma1,
    DimensionBound,
    Fannes,
    Ssa,
    RelativeEntropy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    /// Proved statements; a violation is a bug.
    Theorem,
    /// Existence claims or open questions; failures are optimizer shortfalls or candidates.
    Existential,
}

impl CheckId {
    pub const ALL: [CheckId; 15] = [
        CheckId::FawziRenner,
        CheckId::LocalRecoverability,
        CheckId::Remark2,
        CheckId::EsqCemi,
        CheckId::Prop1Forward,
        CheckId::Prop1Converse,
        CheckId::Definetti,
        CheckId::Conjecture,
        CheckId::Prop4SingleLetter,
        CheckId::Monotone,
        CheckId::Lemma1,
        CheckId::DimensionBound,
        CheckId::Fannes,
        CheckId::Ssa,
        CheckId::RelativeEntropy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::FawziRenner => "fr",
            CheckId::LocalRecoverability => "local-rec",
            CheckId::Remark2 => "remark2",
            CheckId::EsqCemi => "esq-cemi",
            CheckId::Prop1Forward => "prop1-fwd",
            CheckId::Prop1Converse => "prop1-conv",
            CheckId::Definetti => "definetti",
            CheckId::Conjecture => "conjecture",
            CheckId::Prop4SingleLetter => "prop4-n1",
            CheckId::Monotone => "monotone",
            CheckId::Lemma1 => "lemma1",
            CheckId::DimensionBound => "dimension-bound",
            CheckId::Fannes => "fannes",
            CheckId::Ssa => "ssa",
            CheckId::RelativeEntropy => "rel-entropy",
        }
    }

    pub fn tier(self) -> Tier {
        match self {
            CheckId::FawziRenner
            | CheckId::LocalRecoverability
            | CheckId::Remark2
            | CheckId::Prop1Converse
            | CheckId::Conjecture
            | CheckId::Prop4SingleLetter => Tier::Existential,
            _ => Tier::Theorem,
        }
    }

    /// Report tolerance used when the config does not override it.
    pub fn default_tol(self) -> f64 {
        match self {
            CheckId::FawziRenner | CheckId::Prop1Forward | CheckId::Prop1Converse | CheckId::Prop4SingleLetter => 1e-6,
            CheckId::LocalRecoverability | CheckId::Remark2 => 1e-8,
            CheckId::Conjecture => 1e-4,
            _ => 1e-9,
        }
    }

    /// Ensemble used when none is given.
    pub fn default_ensemble(self) -> &'static str {
        match self {
            CheckId::Lemma1 => "traced?dims=2,2,2,2,2,2&env=8",
            CheckId::EsqCemi
            | CheckId::DimensionBound
            | CheckId::LocalRecoverability
            | CheckId::Remark2
            | CheckId::Prop4SingleLetter => "traced?dims=2,2,2,2&env=4",
            CheckId::Conjecture => "haar?dims=2,2,2,2",
            CheckId::Prop1Forward => "eb-fixed?dims=2,2&eps=0,0.01,0.05",
            CheckId::Prop1Converse => "traced?dims=2,2&env=4",
            CheckId::Definetti => "separable?dims=2,2&terms=3",
            _ => "traced?dims=2,2,2&env=4",
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('_', "-");
        CheckId::ALL
            .into_iter()
            .find(|c| c.as_str() == norm || (norm == "esq-le-cemi" && *c == CheckId::EsqCemi))
            .ok_or_else(|| Error::UnknownCheck(s.to_string()))
    }
}

impl TryFrom<String> for CheckId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CheckId> for String {
    fn from(c: CheckId) -> String {
        c.as_str().to_string()
    }
}

/// Settings shared by every check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckConfig {
    pub optimizer: OptimizerConfig,
    pub tolerances: ToleranceProfile,
    /// Overrides [`CheckId::default_tol`].
    pub tol: Option<f64>,
    /// How far the best-found conjecture rhs must exceed lhs to count as a candidate.
    pub margin: f64,
    /// Copies per extended group in the de Finetti check.
    pub k: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            tolerances: ToleranceProfile::default(),
            tol: None,
            margin: 1e-4,
            k: 2,
        }
    }
}

impl CheckConfig {
    pub fn tol_for(&self, id: CheckId) -> f64 {
        self.tol.unwrap_or_else(|| id.default_tol())
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.tolerances.validate()?;
        if let Some(t) = self.tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Parse(format!("report tolerance must be nonnegative, got {t}")));
            }
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::Parse(format!("margin must be nonnegative, got {}", self.margin)));
        }
        if self.k == 0 {
            return Err(Error::Parse("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Enough to regenerate the instance and rerun the check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub check_id: CheckId,
    pub ensemble: String,
    pub trial: u64,
    pub campaign_seed: u64,
    pub config: CheckConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check_id: CheckId,
    pub instance_descriptor: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    pub tol: f64,
    /// The check could not decide (missing certificate, vacuous premise, ...).
    #[serde(default)]
    pub undecided: bool,
    #[serde(default)]
    pub details: BTreeMap<String, serde_json::Value>,
    pub witnesses: Option<serde_json::Value>,
    pub seed: u64,
    pub replay: Option<ReplayRecord>,
    pub elapsed: Duration,
}

impl PartialEq for VerificationReport {
    /// Ignores `elapsed`.
    fn eq(&self, o: &Self) -> bool {
        self.check_id == o.check_id
            && self.instance_descriptor == o.instance_descriptor
            && self.lhs.to_bits() == o.lhs.to_bits()
            && self.rhs.to_bits() == o.rhs.to_bits()
            && self.slack.to_bits() == o.slack.to_bits()
            && self.holds == o.holds
            && self.tol.to_bits() == o.tol.to_bits()
            && self.undecided == o.undecided
            && self.details == o.details
            && self.witnesses == o.witnesses
            && self.seed == o.seed
            && self.replay == o.replay
    }
}

impl VerificationReport {
    pub fn new(check_id: CheckId, instance_descriptor: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let slack = lhs - rhs;
        Self {
            check_id,
            instance_descriptor: instance_descriptor.into(),
            lhs,
            rhs,
            slack,
            holds: slack >= -tol,
            tol,
            undecided: false,
            details: BTreeMap::new(),
            witnesses: None,
            seed: 0,
            replay: None,
            elapsed: Duration::ZERO,
        }
    }

    pub fn detail(mut self, key: &str, value: impl Serialize) -> Self {
        self.details.insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
        self
    }

    pub fn undecided(mut self) -> Self {
        self.undecided = true;
        self
    }

    /// A failing report that is not undecided.
    pub fn is_violation(&self) -> bool {
        !self.holds && !self.undecided
    }

    /// CSV row `trial,lhs,rhs,slack` (trial from the replay record, else empty).
    pub fn csv_row(&self) -> String {
        let trial = self.replay.as_ref().map(|r| r.trial.to_string()).unwrap_or_default();
        format!("{trial},{:e},{:e},{:e}", self.lhs, self.rhs, self.slack)
    }
}

/// Finite stand-in for +∞ so reports stay valid JSON.
pub(crate) fn finite(x: f64) -> f64 {
    if x.is_nan() {
        f64::MAX
    } else {
        x.clamp(-f64::MAX, f64::MAX)
    }
}
