//! Gradient-free searches over measurements, channels, extensions and
//! separable decompositions.
//!
//! Every search is deterministic given [`OptimizerConfig::seed`]: restart `r`
//! draws from its own stream derived from `(seed, r)`, and ties between
//! restarts go to the lower restart index.

mod cemi;
mod discord;
mod extendibility;
mod recovery;
mod search;
mod separable;
mod surprisal;

pub use cemi::{cemi_gap_for_extension, cemi_upper_bound_search, geometric_cemi, CemiSearch, GeometricCemi};
pub use discord::{msq_discord, msq_discord_with, DiscordOptions, DiscordResult};
pub use extendibility::{dykstra_k_extendibility, dykstra_k_extendibility_with, DykstraOptions, DEFAULT_DIMENSION_CAP};
pub use recovery::{
    averaged_petz_recovery, local_recovery_suite, optimize_recovery, optimize_recovery_until, search_local_recoveries,
    LocalRecovery, LocalRecoverySearch, RecoveryResult, RecoverySource,
};
pub use search::{compass_search, CompassResult};
pub use separable::{separable_distance_witness, SeparableWitness};
pub use surprisal::{surprisal_of_measurement_recoverability, SurprisalResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;

/// Settings shared by every optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_init: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { restarts: 4, max_iters: 200, step_init: 0.5, tol: 1e-8, seed: 0 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Parse("restarts must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Parse(format!("optimizer tolerance must be positive, got {}", self.tol)));
        }
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return Err(Error::Parse(format!("initial step must be positive, got {}", self.step_init)));
        }
        Ok(())
    }

    /// Same settings with `factor` times as many restarts.
    pub fn tightened(&self, factor: usize) -> Self {
        Self { restarts: self.restarts * factor, max_iters: self.max_iters * 2, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeasibilityStatus {
    Feasible,
    InfeasibleEvidence,
    Undecided,
}

/// Outcome of a k-extendibility search. `residual` is the largest constraint
/// violation of the best iterate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCertificate {
    pub status: FeasibilityStatus,
    pub iterations: usize,
    pub residual: f64,
    pub k: usize,
    pub extended: Vec<Vec<String>>,
    pub witness_state: Option<DensityMatrix>,
}
