use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dgp::{HmmDgpParams, OutcomeKind, DEFAULT_BURN_IN};
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::inference::HacConfig;
use crate::mixture::{ModelSpec, OutcomeForm};

pub const DEFAULT_ORACLE_N_SIM: usize = 200_000;

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_oracle_n_sim() -> usize {
    DEFAULT_ORACLE_N_SIM
}

/// One cell of a simulation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Design label used as the panel heading when rendering.
    #[serde(default)]
    pub label: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub n_reps: usize,
    pub master_seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Path length for the pseudo-true weight used as the weight's truth.
    #[serde(default = "default_oracle_n_sim")]
    pub oracle_n_sim: usize,
    #[serde(default)]
    pub out_dir: PathBuf,
    pub dgp: HmmDgpParams,
    pub spec: ModelSpec,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub hac: HacConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn kind(&self) -> OutcomeKind {
        match self.spec.form {
            OutcomeForm::Hmm => OutcomeKind::Hmm,
            OutcomeForm::Msar => OutcomeKind::Msar,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.n_reps == 0 {
            bad.push("n_reps must be at least 1".to_string());
        }
        if self.t < 50 {
            bad.push(format!("T must be at least 50, got {}", self.t));
        }
        for check in [self.dgp.validate(), self.spec.validate(), self.estimator.validate()] {
            match check {
                Err(Error::Validation(v)) => bad.extend(v),
                Err(e) => bad.push(e.to_string()),
                Ok(()) => {}
            }
        }
        if self.spec.d != self.dgp.d() {
            bad.push(format!("model has {} regimes, process has {}", self.spec.d, self.dgp.d()));
        }
        if self.spec.form == OutcomeForm::Msar && self.dgp.ar_coefficient.is_none() {
            bad.push("autoregressive model needs dgp.ar_coefficient".into());
        }
        if self.oracle_n_sim < 10_000 {
            bad.push(format!("oracle_n_sim must be at least 10000, got {}", self.oracle_n_sim));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }
}
