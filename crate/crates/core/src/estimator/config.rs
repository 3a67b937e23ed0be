use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub n_starts: usize,
    pub em_max_iter: usize,
    /// Stop EM once the average log-likelihood rises by less than this.
    pub em_tol: f64,
    pub qn_max_iter: usize,
    /// Max-norm of the score accepted as a stationary point.
    pub qn_grad_tol: f64,
    pub sigma_floor: f64,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            n_starts: 8,
            em_max_iter: 500,
            em_tol: 1e-8,
            qn_max_iter: 500,
            qn_grad_tol: 1e-6,
            sigma_floor: 1e-6,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.n_starts == 0 {
            bad.push("n_starts must be at least 1".to_string());
        }
        for (name, v) in [
            ("em_tol", self.em_tol),
            ("qn_grad_tol", self.qn_grad_tol),
            ("sigma_floor", self.sigma_floor),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                bad.push(format!("{name} must be positive, got {v}"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }
}
