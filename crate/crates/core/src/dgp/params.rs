use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Outcome-equation coefficients of one regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeOutcome {
    pub mu: f64,
    pub gamma: f64,
    pub sigma: f64,
}

/// Score coefficients `alpha + beta * z` of one (source, destination) pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LogitCoef {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    /// Multinomial logit over destinations; the logistic CDF when `d = 2`.
    #[default]
    Logistic,
    /// Standard normal CDF of the stay-minus-leave score. Two regimes only.
    Probit,
}

/// Covariate-dependent transition law `Q(. | z, from)`.
///
/// Row `from` puts mass proportional to `exp(alpha[from][to] + beta[from][to] * z)`
/// on destination `to`. With two regimes and zero coefficients on the
/// off-diagonal, the stay probability is `G(alpha + beta * z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSpec {
    pub d: usize,
    /// `coefficients[from][to]`.
    pub coefficients: Vec<Vec<LogitCoef>>,
    #[serde(default)]
    pub link: Link,
}

impl TransitionSpec {
    /// Two-state chain with stay probability `G(alpha[s] + beta[s] * z)`.
    pub fn two_state(alpha: [f64; 2], beta: [f64; 2], link: Link) -> Self {
        let mut coefficients = vec![vec![LogitCoef::default(); 2]; 2];
        for s in 0..2 {
            coefficients[s][s] = LogitCoef {
                alpha: alpha[s],
                beta: beta[s],
            };
        }
        Self {
            d: 2,
            coefficients,
            link,
        }
    }

    fn violations(&self, out: &mut Vec<String>) {
        if self.d < 2 {
            out.push(format!("transition.d must be at least 2, got {}", self.d));
        }
        if self.coefficients.len() != self.d
            || self.coefficients.iter().any(|row| row.len() != self.d)
        {
            out.push(format!(
                "transition.coefficients must be a {0}x{0} table",
                self.d
            ));
        }
        if self
            .coefficients
            .iter()
            .flatten()
            .any(|c| !c.alpha.is_finite() || !c.beta.is_finite())
        {
            out.push("transition coefficients must be finite".into());
        }
        if self.link == Link::Probit && self.d != 2 {
            out.push("probit link is only defined for two regimes".into());
        }
    }

    /// Distribution of the next regime given the previous one and the lagged
    /// covariate. `from` is a 0-based regime index.
    pub fn row(&self, z: f64, from: usize) -> Result<Vec<f64>> {
        if !z.is_finite() {
            return Err(Error::Domain(format!("transition covariate must be finite, got {z}")));
        }
        if from >= self.d {
            return Err(Error::Domain(format!(
                "source regime {from} out of range for d = {}",
                self.d
            )));
        }
        let mut row = vec![0.0; self.d];
        self.fill_row(z, from, &mut row);
        Ok(row)
    }

    /// Unchecked variant of [`row`](Self::row) for hot loops.
    pub(crate) fn fill_row(&self, z: f64, from: usize, row: &mut [f64]) {
        let coefs = &self.coefficients[from];
        match self.link {
            Link::Logistic => {
                let mut max = f64::NEG_INFINITY;
                for (r, c) in row.iter_mut().zip(coefs) {
                    *r = c.alpha + c.beta * z;
                    max = max.max(*r);
                }
                let mut total = 0.0;
                for r in row.iter_mut() {
                    *r = (*r - max).exp();
                    total += *r;
                }
                for r in row.iter_mut() {
                    *r = (*r / total).max(f64::MIN_POSITIVE);
                }
            }
            Link::Probit => {
                let other = 1 - from;
                let score = coefs[from].alpha + coefs[from].beta * z
                    - (coefs[other].alpha + coefs[other].beta * z);
                let stay = normal_cdf(score);
                let leave = normal_cdf(-score);
                row[from] = stay.max(f64::MIN_POSITIVE);
                row[other] = leave.max(f64::MIN_POSITIVE);
            }
        }
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Gaussian AR(1) law `x_t = intercept + slope * x_{t-1} + noise_sd * u_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArLaw {
    pub intercept: f64,
    pub slope: f64,
    pub noise_sd: f64,
}

impl ArLaw {
    pub fn stationary_mean(&self) -> f64 {
        self.intercept / (1.0 - self.slope)
    }

    pub fn stationary_variance(&self) -> f64 {
        self.noise_sd * self.noise_sd / (1.0 - self.slope * self.slope)
    }

    fn violations(&self, name: &str, out: &mut Vec<String>) {
        if !(self.slope.abs() < 1.0) {
            out.push(format!("{name}.slope must satisfy |slope| < 1, got {}", self.slope));
        }
        if !(self.noise_sd > 0.0) || !self.noise_sd.is_finite() {
            out.push(format!("{name}.noise_sd must be positive, got {}", self.noise_sd));
        }
        if !self.intercept.is_finite() {
            out.push(format!("{name}.intercept must be finite"));
        }
    }
}

/// Correlations of the outcome noise with the Z noise (`rho`) and the W
/// noise (`omega`). The Z and W noises are uncorrelated with each other.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseCorrelation {
    pub rho: f64,
    pub omega: f64,
}

impl NoiseCorrelation {
    fn violations(&self, out: &mut Vec<String>) {
        if !(self.rho.abs() < 1.0) {
            out.push(format!("noise.rho must lie in (-1, 1), got {}", self.rho));
        }
        if !(self.omega.abs() < 1.0) {
            out.push(format!("noise.omega must lie in (-1, 1), got {}", self.omega));
        }
        if !(self.rho * self.rho + self.omega * self.omega < 1.0) {
            out.push(format!(
                "noise correlation matrix is not positive definite (rho^2 + omega^2 = {})",
                self.rho * self.rho + self.omega * self.omega
            ));
        }
    }

    /// Loading of the idiosyncratic outcome shock in the Cholesky factor.
    pub(crate) fn residual_loading(&self) -> f64 {
        (1.0 - self.rho * self.rho - self.omega * self.omega).sqrt()
    }
}

/// Full description of the data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmDgpParams {
    pub outcomes: Vec<RegimeOutcome>,
    pub transition: TransitionSpec,
    pub z_law: ArLaw,
    pub w_law: ArLaw,
    #[serde(default)]
    pub noise: NoiseCorrelation,
    /// Lag coefficient of the Markov-switching autoregression; `None` for the HMM.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ar_coefficient: Option<f64>,
}

impl HmmDgpParams {
    /// The two-regime HMM design of the simulation study.
    pub fn paper_hmm(rho: f64, omega: f64) -> Self {
        let ar = ArLaw {
            intercept: 0.2,
            slope: 0.8,
            noise_sd: 1.0,
        };
        Self {
            outcomes: vec![
                RegimeOutcome {
                    mu: 1.0,
                    gamma: 0.5,
                    sigma: 1.0,
                },
                RegimeOutcome {
                    mu: -1.0,
                    gamma: 1.0,
                    sigma: 1.0,
                },
            ],
            transition: TransitionSpec::two_state([2.0, 2.0], [0.5, -0.5], Link::Logistic),
            z_law: ar,
            w_law: ar,
            noise: NoiseCorrelation { rho, omega },
            ar_coefficient: None,
        }
    }

    /// The Markov-switching autoregression design: HMM design with the W
    /// slope dropped and lag coefficient `phi`.
    pub fn paper_msar(rho: f64, phi: f64) -> Self {
        let mut p = Self::paper_hmm(rho, 0.0);
        for o in &mut p.outcomes {
            o.gamma = 0.0;
        }
        p.ar_coefficient = Some(phi);
        p
    }

    pub fn d(&self) -> usize {
        self.transition.d
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut out = Vec::new();
        self.transition.violations(&mut out);
        if self.outcomes.len() != self.transition.d {
            out.push(format!(
                "{} outcome equations given for d = {}",
                self.outcomes.len(),
                self.transition.d
            ));
        }
        for (s, o) in self.outcomes.iter().enumerate() {
            if !(o.sigma > 0.0) || !o.sigma.is_finite() {
                out.push(format!("outcomes[{s}].sigma must be positive, got {}", o.sigma));
            }
            if !o.mu.is_finite() || !o.gamma.is_finite() {
                out.push(format!("outcomes[{s}] coefficients must be finite"));
            }
        }
        self.z_law.violations("z_law", &mut out);
        self.w_law.violations("w_law", &mut out);
        self.noise.violations(&mut out);
        if let Some(phi) = self.ar_coefficient {
            if !phi.is_finite() {
                out.push("ar_coefficient must be finite".into());
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(out))
        }
    }

    /// Short content hash recorded in simulated samples' provenance.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("parameters serialize");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_row_closed_form() {
        let spec = TransitionSpec::two_state([2.0, 2.0], [0.5, -0.5], Link::Logistic);
        let row = spec.row(0.0, 0).unwrap();
        let stay = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((row[0] - stay).abs() < 1e-15);
        assert!((row[0] - 0.880797).abs() < 1e-6);
        assert!((row[1] - 0.119203).abs() < 1e-6);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_slope_row_ignores_covariate() {
        let spec = TransitionSpec::two_state([2.0, 2.0], [0.0, 0.0], Link::Logistic);
        let a = spec.row(-3.0, 0).unwrap();
        let b = spec.row(40.0, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exponent_exactly_zero_gives_half() {
        let spec = TransitionSpec::two_state([2.0, 2.0], [0.5, -0.5], Link::Logistic);
        let row = spec.row(4.0, 1).unwrap();
        assert_eq!(row[1], 0.5);
        assert_eq!(row[0], 0.5);
    }

    #[test]
    fn row_rejects_bad_inputs() {
        let spec = TransitionSpec::two_state([2.0, 2.0], [0.5, -0.5], Link::Logistic);
        assert!(matches!(spec.row(f64::NAN, 0), Err(Error::Domain(_))));
        assert!(matches!(spec.row(f64::INFINITY, 0), Err(Error::Domain(_))));
        assert!(matches!(spec.row(0.0, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn probit_row_is_normal_cdf() {
        let spec = TransitionSpec::two_state([0.0, 1.0], [1.0, 0.0], Link::Probit);
        let row = spec.row(0.0, 0).unwrap();
        assert!((row[0] - 0.5).abs() < 1e-7);
        let row = spec.row(0.0, 1).unwrap();
        assert!((row[1] - 0.841_344_746_068_543).abs() < 1e-9, "{}", row[1]);
    }

    #[test]
    fn validation_lists_every_violation() {
        let mut p = HmmDgpParams::paper_hmm(0.9, 0.9);
        p.outcomes[0].sigma = 0.0;
        p.z_law.slope = 1.0;
        let Err(Error::Validation(v)) = p.validate() else {
            panic!("expected validation error");
        };
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn paper_designs_are_valid() {
        HmmDgpParams::paper_hmm(0.65, 0.65).validate().unwrap();
        HmmDgpParams::paper_msar(0.8, 0.9).validate().unwrap();
    }
}
