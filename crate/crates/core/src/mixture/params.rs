use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dgp::{RegimeOutcome, Sample};
use crate::error::{Error, Result};

use super::likelihood::Design;

/// Bounds applied to every decoded scale.
pub const SIGMA_MIN: f64 = 1e-6;
pub const SIGMA_MAX: f64 = 1e6;

/// Outcome-equation coefficients of one mixture component. `gamma` is the
/// slope on W in the HMM form and the lag coefficient in the MSAR form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mu: f64,
    pub gamma: f64,
    pub sigma: f64,
}

impl From<RegimeOutcome> for Component {
    fn from(o: RegimeOutcome) -> Self {
        Self {
            mu: o.mu,
            gamma: o.gamma,
            sigma: o.sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub components: Vec<Component>,
    pub weights: Vec<f64>,
}

impl MixtureParams {
    pub fn new(components: Vec<Component>, weights: Vec<f64>) -> Result<Self> {
        let p = Self {
            components,
            weights,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn d(&self) -> usize {
        self.components.len()
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.components.is_empty() {
            bad.push("mixture needs at least one component".to_string());
        }
        if self.weights.len() != self.components.len() {
            bad.push(format!(
                "{} weights for {} components",
                self.weights.len(),
                self.components.len()
            ));
        }
        for (s, c) in self.components.iter().enumerate() {
            if !(c.sigma > 0.0) || !c.sigma.is_finite() {
                bad.push(format!("component {} has sigma = {}", s + 1, c.sigma));
            }
            if !c.mu.is_finite() || !c.gamma.is_finite() {
                bad.push(format!("component {} has non-finite coefficients", s + 1));
            }
        }
        if self.weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            bad.push(format!("weights must be strictly positive, got {:?}", self.weights));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            bad.push(format!("weights sum to {total}, not 1"));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// Relabels components: component `k` of the result is component
    /// `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            components: perm.iter().map(|&k| self.components[k]).collect(),
            weights: perm.iter().map(|&k| self.weights[k]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeForm {
    /// Regressor is the contemporaneous covariate W.
    Hmm,
    /// Regressor is the lagged outcome; the first observation is conditioned on.
    Msar,
}

/// Which coefficients differ across regimes; the others are shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchingFlags {
    pub mu: bool,
    pub slope: bool,
    pub sigma: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub d: usize,
    pub form: OutcomeForm,
    pub switching: SwitchingFlags,
}

/// Unconstrained coordinates of a [`MixtureParams`] under a [`ModelSpec`]:
/// intercepts, slopes, log-scales, then `d - 1` log-odds of the weights
/// against the last component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeVector(pub Vec<f64>);

impl FreeVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl ModelSpec {
    /// Every outcome coefficient regime-specific.
    pub fn hmm(d: usize) -> Self {
        Self {
            d,
            form: OutcomeForm::Hmm,
            switching: SwitchingFlags {
                mu: true,
                slope: true,
                sigma: true,
            },
        }
    }

    /// Switching intercepts and scales with a shared lag coefficient.
    pub fn msar(d: usize) -> Self {
        Self {
            d,
            form: OutcomeForm::Msar,
            switching: SwitchingFlags {
                mu: true,
                slope: false,
                sigma: true,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Validation(vec!["model needs d >= 1".into()]));
        }
        let sw = self.switching;
        if self.d >= 2 && !(sw.mu || sw.slope || sw.sigma) {
            return Err(Error::Validation(vec![
                "at least one coefficient must be regime-specific when d >= 2".into(),
            ]));
        }
        Ok(())
    }

    fn block(&self, switching: bool) -> usize {
        if switching {
            self.d
        } else {
            1
        }
    }

    pub(crate) fn mu_index(&self, s: usize) -> usize {
        if self.switching.mu {
            s
        } else {
            0
        }
    }

    pub(crate) fn slope_index(&self, s: usize) -> usize {
        self.block(self.switching.mu) + if self.switching.slope { s } else { 0 }
    }

    pub(crate) fn log_sigma_index(&self, s: usize) -> usize {
        self.block(self.switching.mu)
            + self.block(self.switching.slope)
            + if self.switching.sigma { s } else { 0 }
    }

    pub(crate) fn logit_offset(&self) -> usize {
        self.block(self.switching.mu) + self.block(self.switching.slope) + self.block(self.switching.sigma)
    }

    /// Number of free parameters `q`.
    pub fn dim(&self) -> usize {
        self.logit_offset() + self.d - 1
    }

    /// Names of the natural-scale parameters, in free-vector order.
    pub fn param_names(&self) -> Vec<String> {
        let slope = match self.form {
            OutcomeForm::Hmm => "gamma",
            OutcomeForm::Msar => "phi",
        };
        let mut names = Vec::with_capacity(self.dim());
        for (flag, stem) in [
            (self.switching.mu, "mu"),
            (self.switching.slope, slope),
            (self.switching.sigma, "sigma"),
        ] {
            if flag {
                names.extend((1..=self.d).map(|s| format!("{stem}{s}")));
            } else {
                names.push(stem.to_string());
            }
        }
        names.extend((1..self.d).map(|s| format!("weight{s}")));
        names
    }

    pub fn design(&self, sample: &Sample) -> Result<Design> {
        Design::new(sample, self.form)
    }

    fn check_shape(&self, theta: &MixtureParams) -> Result<()> {
        if theta.d() != self.d {
            return Err(Error::Domain(format!(
                "parameter has {} components but the model has d = {}",
                theta.d(),
                self.d
            )));
        }
        Ok(())
    }

    pub fn encode(&self, theta: &MixtureParams) -> Result<FreeVector> {
        self.check_shape(theta)?;
        theta.validate()?;
        let shared = |flag: bool, get: fn(&Component) -> f64, name: &str| -> Result<()> {
            if !flag && theta.components.iter().any(|c| get(c) != get(&theta.components[0])) {
                return Err(Error::Domain(format!(
                    "{name} is shared across regimes in this model but differs in the parameter"
                )));
            }
            Ok(())
        };
        shared(self.switching.mu, |c| c.mu, "mu")?;
        shared(self.switching.slope, |c| c.gamma, "slope")?;
        shared(self.switching.sigma, |c| c.sigma, "sigma")?;

        let mut v = vec![0.0; self.dim()];
        for (s, c) in theta.components.iter().enumerate() {
            v[self.mu_index(s)] = c.mu;
            v[self.slope_index(s)] = c.gamma;
            v[self.log_sigma_index(s)] = c.sigma.ln();
        }
        let last = theta.weights[self.d - 1].ln();
        let off = self.logit_offset();
        for s in 0..self.d - 1 {
            v[off + s] = theta.weights[s].ln() - last;
        }
        Ok(FreeVector(v))
    }

    pub fn decode(&self, free: &FreeVector) -> Result<MixtureParams> {
        if free.len() != self.dim() {
            return Err(Error::Domain(format!(
                "free vector has length {} but the model needs {}",
                free.len(),
                self.dim()
            )));
        }
        if free.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("free vector has non-finite entries".into()));
        }
        Ok(self.decode_unchecked(&free.0))
    }

    pub(crate) fn decode_unchecked(&self, v: &[f64]) -> MixtureParams {
        let components = (0..self.d)
            .map(|s| Component {
                mu: v[self.mu_index(s)],
                gamma: v[self.slope_index(s)],
                sigma: v[self.log_sigma_index(s)]
                    .clamp(SIGMA_MIN.ln(), SIGMA_MAX.ln())
                    .exp(),
            })
            .collect();
        MixtureParams {
            components,
            weights: softmax_anchored(&v[self.logit_offset()..]),
        }
    }

    /// Natural-scale parameter vector in [`param_names`](Self::param_names) order.
    pub fn natural(&self, theta: &MixtureParams) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        for (s, c) in theta.components.iter().enumerate() {
            v[self.mu_index(s)] = c.mu;
            v[self.slope_index(s)] = c.gamma;
            v[self.log_sigma_index(s)] = c.sigma;
        }
        let off = self.logit_offset();
        v[off..].copy_from_slice(&theta.weights[..self.d - 1]);
        v
    }

    /// Jacobian of [`natural`](Self::natural) ∘ decode with respect to the
    /// free coordinates.
    pub fn decode_jacobian(&self, free: &FreeVector) -> Result<DMatrix<f64>> {
        let theta = self.decode(free)?;
        let q = self.dim();
        let off = self.logit_offset();
        let mut j = DMatrix::zeros(q, q);
        for i in 0..off {
            j[(i, i)] = 1.0;
        }
        for s in 0..self.d {
            let k = self.log_sigma_index(s);
            let inside = free.0[k] > SIGMA_MIN.ln() && free.0[k] < SIGMA_MAX.ln();
            j[(k, k)] = if inside { theta.components[s].sigma } else { 0.0 };
        }
        let w = &theta.weights;
        for a in 0..self.d - 1 {
            for b in 0..self.d - 1 {
                let delta = if a == b { 1.0 } else { 0.0 };
                j[(off + a, off + b)] = w[a] * (delta - w[b]);
            }
        }
        Ok(j)
    }
}

/// Softmax over `logits` plus an implicit zero logit for the last class.
fn softmax_anchored(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(0.0_f64, f64::max);
    let mut w: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    w.push((-max).exp());
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x = (*x / total).max(f64::MIN_POSITIVE);
    }
    w
}
