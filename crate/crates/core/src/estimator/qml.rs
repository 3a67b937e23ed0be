use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::bfgs::minimize;
use super::config::EstimatorConfig;
use super::em::{check_sample_size, em_on_design, pooled_scale, EmFit};
use crate::dgp::Sample;
use crate::error::{Error, Result};
use crate::mixture::{Component, Design, FreeVector, MixtureParams, ModelSpec};
use crate::streams::{rng_for_label, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate: bool,
    /// Largest drop of the average log-likelihood between EM iterations.
    pub max_decrease: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    /// Components sorted by ascending intercept.
    pub theta_hat: MixtureParams,
    pub free: FreeVector,
    pub spec: ModelSpec,
    pub param_names: Vec<String>,
    pub loglik: f64,
    pub converged: bool,
    pub max_abs_score: f64,
    pub em_iterations: usize,
    pub qn_iterations: usize,
    pub start_index: usize,
    pub starts: Vec<StartSummary>,
    /// Natural-scale sandwich covariance, rows in `param_names` order.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub std_errors: Option<Vec<f64>>,
    pub degenerate: bool,
    pub notes: Vec<String>,
}

/// Initial value for start `k`: intercepts at spread quantiles of the
/// pooled-slope residual, the pooled slope and scale, equal weights. Starts
/// after the first are jittered from their own random stream.
impl EstimationResult {
    /// Largest EM log-likelihood drop over all starts.
    pub fn em_max_decrease(&self) -> f64 {
        self.starts.iter().map(|s| s.max_decrease).fold(0.0, f64::max)
    }
}

pub fn start_values(design: &Design, spec: &ModelSpec, k: usize, seed: u64) -> MixtureParams {
    let n = design.len() as f64;
    let (y, x) = (design.y(), design.x());
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mut shifted: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - slope * a).collect();
    shifted.sort_unstable_by(f64::total_cmp);
    let resid_var = shifted
        .iter()
        .map(|v| (v - (my - slope * mx)).powi(2))
        .sum::<f64>()
        / n;
    let scale = if resid_var > 0.0 {
        resid_var.sqrt()
    } else {
        pooled_scale(design)
    };

    let d = spec.d;
    let quantile = |p: f64| {
        let pos = p * (shifted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        shifted[lo] + (pos - lo as f64) * (shifted[hi] - shifted[lo])
    };
    let mut mus: Vec<f64> = (0..d).map(|s| quantile((s as f64 + 0.5) / d as f64)).collect();
    let mut slopes = vec![slope; d];
    let mut sigmas = vec![scale; d];

    if k > 0 {
        let mut rng = rng_for_label(seed, Stream::EstimatorStart as u64 + k as u64 * 1024);
        let mut jitter = |v: &mut [f64], shared: bool, f: &dyn Fn(f64, f64) -> f64| {
            let first: f64 = rng.sample(StandardNormal);
            for (i, x) in v.iter_mut().enumerate() {
                let e = if shared || i == 0 { first } else { rng.sample(StandardNormal) };
                *x = f(*x, e);
            }
        };
        jitter(&mut mus, !spec.switching.mu, &|m, e| m + 0.5 * scale * e);
        jitter(&mut slopes, !spec.switching.slope, &|b, e| b + 0.25 * (b.abs() + 0.1) * e);
        jitter(&mut sigmas, !spec.switching.sigma, &|s, e| s * (0.25 * e).exp());
    }
    if !spec.switching.mu {
        mus = vec![mus[0]; d];
    }
    MixtureParams {
        components: (0..d)
            .map(|s| Component {
                mu: mus[s],
                gamma: slopes[s],
                sigma: sigmas[s],
            })
            .collect(),
        weights: vec![1.0 / d as f64; d],
    }
}

fn sort_by_intercept(theta: &MixtureParams) -> MixtureParams {
    let mut perm: Vec<usize> = (0..theta.d()).collect();
    perm.sort_by(|&a, &b| {
        let (ca, cb) = (&theta.components[a], &theta.components[b]);
        ca.mu
            .total_cmp(&cb.mu)
            .then(ca.gamma.total_cmp(&cb.gamma))
            .then(ca.sigma.total_cmp(&cb.sigma))
            .then(a.cmp(&b))
    });
    theta.permuted(&perm)
}

/// Approximate maximizer of the quasi-log-likelihood.
pub fn qml_estimate(sample: &Sample, spec: &ModelSpec, cfg: &EstimatorConfig) -> Result<EstimationResult> {
    spec.validate()?;
    cfg.validate()?;
    let design = spec.design(sample)?;
    check_sample_size(&design, spec)?;

    let fits: Vec<EmFit> = (0..cfg.n_starts)
        .map(|k| em_on_design(&design, spec, start_values(&design, spec, k, cfg.seed), cfg))
        .collect();
    let mut best: Option<usize> = None;
    for (k, fit) in fits.iter().enumerate() {
        if fit.degenerate || !fit.loglik.is_finite() {
            continue;
        }
        if best.is_none_or(|b| fit.loglik > fits[b].loglik) {
            best = Some(k);
        }
    }
    let Some(start_index) = best else {
        return Err(Error::AllStartsDegenerate(
            fits.iter()
                .enumerate()
                .map(|(k, f)| format!("start {k}: loglik {} after {} iterations; {}", f.loglik, f.iterations, f.notes.join(", ")))
                .collect(),
        ));
    };
    let em_best = &fits[start_index];
    let mut notes = em_best.notes.clone();

    let x0 = spec.encode(&em_best.params)?;
    let outcome = minimize(
        |x| {
            let theta = spec.decode_unchecked(x);
            let ll = design.loglik(&theta);
            let g = design.score(spec, &theta);
            (-ll, g.into_iter().map(|v| -v).collect())
        },
        &x0.0,
        cfg.qn_grad_tol,
        cfg.qn_max_iter,
    );
    let refined = spec.decode_unchecked(&outcome.x);
    let theta = if design.loglik(&refined) >= em_best.loglik {
        refined
    } else {
        notes.push("quasi-Newton refinement did not improve on EM".into());
        em_best.params.clone()
    };
    let theta = sort_by_intercept(&theta);
    let free = spec.encode(&theta)?;
    let loglik = design.loglik(&theta);
    let max_abs_score = design
        .score(spec, &theta)
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let converged = max_abs_score <= cfg.qn_grad_tol;
    if !converged {
        notes.push(format!(
            "score max-norm {max_abs_score:.3e} above tolerance {:.1e}",
            cfg.qn_grad_tol
        ));
    }
    let mut degenerate = false;
    if theta.components.iter().any(|c| c.sigma <= 10.0 * cfg.sigma_floor) {
        notes.push("a fitted scale is at the sigma floor".into());
        degenerate = true;
    }
    if theta.weights.iter().any(|&w| w * (design.len() as f64) < 1.0) {
        notes.push("a fitted weight carries less than one observation".into());
        degenerate = true;
    }

    Ok(EstimationResult {
        theta_hat: theta,
        free,
        spec: *spec,
        param_names: spec.param_names(),
        loglik,
        converged,
        max_abs_score,
        em_iterations: em_best.iterations,
        qn_iterations: outcome.iterations,
        start_index,
        starts: fits
            .iter()
            .map(|f| StartSummary {
                loglik: f.loglik,
                iterations: f.iterations,
                converged: f.converged,
                degenerate: f.degenerate,
                max_decrease: f.max_decrease(),
            })
            .collect(),
        covariance: None,
        std_errors: None,
        degenerate,
        notes,
    })
}
