use nalgebra::{DMatrix, DVector};

use super::config::EstimatorConfig;
use crate::dgp::Sample;
use crate::error::{Error, Result};
use crate::linalg;
use crate::mixture::{Component, Design, MixtureParams, ModelSpec};

/// Outcome of one EM run.
#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub params: MixtureParams,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Average log-likelihood at the initial value (or the last re-seed)
    /// and after every iteration since.
    pub trace: Vec<f64>,
    pub degenerate: bool,
    pub notes: Vec<String>,
}

impl EmFit {
    pub fn max_decrease(&self) -> f64 {
        self.trace.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

/// A component whose total responsibility falls below this fraction of T has collapsed.
const COLLAPSE_FRACTION: f64 = 1e-8;

pub fn em_fit(
    sample: &Sample,
    spec: &ModelSpec,
    init: &MixtureParams,
    cfg: &EstimatorConfig,
) -> Result<EmFit> {
    spec.validate()?;
    cfg.validate()?;
    init.validate()?;
    if init.d() != spec.d {
        return Err(Error::Domain(format!(
            "initial value has {} components but the model has d = {}",
            init.d(),
            spec.d
        )));
    }
    let design = spec.design(sample)?;
    check_sample_size(&design, spec)?;
    Ok(em_on_design(&design, spec, init.clone(), cfg))
}

pub(crate) fn check_sample_size(design: &Design, spec: &ModelSpec) -> Result<()> {
    let sw = spec.switching;
    let per_regime = [sw.mu, sw.slope, sw.sigma].iter().filter(|&&f| f).count().max(1);
    let needed = spec.d * per_regime;
    if design.len() < needed {
        return Err(Error::Domain(format!(
            "{} usable observations, but {needed} are needed for d = {}",
            design.len(),
            spec.d
        )));
    }
    Ok(())
}

pub(crate) fn em_on_design(
    design: &Design,
    spec: &ModelSpec,
    mut theta: MixtureParams,
    cfg: &EstimatorConfig,
) -> EmFit {
    let n = design.len();
    let d = spec.d;
    let mut notes = Vec::new();
    let mut reseeded = vec![false; d];
    let mut degenerate = false;
    let (mut resp, mut ll) = design.responsibilities(&theta);
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.em_max_iter {
        let mass: Vec<f64> = (0..d)
            .map(|s| (0..n).map(|t| resp[t * d + s]).sum::<f64>())
            .collect();
        if let Some(s) = mass.iter().position(|&m| m < COLLAPSE_FRACTION * n as f64) {
            if reseeded[s] {
                notes.push(format!("component {} collapsed again and was abandoned", s + 1));
                degenerate = true;
                break;
            }
            reseeded[s] = true;
            notes.push(format!("component {} collapsed and was re-seeded", s + 1));
            reseed(design, spec, &mut theta, s);
            (resp, ll) = design.responsibilities(&theta);
            trace.clear();
            trace.push(ll);
            continue;
        }

        iterations += 1;
        let next = match m_step(design, spec, &theta, &resp, &mass, cfg.sigma_floor) {
            Ok((next, floored)) => {
                if floored && !degenerate {
                    notes.push("a scale hit the sigma floor".into());
                    degenerate = true;
                }
                next
            }
            Err(e) => {
                notes.push(format!("M-step failed: {e}"));
                degenerate = true;
                break;
            }
        };
        let (next_resp, next_ll) = design.responsibilities(&next);
        let gain = next_ll - ll;
        theta = next;
        resp = next_resp;
        ll = next_ll;
        trace.push(ll);
        if gain.abs() < cfg.em_tol {
            converged = true;
            break;
        }
    }
    EmFit {
        params: theta,
        loglik: ll,
        iterations,
        converged,
        trace,
        degenerate,
        notes,
    }
}

/// Moves component `s` onto the worst-fitted observation with the pooled
/// scale and an equal share of the weight.
fn reseed(design: &Design, spec: &ModelSpec, theta: &mut MixtureParams, s: usize) {
    let worst = (0..design.len())
        .min_by(|&a, &b| design.obs_loglik(theta, a).total_cmp(&design.obs_loglik(theta, b)))
        .unwrap_or(0);
    let (y, x) = (design.y()[worst], design.x()[worst]);
    let pooled = pooled_scale(design);
    let c = &mut theta.components[s];
    if spec.switching.mu {
        c.mu = y - c.gamma * x;
    }
    if spec.switching.sigma {
        c.sigma = pooled;
    }
    let d = spec.d as f64;
    for (k, w) in theta.weights.iter_mut().enumerate() {
        *w = if k == s { 1.0 / d } else { *w * (1.0 - 1.0 / d) };
    }
    let total: f64 = theta.weights.iter().sum();
    theta.weights.iter_mut().for_each(|w| *w /= total);
}

pub(crate) fn pooled_scale(design: &Design) -> f64 {
    let n = design.len() as f64;
    let mean = design.y().iter().sum::<f64>() / n;
    let var = design.y().iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    var.sqrt().max(1e-3)
}

/// Conditional maximization of the expected complete-data log-likelihood:
/// intercepts and slopes by one stacked weighted least-squares solve at the
/// current scales, then scales at the new means, then weights.
fn m_step(
    design: &Design,
    spec: &ModelSpec,
    theta: &MixtureParams,
    resp: &[f64],
    mass: &[f64],
    sigma_floor: f64,
) -> Result<(MixtureParams, bool)> {
    let d = spec.d;
    let n = design.len();
    let n_mu = if spec.switching.mu { d } else { 1 };
    let n_slope = if spec.switching.slope { d } else { 1 };
    let p = n_mu + n_slope;
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    for s in 0..d {
        let prec = 1.0 / (theta.components[s].sigma * theta.components[s].sigma);
        let im = spec.mu_index(s);
        let is = n_mu + if spec.switching.slope { s } else { 0 };
        let (mut a, mut b, mut c, mut ry, mut rxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for t in 0..n {
            let r = resp[t * d + s];
            let (y, x) = (design.y()[t], design.x()[t]);
            a += r;
            b += r * x;
            c += r * x * x;
            ry += r * y;
            rxy += r * x * y;
        }
        xtx[(im, im)] += prec * a;
        xtx[(im, is)] += prec * b;
        xtx[(is, im)] += prec * b;
        xtx[(is, is)] += prec * c;
        xty[im] += prec * ry;
        xty[is] += prec * rxy;
    }
    let beta = linalg::solve(xtx, &xty)?;

    let mut components: Vec<Component> = (0..d)
        .map(|s| Component {
            mu: beta[spec.mu_index(s)],
            gamma: beta[n_mu + if spec.switching.slope { s } else { 0 }],
            sigma: 0.0,
        })
        .collect();
    let mut ss = vec![0.0; d];
    for t in 0..n {
        let (y, x) = (design.y()[t], design.x()[t]);
        for (s, c) in components.iter().enumerate() {
            let e = y - c.mu - c.gamma * x;
            ss[s] += resp[t * d + s] * e * e;
        }
    }
    let mut floored = false;
    let mut floor = |v: f64| {
        let sd = v.sqrt();
        if !(sd >= sigma_floor) {
            floored = true;
            sigma_floor
        } else {
            sd
        }
    };
    if spec.switching.sigma {
        for s in 0..d {
            components[s].sigma = floor(ss[s] / mass[s]);
        }
    } else {
        let sigma = floor(ss.iter().sum::<f64>() / n as f64);
        components.iter_mut().for_each(|c| c.sigma = sigma);
    }
    let weights: Vec<f64> = mass.iter().map(|m| m / n as f64).collect();
    let total: f64 = weights.iter().sum();
    let weights = weights.iter().map(|w| w / total).collect();
    Ok((
        MixtureParams {
            components,
            weights,
        },
        floored,
    ))
}
