use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{batch_bounds, batch_se, pseudo_true::N_BATCHES};
use crate::dgp::{HmmDgpParams, OutcomeKind, PathGenerator, DEFAULT_BURN_IN};
use crate::error::{Error, Result};
use crate::mixture::{Design, MixtureParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub label: String,
    pub theta: MixtureParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlEntry {
    pub label: String,
    /// `M(theta_star) - M(theta)` on the common path.
    pub diff: f64,
    /// Batch-means standard error of the paired difference.
    pub se: f64,
}

impl KlEntry {
    pub fn dominated(&self, n_se: f64) -> bool {
        self.diff > n_se * self.se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlReport {
    /// Average quasi-log-likelihood at `theta_star`.
    pub m_star: f64,
    pub m_star_se: f64,
    pub n_sim: usize,
    pub seed: u64,
    pub entries: Vec<KlEntry>,
}

impl KlReport {
    pub fn all_dominated(&self, n_se: f64) -> bool {
        self.entries.iter().all(|e| e.dominated(n_se))
    }
}

/// The twelve one-coordinate moves around `theta_star`: ±0.25 on the first
/// intercept, second slope, first scale and first weight, ±0.5 on the second
/// intercept and first slope.
pub fn perturbation_grid(theta_star: &MixtureParams) -> Result<Vec<Perturbation>> {
    if theta_star.d() != 2 {
        return Err(Error::Domain("the perturbation grid is defined for two regimes".into()));
    }
    type Edit = fn(&mut MixtureParams, f64);
    let moves: [(&str, f64, Edit); 6] = [
        ("mu1", 0.25, |t, h| t.components[0].mu += h),
        ("mu2", 0.5, |t, h| t.components[1].mu += h),
        ("gamma1", 0.5, |t, h| t.components[0].gamma += h),
        ("gamma2", 0.25, |t, h| t.components[1].gamma += h),
        ("sigma1", 0.25, |t, h| t.components[0].sigma += h),
        ("weight1", 0.25, |t, h| {
            t.weights[0] += h;
            t.weights[1] = 1.0 - t.weights[0];
        }),
    ];
    let mut out = Vec::with_capacity(12);
    for (name, step, edit) in moves {
        for sign in [1.0, -1.0] {
            let mut theta = theta_star.clone();
            edit(&mut theta, sign * step);
            theta.validate()?;
            out.push(Perturbation {
                label: format!("{name}{}{step}", if sign > 0.0 { "+" } else { "-" }),
                theta,
            });
        }
    }
    Ok(out)
}

/// Compares `M(theta) = E log p_theta(Y | W)` at `theta_star` with each
/// perturbation on one simulated path of length `n_sim`.
pub fn kl_check(
    dgp: &HmmDgpParams,
    theta_star: &MixtureParams,
    perturbations: &[Perturbation],
    n_sim: usize,
    seed: u64,
) -> Result<KlReport> {
    if n_sim < 10 * N_BATCHES {
        return Err(Error::Domain(format!("n_sim must be at least {}, got {n_sim}", 10 * N_BATCHES)));
    }
    let d = dgp.d();
    for (label, theta) in std::iter::once(("theta_star", theta_star))
        .chain(perturbations.iter().map(|p| (p.label.as_str(), &p.theta)))
    {
        theta
            .validate()
            .map_err(|e| Error::Validation(vec![format!("{label}: {e}")]))?;
        if theta.d() != d {
            return Err(Error::Validation(vec![format!(
                "{label}: {} components, process has {d}",
                theta.d()
            )]));
        }
    }

    let mut gen = PathGenerator::new(dgp, OutcomeKind::Hmm, seed)?;
    for _ in 0..DEFAULT_BURN_IN {
        gen.step();
    }
    let mut y = Vec::with_capacity(n_sim);
    let mut w = Vec::with_capacity(n_sim);
    for _ in 0..n_sim {
        let st = gen.step();
        y.push(st.y);
        w.push(st.w);
    }
    let design = Design::from_pairs(y, w)?;
    let star: Vec<f64> = (0..n_sim).map(|t| design.obs_loglik(theta_star, t)).collect();
    let bounds = batch_bounds(n_sim, N_BATCHES);
    let batch_means = |v: &dyn Fn(usize) -> f64| -> (f64, f64) {
        let means: Vec<f64> = bounds
            .iter()
            .map(|&(lo, hi)| (lo..hi).map(v).sum::<f64>() / (hi - lo) as f64)
            .collect();
        let total = bounds
            .iter()
            .zip(&means)
            .map(|(&(lo, hi), m)| m * (hi - lo) as f64)
            .sum::<f64>()
            / n_sim as f64;
        (total, batch_se(&means))
    };
    let (m_star, m_star_se) = batch_means(&|t| star[t]);
    let entries = perturbations
        .par_iter()
        .map(|p| {
            let other: Vec<f64> = (0..n_sim).map(|t| design.obs_loglik(&p.theta, t)).collect();
            let (diff, se) = batch_means(&|t| star[t] - other[t]);
            KlEntry {
                label: p.label.clone(),
                diff,
                se,
            }
        })
        .collect();
    Ok(KlReport {
        m_star,
        m_star_se,
        n_sim,
        seed,
        entries,
    })
}
