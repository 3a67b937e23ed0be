//! Independent checks on the estimation target.
//!
//! The pseudo-true weights are time averages over one long simulated path of
//! the transition rows `Q(s | Z_t, S_t)`. The KL check compares the expected
//! quasi-log-likelihood at that target against perturbed parameters on a
//! common path. The identifiability checks evaluate characteristic-function
//! ratios and the Gram matrix of component densities.

mod cf;
mod gram;
mod kl;
mod pseudo_true;

pub use cf::{cf_ratio_check, default_tau_grid, log_cf, log_cf_contour, CfCheckReport, CfFamily, CF_THRESHOLD};
pub use gram::{gram_matrix, linear_independence_check, probe_grid};
pub use kl::{kl_check, perturbation_grid, KlEntry, KlReport, Perturbation};
pub use pseudo_true::{pseudo_true_weights, PseudoTrueResult, N_BATCHES};

/// Standard error of an overall mean from equal-weight batch means.
pub(crate) fn batch_se(means: &[f64]) -> f64 {
    let n = means.len() as f64;
    if means.len() < 2 {
        return f64::NAN;
    }
    let m = means.iter().sum::<f64>() / n;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

/// Splits `0..n` into `k` contiguous batches; the last takes the remainder.
pub(crate) fn batch_bounds(n: usize, k: usize) -> Vec<(usize, usize)> {
    let size = n / k;
    (0..k)
        .map(|b| (b * size, if b + 1 == k { n } else { (b + 1) * size }))
        .collect()
}
