use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dgp::Sample;
use crate::error::{Error, Result};
use crate::estimator::EstimationResult;
use crate::linalg;
use crate::mixture::{Design, FreeVector, ModelSpec};

use super::hac::{hac_middle, HacConfig};

const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichResult {
    /// Natural-scale covariance, rows in `param_names` order.
    pub covariance: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    /// Covariance of the free coordinates.
    pub free_covariance: Vec<Vec<f64>>,
    pub bandwidth: f64,
    pub lags: usize,
    pub hessian_condition: f64,
    pub psd_floored: bool,
    pub truncated: bool,
    pub warnings: Vec<String>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn sandwich_on_design(
    design: &Design,
    spec: &ModelSpec,
    free: &FreeVector,
    cfg: &HacConfig,
) -> Result<SandwichResult> {
    let theta = spec.decode(free)?;
    let a = design.hessian(spec, free);
    let cond = linalg::condition_number(&a);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::Numerical(format!(
            "Hessian is numerically singular (condition number {cond:.3e}); \
             check convergence of the fit and whether a component degenerated"
        )));
    }
    let a_inv = linalg::inverse(&a)?;
    let scores = design.score_contributions(spec, &theta);
    let hac = hac_middle(&scores, cfg)?;
    let t = design.len() as f64;
    let mut v = &a_inv * &hac.matrix * &a_inv / t;
    linalg::symmetrize(&mut v);
    let j = spec.decode_jacobian(free)?;
    let mut cov = &j * &v * j.transpose();
    linalg::symmetrize(&mut cov);

    let mut warnings = hac.warnings;
    let mut psd_floored = hac.psd_floored;
    let top = cov.abs().max();
    if linalg::min_eigenvalue(&cov) < -1e-12 * top {
        cov = linalg::floor_psd(&cov).0;
        psd_floored = true;
        warnings.push("negative eigenvalues of the covariance were floored at zero".into());
    }
    for i in 0..cov.nrows() {
        cov[(i, i)] = cov[(i, i)].max(0.0);
    }
    let std_errors = cov.diagonal().iter().map(|v| v.sqrt()).collect();
    Ok(SandwichResult {
        covariance: rows(&cov),
        std_errors,
        free_covariance: rows(&v),
        bandwidth: hac.bandwidth,
        lags: hac.lags,
        hessian_condition: cond,
        psd_floored,
        truncated: hac.truncated,
        warnings,
    })
}

/// Sandwich covariance of a QML estimate on the natural parameter scale,
/// with weights mapped from the log-odds by the delta method.
pub fn sandwich_cov(
    free: &FreeVector,
    sample: &Sample,
    spec: &ModelSpec,
    cfg: &HacConfig,
) -> Result<SandwichResult> {
    spec.validate()?;
    if free.len() != spec.dim() {
        return Err(Error::Domain(format!(
            "free vector has {} entries, model needs {}",
            free.len(),
            spec.dim()
        )));
    }
    let design = spec.design(sample)?;
    sandwich_on_design(&design, spec, free, cfg)
}

/// Fills `covariance` and `std_errors` of a fit in place. Failures become a
/// note on the result and leave both fields empty.
pub fn attach_standard_errors(result: &mut EstimationResult, sample: &Sample, cfg: &HacConfig) -> Option<SandwichResult> {
    match sandwich_cov(&result.free, sample, &result.spec, cfg) {
        Ok(s) => {
            result.covariance = Some(s.covariance.clone());
            result.std_errors = Some(s.std_errors.clone());
            result.notes.extend(s.warnings.iter().cloned());
            Some(s)
        }
        Err(e) => {
            result.covariance = None;
            result.std_errors = None;
            result.notes.push(format!("standard errors unavailable: {e}"));
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::Bandwidth;
    use crate::mixture::{Component, MixtureParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn regression(t: usize, seed: u64) -> (Design, f64, f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..t).map(|_| 1.0 + normal(&mut rng) * 2.0_f64.sqrt()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|xi| 0.3 + 0.7 * xi + 1.5 * normal(&mut rng))
            .collect();
        // OLS and ML scale
        let n = t as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let b = sxy / sxx;
        let a = my - b * mx;
        let s2 = x.iter().zip(&y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum::<f64>() / n;
        (Design::from_pairs(y, x).unwrap(), a, b, s2.sqrt())
    }

    #[test]
    fn single_regime_matches_classical_ml() {
        let t = 5000;
        let (design, a, b, s) = regression(t, 11);
        let spec = ModelSpec::hmm(1);
        let theta = MixtureParams::new(vec![Component { mu: a, gamma: b, sigma: s }], vec![1.0]).unwrap();
        let free = spec.encode(&theta).unwrap();
        let cfg = HacConfig {
            bandwidth: Bandwidth::Fixed(0.0),
            ..Default::default()
        };
        let res = sandwich_on_design(&design, &spec, &free, &cfg).unwrap();

        let n = t as f64;
        let x = design.x();
        let sx: f64 = x.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let det = n * sxx - sx * sx;
        let var_a = s * s * sxx / det;
        let var_b = s * s * n / det;
        let var_s = s * s / (2.0 * n);
        let classical = [var_a.sqrt(), var_b.sqrt(), var_s.sqrt()];
        for (k, c) in classical.iter().enumerate() {
            let rel = (res.std_errors[k] - c).abs() / c;
            assert!(rel < 0.02, "coordinate {k}: {} vs {c}", res.std_errors[k]);
        }
    }

    fn two_regime_fit() -> (Design, ModelSpec, FreeVector) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut y = Vec::new();
        let mut x = Vec::new();
        for t in 0..2000 {
            let xi = normal(&mut rng);
            let e = normal(&mut rng);
            let (m, g, s) = if t % 3 == 0 { (2.0, 0.5, 0.7) } else { (-1.0, 1.0, 1.2) };
            x.push(xi);
            y.push(m + g * xi + s * e);
        }
        let design = Design::from_pairs(y, x).unwrap();
        let spec = ModelSpec::hmm(2);
        let theta = MixtureParams::new(
            vec![
                Component { mu: -1.0, gamma: 1.0, sigma: 1.2 },
                Component { mu: 2.0, gamma: 0.5, sigma: 0.7 },
            ],
            vec![2.0 / 3.0, 1.0 / 3.0],
        )
        .unwrap();
        (design, spec, spec.encode(&theta).unwrap())
    }

    #[test]
    fn covariance_is_symmetric_with_nonnegative_diagonal() {
        let (design, spec, free) = two_regime_fit();
        let res = sandwich_on_design(&design, &spec, &free, &HacConfig::default()).unwrap();
        let q = spec.dim();
        for i in 0..q {
            assert!(res.covariance[i][i] >= 0.0);
            for j in 0..q {
                assert_eq!(res.covariance[i][j], res.covariance[j][i]);
            }
        }
        assert!(res.std_errors.iter().all(|s| s.is_finite() && *s > 0.0));
    }

    #[test]
    fn log_scale_errors_map_through_sigma() {
        let (design, spec, free) = two_regime_fit();
        let res = sandwich_on_design(&design, &spec, &free, &HacConfig::default()).unwrap();
        let theta = spec.decode(&free).unwrap();
        for s in 0..2 {
            let k = spec.log_sigma_index(s);
            let free_se = res.free_covariance[k][k].sqrt();
            let mapped = theta.components[s].sigma * free_se;
            assert!((mapped - res.std_errors[k]).abs() <= 1e-6 * res.std_errors[k]);
            // Reparameterized finite difference of sigma = exp(v).
            let h = 1e-6;
            let fd = ((free.0[k] + h).exp() - (free.0[k] - h).exp()) / (2.0 * h);
            assert!((fd * free_se - res.std_errors[k]).abs() <= 1e-6 * res.std_errors[k]);
        }
    }

    #[test]
    fn singular_hessian_is_reported() {
        let design = Design::from_pairs(vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 4]).unwrap();
        let spec = ModelSpec::hmm(1);
        let theta = MixtureParams::new(vec![Component { mu: 2.5, gamma: 0.0, sigma: 1.0 }], vec![1.0]).unwrap();
        let err = sandwich_on_design(&design, &spec, &spec.encode(&theta).unwrap(), &HacConfig::default());
        assert!(matches!(err, Err(Error::Numerical(_))));
    }
}
