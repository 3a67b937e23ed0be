use nalgebra::DMatrix;

use super::density::{ErrorDensity, Gaussian, HALF_LN_2PI};
use super::params::{Component, FreeVector, MixtureParams, ModelSpec, OutcomeForm};
use crate::dgp::Sample;
use crate::error::{Error, Result};
use crate::linalg::symmetrize;

/// Log of the Gaussian component density of `y` given regressor `x`.
pub fn component_logdensity(y: f64, x: f64, comp: &Component) -> Result<f64> {
    if !(comp.sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {}", comp.sigma)));
    }
    let e = (y - comp.mu - comp.gamma * x) / comp.sigma;
    Ok(-comp.sigma.ln() - HALF_LN_2PI - 0.5 * e * e)
}

/// Outcome/regressor pairs entering the quasi-likelihood. In the MSAR form
/// the regressor is the lagged outcome and the first observation is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    y: Vec<f64>,
    x: Vec<f64>,
}

/// `ln sum exp` over a scratch buffer, summed in ascending order so the
/// result does not depend on the order of the terms.
fn log_sum_exp_sorted(buf: &mut [f64]) -> f64 {
    if buf.len() == 1 {
        return buf[0];
    }
    buf.sort_unstable_by(f64::total_cmp);
    let max = buf[buf.len() - 1];
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = buf.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

impl Design {
    pub fn new(sample: &Sample, form: OutcomeForm) -> Result<Self> {
        let n = sample.len();
        if sample.w.len() != n {
            return Err(Error::Domain("sample columns have different lengths".into()));
        }
        let (y, x) = match form {
            OutcomeForm::Hmm => (sample.y.clone(), sample.w.clone()),
            OutcomeForm::Msar if n >= 2 => (sample.y[1..].to_vec(), sample.y[..n - 1].to_vec()),
            OutcomeForm::Msar => (Vec::new(), Vec::new()),
        };
        if y.is_empty() {
            return Err(Error::Domain(
                "quasi-likelihood needs at least one usable observation".into(),
            ));
        }
        Ok(Self { y, x })
    }

    pub fn from_pairs(y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if y.is_empty() || y.len() != x.len() {
            return Err(Error::Domain("design needs equal, non-zero lengths".into()));
        }
        Ok(Self { y, x })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    fn fill_log_terms<D: ErrorDensity>(
        &self,
        theta: &MixtureParams,
        density: &D,
        t: usize,
        out: &mut [f64],
    ) {
        let (y, x) = (self.y[t], self.x[t]);
        for ((o, c), w) in out.iter_mut().zip(&theta.components).zip(&theta.weights) {
            let e = (y - c.mu - c.gamma * x) / c.sigma;
            *o = w.ln() - c.sigma.ln() + density.ln_pdf(e);
        }
    }

    /// Log mixture density of observation `t`.
    pub fn obs_loglik(&self, theta: &MixtureParams, t: usize) -> f64 {
        let mut buf = vec![0.0; theta.d()];
        self.fill_log_terms(theta, &Gaussian, t, &mut buf);
        log_sum_exp_sorted(&mut buf)
    }

    /// Average log mixture density over the sample.
    pub fn loglik(&self, theta: &MixtureParams) -> f64 {
        self.loglik_with(theta, &Gaussian)
    }

    pub fn loglik_with<D: ErrorDensity>(&self, theta: &MixtureParams, density: &D) -> f64 {
        let mut buf = vec![0.0; theta.d()];
        let mut total = 0.0;
        for t in 0..self.len() {
            self.fill_log_terms(theta, density, t, &mut buf);
            total += log_sum_exp_sorted(&mut buf);
        }
        total / self.len() as f64
    }

    /// Posterior regime probabilities, row-major `T x d`, and the average
    /// log-likelihood at `theta`.
    pub fn responsibilities(&self, theta: &MixtureParams) -> (Vec<f64>, f64) {
        let d = theta.d();
        let mut resp = vec![0.0; self.len() * d];
        let mut scratch = vec![0.0; d];
        let mut total = 0.0;
        for t in 0..self.len() {
            let row = &mut resp[t * d..(t + 1) * d];
            self.fill_log_terms(theta, &Gaussian, t, row);
            scratch.copy_from_slice(row);
            let ll = log_sum_exp_sorted(&mut scratch);
            for r in row.iter_mut() {
                *r = (*r - ll).exp();
            }
            total += ll;
        }
        (resp, total / self.len() as f64)
    }

    /// Calls `f(t, g_t)` with the gradient of the `t`-th log-density with
    /// respect to the free coordinates.
    fn for_each_gradient(
        &self,
        spec: &ModelSpec,
        theta: &MixtureParams,
        mut f: impl FnMut(usize, &[f64]),
    ) {
        let d = spec.d;
        let q = spec.dim();
        let off = spec.logit_offset();
        let mut lt = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        let mut g = vec![0.0; q];
        for t in 0..self.len() {
            self.fill_log_terms(theta, &Gaussian, t, &mut lt);
            scratch.copy_from_slice(&lt);
            let ll = log_sum_exp_sorted(&mut scratch);
            g.iter_mut().for_each(|v| *v = 0.0);
            let (y, x) = (self.y[t], self.x[t]);
            for (s, c) in theta.components.iter().enumerate() {
                let r = (lt[s] - ll).exp();
                let e = (y - c.mu - c.gamma * x) / c.sigma;
                let ge = Gaussian.neg_dlog(e);
                g[spec.mu_index(s)] += r * ge / c.sigma;
                g[spec.slope_index(s)] += r * ge * x / c.sigma;
                g[spec.log_sigma_index(s)] += r * (ge * e - 1.0);
                if s + 1 < d {
                    g[off + s] += r - theta.weights[s];
                }
            }
            f(t, &g);
        }
    }

    pub fn score(&self, spec: &ModelSpec, theta: &MixtureParams) -> Vec<f64> {
        let mut sum = vec![0.0; spec.dim()];
        self.for_each_gradient(spec, theta, |_, g| {
            for (s, v) in sum.iter_mut().zip(g) {
                *s += v;
            }
        });
        let n = self.len() as f64;
        sum.iter_mut().for_each(|v| *v /= n);
        sum
    }

    pub fn score_contributions(&self, spec: &ModelSpec, theta: &MixtureParams) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len(), spec.dim());
        self.for_each_gradient(spec, theta, |t, g| {
            for (j, v) in g.iter().enumerate() {
                m[(t, j)] = *v;
            }
        });
        m
    }

    /// Central differences of the analytic score, symmetrized.
    pub fn hessian(&self, spec: &ModelSpec, free: &FreeVector) -> DMatrix<f64> {
        let q = spec.dim();
        let mut h = DMatrix::zeros(q, q);
        let mut probe = free.0.clone();
        for i in 0..q {
            let step = 1e-4 * free.0[i].abs().max(1.0);
            probe[i] = free.0[i] + step;
            let up = self.score(spec, &spec.decode_unchecked(&probe));
            probe[i] = free.0[i] - step;
            let dn = self.score(spec, &spec.decode_unchecked(&probe));
            probe[i] = free.0[i];
            for j in 0..q {
                h[(j, i)] = (up[j] - dn[j]) / (2.0 * step);
            }
        }
        symmetrize(&mut h);
        h
    }
}

fn prepare(theta: &MixtureParams, sample: &Sample, spec: &ModelSpec) -> Result<Design> {
    spec.validate()?;
    theta.validate()?;
    if theta.d() != spec.d {
        return Err(Error::Domain(format!(
            "parameter has {} components but the model has d = {}",
            theta.d(),
            spec.d
        )));
    }
    spec.design(sample)
}

pub fn quasi_loglik(theta: &MixtureParams, sample: &Sample, spec: &ModelSpec) -> Result<f64> {
    Ok(prepare(theta, sample, spec)?.loglik(theta))
}

/// Quasi-log-likelihood under a non-Gaussian standardized noise density.
pub fn quasi_loglik_with<D: ErrorDensity>(
    theta: &MixtureParams,
    sample: &Sample,
    spec: &ModelSpec,
    density: &D,
) -> Result<f64> {
    Ok(prepare(theta, sample, spec)?.loglik_with(theta, density))
}

pub fn score(free: &FreeVector, sample: &Sample, spec: &ModelSpec) -> Result<Vec<f64>> {
    let theta = spec.decode(free)?;
    Ok(prepare(&theta, sample, spec)?.score(spec, &theta))
}

/// Per-observation score rows, `T x q`, without the `1/T` factor.
pub fn score_contributions(free: &FreeVector, sample: &Sample, spec: &ModelSpec) -> Result<DMatrix<f64>> {
    let theta = spec.decode(free)?;
    Ok(prepare(&theta, sample, spec)?.score_contributions(spec, &theta))
}

pub fn hessian(free: &FreeVector, sample: &Sample, spec: &ModelSpec) -> Result<DMatrix<f64>> {
    let theta = spec.decode(free)?;
    Ok(hessian_at(&prepare(&theta, sample, spec)?, spec, free))
}

pub fn hessian_at(design: &Design, spec: &ModelSpec, free: &FreeVector) -> DMatrix<f64> {
    design.hessian(spec, free)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{simulate_hmm, HmmDgpParams};
    use crate::mixture::params::Component;

    fn comp(mu: f64, gamma: f64, sigma: f64) -> Component {
        Component { mu, gamma, sigma }
    }

    #[test]
    fn logdensity_examples() {
        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let v = component_logdensity(0.0, 0.0, &comp(0.0, 0.0, 1.0)).unwrap();
        assert!((v + half_ln_2pi).abs() < 1e-15);
        assert!((v + 0.918_938_5).abs() < 1e-7);
        let v = component_logdensity(1.0, 2.0, &comp(0.0, 0.5, 1.0)).unwrap();
        assert!((v + half_ln_2pi).abs() < 1e-15);
        let v = component_logdensity(2.0, 0.0, &comp(0.0, 0.0, 2.0)).unwrap();
        let hand = -(2.0f64).ln() - half_ln_2pi - 0.5;
        assert!((v - hand).abs() < 1e-15);
        assert!(component_logdensity(0.0, 0.0, &comp(0.0, 0.0, 0.0)).is_err());
        assert!(component_logdensity(0.0, 0.0, &comp(0.0, 0.0, -1.0)).is_err());
    }

    fn small_sample() -> Sample {
        simulate_hmm(&HmmDgpParams::paper_hmm(0.0, 0.0), 60, 20, 17).unwrap()
    }

    #[test]
    fn single_component_is_gaussian_regression() {
        let sample = small_sample();
        let c = comp(0.3, 0.7, 1.4);
        let theta = MixtureParams::new(vec![c], vec![1.0]).unwrap();
        let ll = quasi_loglik(&theta, &sample, &ModelSpec::hmm(1)).unwrap();
        let direct: f64 = sample
            .y
            .iter()
            .zip(&sample.w)
            .map(|(&y, &w)| component_logdensity(y, w, &c).unwrap())
            .sum::<f64>()
            / sample.len() as f64;
        assert!((ll - direct).abs() < 1e-13);
    }

    #[test]
    fn identical_components_collapse() {
        let sample = small_sample();
        let c = comp(-0.2, 0.4, 0.9);
        let one = MixtureParams::new(vec![c], vec![1.0]).unwrap();
        let two = MixtureParams::new(vec![c, c], vec![0.3, 0.7]).unwrap();
        let a = quasi_loglik(&one, &sample, &ModelSpec::hmm(1)).unwrap();
        let b = quasi_loglik(&two, &sample, &ModelSpec::hmm(2)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariance_is_exact() {
        let sample = small_sample();
        let theta = MixtureParams::new(
            vec![comp(1.0, 0.5, 1.0), comp(-1.0, 1.0, 0.8), comp(0.2, -0.3, 2.0)],
            vec![0.2, 0.5, 0.3],
        )
        .unwrap();
        let spec = ModelSpec::hmm(3);
        let base = quasi_loglik(&theta, &sample, &spec).unwrap();
        for perm in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            assert_eq!(base, quasi_loglik(&theta.permuted(&perm), &sample, &spec).unwrap());
        }
    }

    #[test]
    fn extreme_residuals_stay_finite() {
        let theta = MixtureParams::new(vec![comp(0.0, 0.0, 1.0), comp(0.0, 0.0, 0.5)], vec![0.5, 0.5]).unwrap();
        let sample = Sample::from_yw(vec![100.0, -100.0, 50.0], vec![0.0, 0.0, 0.0]).unwrap();
        let ll = quasi_loglik(&theta, &sample, &ModelSpec::hmm(2)).unwrap();
        assert!(ll.is_finite());
    }

    #[test]
    fn msar_conditions_on_first_observation() {
        let sample = Sample::from_yw(vec![1.0, 2.0, 3.0], vec![0.0; 3]).unwrap();
        let design = Design::new(&sample, OutcomeForm::Msar).unwrap();
        assert_eq!(design.y(), &[2.0, 3.0]);
        assert_eq!(design.x(), &[1.0, 2.0]);
        let one = Sample::from_yw(vec![1.0], vec![0.0]).unwrap();
        assert!(Design::new(&one, OutcomeForm::Msar).is_err());
    }

    #[test]
    fn contributions_average_to_score() {
        let sample = small_sample();
        let spec = ModelSpec::hmm(2);
        let free = FreeVector(vec![0.8, -0.9, 0.4, 1.1, 0.1, -0.2, 0.3]);
        let s = score(&free, &sample, &spec).unwrap();
        let c = score_contributions(&free, &sample, &spec).unwrap();
        for (j, sj) in s.iter().enumerate() {
            let mean = c.column(j).iter().sum::<f64>() / sample.len() as f64;
            assert!((mean - sj).abs() <= 1e-12);
        }
        let first = Sample::from_yw(vec![sample.y[0]], vec![sample.w[0]]).unwrap();
        let s1 = score(&free, &first, &spec).unwrap();
        let c1 = score_contributions(&free, &first, &spec).unwrap();
        assert_eq!(c1.nrows(), 1);
        for j in 0..spec.dim() {
            assert!((c1[(0, j)] - s1[j]).abs() <= 1e-15);
        }
    }

    #[test]
    fn ols_case_scores_and_hessian_have_closed_forms() {
        let sample = small_sample();
        let spec = ModelSpec::hmm(1);
        let (mu, gamma, sigma): (f64, f64, f64) = (0.4, 0.6, 1.3);
        let free = FreeVector(vec![mu, gamma, sigma.ln()]);
        let c = score_contributions(&free, &sample, &spec).unwrap();
        let n = sample.len() as f64;
        let (mut sww, mut sw, mut see, mut sew, mut se) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for t in 0..sample.len() {
            let (y, w) = (sample.y[t], sample.w[t]);
            let e = (y - mu - gamma * w) / sigma;
            assert!((c[(t, 0)] - e / sigma).abs() < 1e-14);
            assert!((c[(t, 1)] - e * w / sigma).abs() < 1e-13);
            assert!((c[(t, 2)] - (e * e - 1.0)).abs() < 1e-13);
            sww += w * w;
            sw += w;
            see += e * e;
            sew += e * w;
            se += e;
        }
        // Hessian of the average Gaussian log-likelihood in (mu, gamma, ln sigma).
        let s2 = sigma * sigma;
        let exact = [
            [-1.0 / s2, -sw / n / s2, -2.0 * se / n / sigma],
            [-sw / n / s2, -sww / n / s2, -2.0 * sew / n / sigma],
            [-2.0 * se / n / sigma, -2.0 * sew / n / sigma, -2.0 * see / n],
        ];
        let h = hessian(&free, &sample, &spec).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let tol = 1e-4 * exact[i][j].abs().max(1e-3);
                assert!((h[(i, j)] - exact[i][j]).abs() <= tol, "({i},{j}) {} vs {}", h[(i, j)], exact[i][j]);
            }
        }
        assert_eq!(h.clone() - h.transpose(), DMatrix::zeros(3, 3));
    }
}
