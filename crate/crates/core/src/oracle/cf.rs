use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ratios below this at the end of the grid count as decayed.
pub const CF_THRESHOLD: f64 = 1e-8;

const REL_TOL: f64 = 1e-13;
const MAX_DEPTH: u32 = 16;
const MAX_RANGE: f64 = 1e5;

/// Unit-variance error law whose characteristic function is checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CfFamily {
    Gaussian,
    StudentT { nu: f64 },
}

impl fmt::Display for CfFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CfFamily::Gaussian => f.write_str("gaussian"),
            CfFamily::StudentT { nu } => write!(f, "student-t:{nu}"),
        }
    }
}

impl FromStr for CfFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("gaussian") {
            return Ok(CfFamily::Gaussian);
        }
        if let Some(rest) = s.strip_prefix("student-t:") {
            let nu: f64 = rest
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse degrees of freedom in {s:?}")))?;
            if !(nu > 2.0) || !nu.is_finite() {
                return Err(Error::Domain(format!("unit-variance Student-t needs nu > 2, got {nu}")));
            }
            return Ok(CfFamily::StudentT { nu });
        }
        Err(Error::Config(format!("unknown family {s:?}; use gaussian or student-t:<nu>")))
    }
}

impl Serialize for CfFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CfFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl CfFamily {
    /// Unnormalized density continued to the complex plane.
    fn kernel(&self, x: Complex64) -> Complex64 {
        match *self {
            CfFamily::Gaussian => (-0.5 * x * x).exp(),
            CfFamily::StudentT { nu } => (1.0 + x * x / (nu - 2.0)).powf(-(nu + 1.0) / 2.0),
        }
    }

    /// Height of the integration contour at frequency `tau`.
    fn shift(&self, tau: f64) -> f64 {
        match *self {
            CfFamily::Gaussian => tau,
            CfFamily::StudentT { nu } => tau.min(0.9 * (nu - 2.0).sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfCheckReport {
    pub family: CfFamily,
    pub a1: f64,
    pub a2: f64,
    /// `(tau, phi(a1 tau) / phi(a2 tau))`.
    pub ratio_trace: Vec<(f64, f64)>,
    pub log_ratio_trace: Vec<f64>,
    pub final_ratio: f64,
    pub threshold: f64,
    /// Log-ratio strictly decreasing over the second half of the grid.
    pub monotone_tail: bool,
    pub verdict: bool,
}

pub fn default_tau_grid() -> Vec<f64> {
    (1..=20).map(f64::from).collect()
}

/// `2 * int_0^inf Re[exp(i tau u) g(u)] du` with `g(u) = kernel(u + i h)`.
fn contour_integral(family: &CfFamily, tau: f64, h: f64) -> Result<f64> {
    let g = |u: f64| family.kernel(Complex64::new(u, h));
    let f = |u: f64| (Complex64::new(0.0, tau * u).exp() * g(u)).re;
    let width = if tau > 0.0 { (PI / tau).min(1.0) } else { 1.0 };
    let scale = g(0.0).norm();
    let target = REL_TOL * scale * width;

    fn panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64, target: f64, depth: u32) -> Option<f64> {
        let out = quadrature::integrate(f, a, b, target);
        if out.error_estimate <= target && out.integral.is_finite() {
            return Some(out.integral);
        }
        if depth == 0 {
            return None;
        }
        let m = 0.5 * (a + b);
        Some(panel(f, a, m, 0.5 * target, depth - 1)? + panel(f, m, b, 0.5 * target, depth - 1)?)
    }

    let mut total = 0.0;
    let mut a = 0.0;
    loop {
        let b = a + width;
        total += panel(&f, a, b, target, MAX_DEPTH).ok_or_else(|| {
            Error::Quadrature(format!(
                "{family}: panel [{a:.4}, {b:.4}] did not converge at tau = {tau}, contour height {h}"
            ))
        })?;
        a = b;
        if a >= 5.0 && g(a).norm() * a < REL_TOL * total.abs() {
            break;
        }
        if a > MAX_RANGE {
            return Err(Error::Quadrature(format!(
                "{family}: integrand tail not negligible by u = {MAX_RANGE} at tau = {tau} (|g| = {:.3e}, integral = {total:.3e})",
                g(a).norm()
            )));
        }
    }
    Ok(2.0 * total)
}

/// `log phi(tau)` by quadrature along the line `Im x = h` in the strip of
/// analyticity: `phi(tau) = exp(-tau h) int exp(i tau u) f(u + i h) du`.
pub fn log_cf_contour(family: CfFamily, tau: f64) -> Result<f64> {
    if !tau.is_finite() {
        return Err(Error::Domain(format!("tau must be finite, got {tau}")));
    }
    let tau = tau.abs();
    let norm = contour_integral(&family, 0.0, 0.0)?;
    let h = family.shift(tau);
    let val = contour_integral(&family, tau, h)?;
    if !(val > 0.0) {
        return Err(Error::Quadrature(format!(
            "{family}: non-positive transform {val:.3e} at tau = {tau}, contour height {h}"
        )));
    }
    Ok(-tau * h + (val / norm).ln())
}

/// `log phi(tau)`: closed form for the Gaussian, contour quadrature otherwise.
pub fn log_cf(family: CfFamily, tau: f64) -> Result<f64> {
    match family {
        CfFamily::Gaussian => Ok(-0.5 * tau * tau),
        CfFamily::StudentT { .. } => log_cf_contour(family, tau),
    }
}

pub fn cf_ratio_check(family: CfFamily, a1: f64, a2: f64, tau_grid: &[f64]) -> Result<CfCheckReport> {
    if !(a2 > 0.0 && a1 > a2) || !a1.is_finite() {
        return Err(Error::Domain(format!("need a1 > a2 > 0, got a1 = {a1}, a2 = {a2}")));
    }
    if tau_grid.is_empty() {
        return Err(Error::Domain("tau grid is empty".into()));
    }
    if tau_grid.iter().any(|t| !t.is_finite() || *t < 0.0) || tau_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Domain("tau grid must be non-negative, finite and strictly increasing".into()));
    }
    let mut log_ratio_trace = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        log_ratio_trace.push(log_cf(family, a1 * tau)? - log_cf(family, a2 * tau)?);
    }
    let ratio_trace: Vec<(f64, f64)> = tau_grid.iter().zip(&log_ratio_trace).map(|(t, l)| (*t, l.exp())).collect();
    let half = tau_grid.len() / 2;
    let monotone_tail = log_ratio_trace[half..].windows(2).all(|p| p[1] < p[0]);
    let final_ratio = ratio_trace.last().map(|p| p.1).unwrap_or(f64::NAN);
    Ok(CfCheckReport {
        family,
        a1,
        a2,
        ratio_trace,
        log_ratio_trace,
        final_ratio,
        threshold: CF_THRESHOLD,
        monotone_tail,
        verdict: final_ratio < CF_THRESHOLD && monotone_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Unit-variance t with five degrees of freedom:
    /// `phi(tau) = exp(-x) (1 + x + x^2 / 3)` with `x = sqrt(3) tau`.
    fn log_cf_t5(tau: f64) -> f64 {
        let x = 3f64.sqrt() * tau.abs();
        -x + (1.0 + x + x * x / 3.0).ln()
    }

    #[test]
    fn gaussian_closed_form_ratio() {
        let r = cf_ratio_check(CfFamily::Gaussian, 1.5, 1.0, &[1.0, 5.0, 10.0]).unwrap();
        let expected = (-62.5f64).exp();
        assert!((r.final_ratio - expected).abs() <= 1e-12 * expected);
        assert!((r.final_ratio - 7.2e-28).abs() < 0.05e-28);
        assert!(r.verdict);
        assert!(r.log_ratio_trace.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn contour_recovers_gaussian() {
        for tau in [0.0, 0.5, 3.0, 12.0, 30.0] {
            let got = log_cf_contour(CfFamily::Gaussian, tau).unwrap();
            assert!((got + 0.5 * tau * tau).abs() < 1e-9 * (1.0 + tau * tau), "tau {tau}: {got}");
        }
    }

    #[test]
    fn contour_recovers_student_t5() {
        let fam = CfFamily::StudentT { nu: 5.0 };
        for tau in [0.25, 1.0, 4.0, 10.0, 25.0, 40.0] {
            let got = log_cf_contour(fam, tau).unwrap();
            let want = log_cf_t5(tau);
            assert!((got - want).abs() < 1e-8 * (1.0 + want.abs()), "tau {tau}: {got} vs {want}");
        }
    }

    #[test]
    fn student_t_ratio_decays() {
        let r = cf_ratio_check(CfFamily::StudentT { nu: 5.0 }, 2.0, 1.0, &default_tau_grid()).unwrap();
        assert!(r.verdict, "{:?}", r.ratio_trace);
        assert!(r.ratio_trace.iter().all(|p| p.1.is_finite()));
    }

    #[test]
    fn invalid_scales() {
        assert!(matches!(cf_ratio_check(CfFamily::Gaussian, 1.0, 1.0, &[1.0]), Err(Error::Domain(_))));
        assert!(cf_ratio_check(CfFamily::Gaussian, 1.0, 2.0, &[1.0]).is_err());
        assert!(cf_ratio_check(CfFamily::Gaussian, 2.0, 1.0, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn family_strings() {
        assert_eq!("gaussian".parse::<CfFamily>().unwrap(), CfFamily::Gaussian);
        assert_eq!("student-t:5".parse::<CfFamily>().unwrap(), CfFamily::StudentT { nu: 5.0 });
        assert!("student-t:2".parse::<CfFamily>().is_err());
        assert!("cauchy".parse::<CfFamily>().is_err());
        let json = serde_json::to_string(&CfFamily::StudentT { nu: 5.0 }).unwrap();
        assert_eq!(json, "\"student-t:5\"");
    }
}
