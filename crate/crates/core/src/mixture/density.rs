use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

/// A standardized (mean zero, unit variance) noise density.
pub trait ErrorDensity: Sync {
    fn ln_pdf(&self, e: f64) -> f64;

    /// `-d/de ln f(e)`.
    fn neg_dlog(&self, e: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Gaussian;

pub(crate) const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

impl ErrorDensity for Gaussian {
    #[inline]
    fn ln_pdf(&self, e: f64) -> f64 {
        -HALF_LN_2PI - 0.5 * e * e
    }

    #[inline]
    fn neg_dlog(&self, e: f64) -> f64 {
        e
    }
}

/// Student-t with `nu > 2` degrees of freedom, rescaled to unit variance.
#[derive(Debug, Clone, Copy)]
pub struct StudentT {
    nu: f64,
    ln_norm: f64,
}

impl StudentT {
    pub fn new(nu: f64) -> Option<Self> {
        if !(nu > 2.0) || !nu.is_finite() {
            return None;
        }
        let scale2 = (nu - 2.0) / nu;
        let ln_norm = ln_gamma(0.5 * (nu + 1.0))
            - ln_gamma(0.5 * nu)
            - 0.5 * (nu * PI).ln()
            - 0.5 * scale2.ln();
        Some(Self { nu, ln_norm })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

impl ErrorDensity for StudentT {
    fn ln_pdf(&self, e: f64) -> f64 {
        self.ln_norm - 0.5 * (self.nu + 1.0) * (e * e / (self.nu - 2.0)).ln_1p()
    }

    fn neg_dlog(&self, e: f64) -> f64 {
        (self.nu + 1.0) * e / (self.nu - 2.0 + e * e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * f(lo + i as f64 * h)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn student_t_is_standardized() {
        let t = StudentT::new(5.0).unwrap();
        let mass = integrate(|e| t.ln_pdf(e).exp(), -2000.0, 2000.0, 4_000_000);
        let var = integrate(|e| e * e * t.ln_pdf(e).exp(), -2000.0, 2000.0, 4_000_000);
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
        assert!((var - 1.0).abs() < 2e-3, "{var}");
        assert!(StudentT::new(2.0).is_none());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let t = StudentT::new(7.0).unwrap();
        for &e in &[-3.0, -0.2, 0.0, 1.5] {
            for d in [&t as &dyn ErrorDensity, &Gaussian] {
                let h = 1e-6;
                let fd = -(d.ln_pdf(e + h) - d.ln_pdf(e - h)) / (2.0 * h);
                assert!((fd - d.neg_dlog(e)).abs() < 1e-7);
            }
        }
    }
}
