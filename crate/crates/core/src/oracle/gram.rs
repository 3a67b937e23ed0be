use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mixture::{component_logdensity, Component, MixtureParams};

/// Standard deviations each side of every component mean the grid must reach.
const COVERAGE: f64 = 10.0;

fn centre(c: &Component, w: f64) -> f64 {
    c.mu + c.gamma * w
}

/// Evenly spaced nodes covering every component at `w` by 12 standard deviations.
pub fn probe_grid(theta: &MixtureParams, w: f64, n: usize) -> Vec<f64> {
    let lo = theta
        .components
        .iter()
        .map(|c| centre(c, w) - 12.0 * c.sigma)
        .fold(f64::INFINITY, f64::min);
    let hi = theta
        .components
        .iter()
        .map(|c| centre(c, w) + 12.0 * c.sigma)
        .fold(f64::NEG_INFINITY, f64::max);
    let n = n.max(2);
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Trapezoid-rule Gram matrix of the component densities at `w`.
pub fn gram_matrix(theta: &MixtureParams, w: f64, grid: &[f64]) -> Result<DMatrix<f64>> {
    theta.validate()?;
    if grid.len() < 3 || grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Domain("grid needs at least 3 finite, strictly increasing nodes".into()));
    }
    for (s, c) in theta.components.iter().enumerate() {
        let m = centre(c, w);
        if grid[0] > m - COVERAGE * c.sigma || grid[grid.len() - 1] < m + COVERAGE * c.sigma {
            return Err(Error::Domain(format!(
                "grid [{}, {}] does not cover component {} ({m} ± {COVERAGE}·{})",
                grid[0],
                grid[grid.len() - 1],
                s + 1,
                c.sigma
            )));
        }
    }
    let n = grid.len();
    let weights: Vec<f64> = (0..n)
        .map(|i| {
            let left = if i > 0 { grid[i] - grid[i - 1] } else { 0.0 };
            let right = if i + 1 < n { grid[i + 1] - grid[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    let dens: Vec<Vec<f64>> = theta
        .components
        .iter()
        .map(|c| {
            grid.iter()
                .map(|&y| component_logdensity(y, w, c).map(f64::exp))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let d = theta.d();
    let mut g = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v: f64 = (0..n).map(|i| weights[i] * dens[a][i] * dens[b][i]).sum();
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    Ok(g)
}

/// Smallest eigenvalue of the Gram matrix; clearly positive means the
/// component densities at `w` are linearly independent.
pub fn linear_independence_check(theta: &MixtureParams, w_probe: f64, grid: &[f64]) -> Result<f64> {
    Ok(linalg::min_eigenvalue(&gram_matrix(theta, w_probe, grid)?))
}
