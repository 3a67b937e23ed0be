use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::MixtureParams;

/// Largest number of regimes aligned by exhaustive search.
const MAX_BRUTE_FORCE_D: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub params: MixtureParams,
    /// Component `k` of `params` is component `permutation[k]` of the input.
    pub permutation: Vec<usize>,
    pub distance_before: f64,
    pub distance_after: f64,
}

fn distance(a: &MixtureParams, b: &MixtureParams, perm: &[usize]) -> f64 {
    perm.iter()
        .enumerate()
        .map(|(k, &j)| {
            let (x, r) = (&a.components[j], &b.components[k]);
            (x.mu - r.mu).powi(2) + (x.gamma - r.gamma).powi(2) + (x.sigma - r.sigma).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Relabels `theta_hat` to be as close as possible to `reference` in the
/// Euclidean distance of the stacked `(mu, gamma, sigma)` blocks. Ties keep
/// the lexicographically first permutation, so an aligned input is returned
/// unchanged.
pub fn align_permutation(theta_hat: &MixtureParams, reference: &MixtureParams) -> Result<Alignment> {
    let d = theta_hat.d();
    if reference.d() != d {
        return Err(Error::Domain(format!(
            "cannot align {d} components to a reference with {}",
            reference.d()
        )));
    }
    if d > MAX_BRUTE_FORCE_D {
        return Err(Error::Domain(format!(
            "alignment searches all permutations and supports d <= {MAX_BRUTE_FORCE_D}"
        )));
    }
    let identity: Vec<usize> = (0..d).collect();
    let before = distance(theta_hat, reference, &identity);
    let mut best = (before, identity.clone());
    let mut perm = identity;
    while next_permutation(&mut perm) {
        let dist = distance(theta_hat, reference, &perm);
        if dist < best.0 {
            best = (dist, perm.clone());
        }
    }
    Ok(Alignment {
        params: theta_hat.permuted(&best.1),
        permutation: best.1,
        distance_before: before,
        distance_after: best.0,
    })
}

/// Advances to the next permutation in lexicographic order.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
