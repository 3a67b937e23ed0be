use serde::{Deserialize, Serialize};

use super::{batch_bounds, batch_se};
use crate::dgp::{HmmDgpParams, OutcomeKind, PathGenerator, RegimeOutcome};
use crate::error::{Error, Result};
use crate::mixture::{Component, MixtureParams};

pub const N_BATCHES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoTrueResult {
    /// Time average of the transition rows out of `(Z_t, S_t)`.
    pub weights_star: Vec<f64>,
    pub outcome_star: Vec<RegimeOutcome>,
    pub mc_error: Vec<f64>,
    /// Plain frequency of each regime along the same path.
    pub occupancy: Vec<f64>,
    pub occupancy_mc_error: Vec<f64>,
    pub n_sim: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl PseudoTrueResult {
    pub fn theta_star(&self) -> Result<MixtureParams> {
        MixtureParams::new(
            self.outcome_star.iter().map(|&o| Component::from(o)).collect(),
            self.weights_star.clone(),
        )
    }
}

pub fn pseudo_true_weights(dgp: &HmmDgpParams, n_sim: usize, burn_in: usize, seed: u64) -> Result<PseudoTrueResult> {
    if n_sim < 10_000 {
        return Err(Error::Domain(format!("n_sim must be at least 10000, got {n_sim}")));
    }
    let mut gen = PathGenerator::new(dgp, OutcomeKind::Hmm, seed)?;
    for _ in 0..burn_in {
        gen.step();
    }
    let d = dgp.d();
    let mut rb_batches = vec![vec![0.0; d]; N_BATCHES];
    let mut occ_batches = vec![vec![0.0; d]; N_BATCHES];
    for (b, (lo, hi)) in batch_bounds(n_sim, N_BATCHES).into_iter().enumerate() {
        let mut rb = vec![0.0; d];
        let mut occ = vec![0usize; d];
        for _ in lo..hi {
            for (acc, q) in rb.iter_mut().zip(gen.next_regime_distribution()) {
                *acc += q;
            }
            occ[gen.step().s] += 1;
        }
        let len = (hi - lo) as f64;
        for s in 0..d {
            rb_batches[b][s] = rb[s] / len;
            occ_batches[b][s] = occ[s] as f64 / len;
        }
    }
    let summarize = |batches: &[Vec<f64>], lens: &[(usize, usize)]| {
        let mut mean = vec![0.0; d];
        let mut se = vec![0.0; d];
        for s in 0..d {
            let column: Vec<f64> = batches.iter().map(|b| b[s]).collect();
            mean[s] = column
                .iter()
                .zip(lens)
                .map(|(m, (lo, hi))| m * (hi - lo) as f64)
                .sum::<f64>()
                / n_sim as f64;
            se[s] = batch_se(&column);
        }
        (mean, se)
    };
    let bounds = batch_bounds(n_sim, N_BATCHES);
    let (weights_star, mc_error) = summarize(&rb_batches, &bounds);
    let (occupancy, occupancy_mc_error) = summarize(&occ_batches, &bounds);
    Ok(PseudoTrueResult {
        weights_star,
        outcome_star: dgp.outcomes.clone(),
        mc_error,
        occupancy,
        occupancy_mc_error,
        n_sim,
        burn_in,
        seed,
    })
}
