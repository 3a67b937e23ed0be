//! Data-generating processes: the generalized HMM with covariate-dependent
//! transition probabilities, its Markov-switching autoregressive variant, and
//! the sample container shared by the rest of the crate.

mod params;
mod sample;
mod simulate;

pub use params::{
    ArLaw, HmmDgpParams, Link, LogitCoef, NoiseCorrelation, RegimeOutcome, TransitionSpec,
};
pub use sample::{load_sample, save_sample, Origin, Sample};
pub use simulate::{
    simulate, simulate_hmm, simulate_msar, NoiseDraws, OutcomeKind, PathGenerator, SimOptions,
    Simulation, Step, DEFAULT_BURN_IN,
};
