//! The postulated model: regimes drawn i.i.d. with fixed weights, and a
//! regime-specific linear outcome equation with standardized noise density.

mod density;
mod likelihood;
mod params;

pub use density::{ErrorDensity, Gaussian, StudentT};
pub use likelihood::{
    component_logdensity, hessian, hessian_at, quasi_loglik, quasi_loglik_with, score,
    score_contributions, Design,
};
pub use params::{
    Component, FreeVector, MixtureParams, ModelSpec, OutcomeForm, SwitchingFlags, SIGMA_MAX,
    SIGMA_MIN,
};
