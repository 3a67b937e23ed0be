//! Quasi-maximum-likelihood fitting of the mixture model: multi-start EM,
//! BFGS refinement on the unconstrained coordinates, and label alignment.

mod align;
mod bfgs;
mod config;
mod em;
mod qml;

pub use align::{align_permutation, Alignment};
pub use bfgs::{minimize, BfgsOutcome};
pub use config::EstimatorConfig;
pub use em::{em_fit, EmFit};
pub use qml::{qml_estimate, start_values, EstimationResult};
