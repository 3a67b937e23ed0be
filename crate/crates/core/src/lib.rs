//! Quasi-maximum-likelihood estimation of finite mixture regressions when the
//! data come from a hidden Markov model whose transition probabilities depend
//! on an observed covariate.
//!
//! The crate is organised around the life cycle of one experiment:
//!
//! - [`dgp`] simulates the generalized HMM (and its Markov-switching
//!   autoregressive variant) and reads/writes sample files.
//! - [`mixture`] defines the i.i.d.-regime Gaussian mixture model, its
//!   quasi-log-likelihood, analytic score and finite-difference Hessian.
//! - [`estimator`] fits the mixture by multi-start EM followed by BFGS.
//! - [`inference`] builds sandwich covariances with a Parzen HAC middle
//!   matrix and Andrews' plug-in bandwidth.
//! - [`oracle`] computes pseudo-true mixture weights by ergodic simulation,
//!   checks Kullback-Leibler dominance, and runs identifiability checks.
//! - [`harness`] runs seeded Monte Carlo experiments and renders tables.

pub mod dgp;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod inference;
pub mod linalg;
pub mod mixture;
pub mod oracle;
pub mod streams;

pub use error::{Error, Result};
