//! Misspecification-robust covariance of the QML estimator.
//!
//! The sandwich `A^-1 B A^-1 / T` uses the finite-difference Hessian of the
//! average quasi-log-likelihood for `A` and a kernel-weighted sum of score
//! autocovariances for `B`:
//!
//! ```text
//! B = G_0 + sum_{j=1}^{floor(S_T)} k(j / S_T) (G_j + G_j'),   G_j = T^-1 sum_t g_t g_{t-j}'
//! ```
//!
//! with the Parzen kernel `k` and Andrews' AR(1) plug-in bandwidth
//! `S_T = 2.6614 (alpha(2) T)^(1/5)`.

mod hac;
mod sandwich;

pub use hac::{
    andrews_alpha2, andrews_bandwidth, ar1_fit, bandwidth_from_alpha, hac_middle, parzen_weight,
    Bandwidth, HacConfig, HacEstimate, Kernel,
};
pub use sandwich::{attach_standard_errors, sandwich_cov, sandwich_on_design, SandwichResult};
