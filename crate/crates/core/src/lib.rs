//! Rescaled Pólya urn.
//!
//! The urn holds a fixed intrinsic composition `b0` and a fluctuating
//! composition `B_n` updated as `B_{n+1} = beta * B_n + alpha * xi_{n+1}`,
//! where `xi_{n+1}` is the indicator of the colour drawn at step `n + 1`.
//! With `beta < 1` the reinforcement is local: old draws are forgotten at a
//! geometric rate, the empirical frequencies converge to `p0 = b0 / |b0|`,
//! and the Pearson chi-squared statistic converges to `lambda` times a
//! chi-squared law.
//!
//! Modules:
//!
//! * [`model`]: parameters, regime classification, closed-form constants.
//! * [`simulate`]: exact seeded simulation of trajectories.
//! * [`kernel`]: the finite chain for `beta = 0` and the linear-model CLT
//!   covariance.
//! * [`coupling`]: maximal coupling of categorical draws and coupled urns.
//! * [`specfun`]: regularized incomplete gamma function and gamma quantiles.
//! * [`gof`]: chi-squared statistic and the inflated goodness-of-fit test.
//! * [`clusters`]: clustered samples, the `lambda` estimator and per-cluster
//!   tests.
//! * [`montecarlo`]: replication harness checking the limit theorems.

pub mod clusters;
pub mod coupling;
pub mod error;
pub mod gof;
pub mod kernel;
pub mod model;
pub mod montecarlo;
pub mod rng;
pub mod simulate;
pub mod specfun;

pub use error::{Result, UrnError};
pub use model::{derive_constants, predictive_mean, DerivedConstants, ModelParams, Regime, RegimeTag};
