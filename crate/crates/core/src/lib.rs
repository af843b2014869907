//! Learning binary classifiers under disparate censorship.
//!
//! Disparate censorship is a selective-label regime: an individual's true
//! outcome `y` is revealed only when a (possibly biased) decision-maker
//! tests them (`t = 1`), and everyone untested is recorded as negative, so
//! the observed label is `y_obs = y * t`. Training on `y_obs` as if it were
//! ground truth bakes the testing bias into the model.
//!
//! This crate provides the pieces needed to study and mitigate that bias
//! end to end:
//!
//! - [`synthgen`]: a two-dimensional synthetic benchmark with controllable
//!   testing disparity, prevalence disparity, and testing rate, calibrated
//!   by bisection against Monte Carlo estimates;
//! - [`nnet`]: a small feedforward classifier with analytic gradients,
//!   full-batch Adam, soft targets, per-example weights, and early stopping;
//! - [`dcem`]: the censorship-aware expectation-maximization learner. Its
//!   E-step imputes soft pseudo-labels for untested examples and its M-step
//!   minimizes a cross-entropy objective with a causal-regularization term
//!   driven by an estimated testing propensity;
//! - [`baselines`]: reference learners (observed-label, tested-only,
//!   oracle, ablations, inverse-propensity weighting) sharing the same
//!   engine;
//! - [`metrics`]: AUC, ROC curves, the ROC gap (area between per-group ROC
//!   curves), and robustness aggregates;
//! - [`theory`]: closed-form analysis of the per-example M-step optimum and
//!   a brute-force oracle that validates it numerically.
//!
//! Numeric code is generic over the scalar type via [`scalar::Scalar`]
//! (`f32` or `f64`); concrete aliases for the common double-precision
//! instantiation are exported at the crate root.

pub mod baselines;
pub mod dcem;
pub mod error;
pub mod metrics;
pub mod nnet;
pub mod rng;
pub mod scalar;
pub mod synthgen;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar type for experiments.
pub type Real = f64;

pub type NetworkF64 = nnet::Network<f64>;
pub type NetworkF32 = nnet::Network<f32>;
pub type TrainConfigF64 = nnet::TrainConfig<f64>;
pub type DatasetF64 = synthgen::Dataset<f64>;
pub type EmConfigF64 = dcem::EmConfig<f64>;
pub type RocCurveF64 = metrics::RocCurve<f64>;
