//! Probabilistic electricity load forecasting with a Bayesian patch transformer.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! - [`data`] — synthetic grid-demand generation, CSV ingestion, outlier
//!   cleaning, feature engineering, sliding-window construction and
//!   chronological partitioning.
//! - [`model`] — the Bayesian transformer forward pass: patch embedding,
//!   stochastic multi-head attention, variational feed-forward layers with
//!   inference-active dropout, and a multi-quantile head.
//! - [`training`] — pinball/ELBO losses, AdamW with cosine annealing,
//!   gradient clipping, early stopping, and finite-difference gradient
//!   verification.
//! - [`inference`] — Monte-Carlo predictive inference with
//!   aleatoric/epistemic variance decomposition.
//! - [`calibration`] — isotonic quantile-level recalibration and split
//!   conformal intervals, fitted on held-out chronological slices.
//! - [`metrics`] — CRPS, PICP, MPIW, Winkler, reliability curves and
//!   per-regime aggregation.
//! - [`experiment`] — config-driven experiment runners behind the CLI.
//!
//! With the default `parallel` feature, batch gradients, Monte-Carlo passes
//! and per-window evaluation fan out across a rayon pool; all reductions run
//! in a fixed order so results are bit-identical to the sequential build.

pub mod calibration;
pub mod data;
pub mod error;
pub mod experiment;
pub mod inference;
pub mod math;
pub mod metrics;
pub mod model;
pub(crate) mod parallel;
pub(crate) mod rng;
pub mod training;

pub use error::{Error, Result};
