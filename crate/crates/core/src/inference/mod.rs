//! Monte-Carlo predictive inference: repeated stochastic forwards, pooled
//! predictive distributions, aleatoric/epistemic decomposition, interval
//! extraction, and forecast export.

pub mod cdf;
pub mod export;
pub mod mc;

pub use cdf::{quantile_from_row, variance_from_quantiles};
pub use export::export_forecasts;
pub use mc::{
    decompose_uncertainty, predict_mc, prediction_interval, predictive_distribution,
    MCSampleSet, MwView, PredictiveDistribution,
};
