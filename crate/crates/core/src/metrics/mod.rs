//! Probabilistic and point forecast evaluation.

mod ops;
mod report;

pub use ops::{
    crps_quantile, crps_samples, mpiw, picp, point_metrics, reliability_curve, winkler,
    winkler_mean,
};
pub use report::{compute_report, EvalInstance, MetricsReport, RegimeMetrics};
