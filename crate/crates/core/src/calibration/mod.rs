//! Post-hoc calibration: isotonic quantile-level recalibration fitted on
//! the `cal_fit` slice, plus split-conformal interval widening.

mod conformal;
mod isotonic;

pub use conformal::{
    conformal_offset, conformity_scores, fit_conformal, widen, ConformalInterval,
    ConformalOffsets,
};
pub use isotonic::{
    apply_calibration, calibrate_distribution, fit_isotonic, fit_isotonic_checked,
    measure_coverage, CalibrationMap, CLAMP_EPS,
};
