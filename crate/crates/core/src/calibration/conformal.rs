//! Split-conformal interval adjustment (CQR-style).
//!
//! For a central interval `[q̂_lo, q̂_hi]` with miss rate `α`, the
//! conformity score of a held-out instance is `max(q̂_lo − y, y − q̂_hi)`:
//! positive when the actual escapes the interval, negative when it sits
//! comfortably inside. The offset added to both edges is the
//! `⌈(n+1)·(1−α)⌉`-th smallest score, which guarantees finite-sample
//! marginal coverage of at least `1 − α` under exchangeability.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-interval conformal correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalInterval {
    /// Nominal miss rate of the central interval (0.1 for 90%).
    pub miss_rate: f64,
    /// Additive widening applied to both interval edges.
    pub offset: f64,
}

/// Conformal offsets for the interval set a model reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ConformalOffsets {
    pub intervals: Vec<ConformalInterval>,
}

impl ConformalOffsets {
    /// Offset for a given miss rate, if fitted.
    pub fn offset(&self, miss_rate: f64) -> Option<f64> {
        self.intervals
            .iter()
            .find(|iv| (iv.miss_rate - miss_rate).abs() < 1e-9)
            .map(|iv| iv.offset)
    }
}

/// Conformity scores `max(q̂_lo − y, y − q̂_hi)` for aligned slices.
pub fn conformity_scores(lower: &[f64], upper: &[f64], actuals: &[f64]) -> Result<Vec<f64>> {
    if lower.len() != upper.len() || lower.len() != actuals.len() {
        return Err(Error::Shape(format!(
            "conformity inputs disagree: {} lower, {} upper, {} actuals",
            lower.len(),
            upper.len(),
            actuals.len()
        )));
    }
    for (i, (lo, hi)) in lower.iter().zip(upper).enumerate() {
        if lo > hi {
            return Err(Error::Data(format!("crossed interval at index {i}: [{lo}, {hi}]")));
        }
    }
    Ok(lower
        .iter()
        .zip(upper)
        .zip(actuals)
        .map(|((lo, hi), y)| (lo - y).max(y - hi))
        .collect())
}

/// The `⌈(n+1)·(1−miss_rate)⌉`-th smallest conformity score. Errors when
/// the calibration set is too small for the requested rank.
pub fn conformal_offset(scores: &[f64], miss_rate: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&miss_rate) || miss_rate <= 0.0 {
        return Err(Error::Config(format!("miss rate {miss_rate} outside (0, 1)")));
    }
    let n = scores.len();
    if n == 0 {
        return Err(Error::Data("no conformity scores".into()));
    }
    let rank = ((n as f64 + 1.0) * (1.0 - miss_rate)).ceil() as usize;
    if rank > n {
        return Err(Error::Data(format!(
            "calibration set of {n} too small for miss rate {miss_rate}: needs rank {rank}"
        )));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[rank - 1])
}

/// Fit offsets for several intervals at once from `(miss_rate, scores)`.
pub fn fit_conformal(per_interval: &[(f64, Vec<f64>)]) -> Result<ConformalOffsets> {
    let mut intervals = Vec::with_capacity(per_interval.len());
    for (miss_rate, scores) in per_interval {
        intervals.push(ConformalInterval {
            miss_rate: *miss_rate,
            offset: conformal_offset(scores, *miss_rate)?,
        });
    }
    Ok(ConformalOffsets { intervals })
}

/// Widen (or shrink, when the offset is negative) an interval by the
/// fitted offset on both sides.
pub fn widen(lower: &[f64], upper: &[f64], offset: f64) -> (Vec<f64>, Vec<f64>) {
    let lo = lower.iter().map(|v| v - offset).collect();
    let hi = upper.iter().map(|v| v + offset).collect();
    (lo, hi)
}
