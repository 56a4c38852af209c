//! Series cleaning: rolling-window outlier removal on the load channel and
//! linear interpolation of short gaps.
//!
//! Outliers are judged against a centered 168-hour rolling window: a load
//! value farther than three rolling standard deviations from the rolling
//! median is marked missing. Afterwards every channel has gaps of at most
//! `MAX_INTERP_GAP` hours filled by linear interpolation between the valid
//! endpoints; longer gaps stay missing and are excluded later at windowing.

use super::series::{Channel, LoadSeries};
use crate::math::stats::quantile_type7_unsorted;
use crate::{Error, Result};

/// Rolling window width in hours (one week), centered on the judged hour.
pub const OUTLIER_WINDOW: usize = 168;
/// Deviation threshold in rolling standard deviations.
pub const OUTLIER_SIGMA: f64 = 3.0;
/// Longest gap, in hours, that interpolation is allowed to bridge.
pub const MAX_INTERP_GAP: usize = 6;
/// Minimum count of valid neighbours required to judge an hour at all.
const MIN_WINDOW_VALID: usize = 24;

/// Summary of what [`clean_series`] changed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanReport {
    /// Per-hour mask of load values removed as outliers.
    pub outlier_mask: Vec<bool>,
    /// Number of missing values (across all channels) filled by interpolation.
    pub interpolated: usize,
}

fn rolling_window(i: usize, n: usize) -> (usize, usize) {
    let half = OUTLIER_WINDOW / 2;
    let lo = i.saturating_sub(half);
    let hi = (i + half).min(n);
    (lo, hi)
}

fn detect_outliers(load: &Channel) -> Vec<bool> {
    let n = load.len();
    let mut mask = vec![false; n];
    let mut buf: Vec<f64> = Vec::with_capacity(OUTLIER_WINDOW);
    for i in 0..n {
        if !load.valid[i] {
            continue;
        }
        let (lo, hi) = rolling_window(i, n);
        buf.clear();
        buf.extend(
            (lo..hi).filter(|&j| load.valid[j]).map(|j| load.values[j]),
        );
        if buf.len() < MIN_WINDOW_VALID {
            continue;
        }
        let median = quantile_type7_unsorted(&mut buf, 0.5);
        let mean = buf.iter().sum::<f64>() / buf.len() as f64;
        let var = buf.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / buf.len() as f64;
        let std = var.sqrt();
        if (load.values[i] - median).abs() > OUTLIER_SIGMA * std {
            mask[i] = true;
        }
    }
    mask
}

fn interpolate_channel(channel: &mut Channel) -> usize {
    let n = channel.len();
    let mut filled = 0;
    let mut i = 0;
    while i < n {
        if channel.valid[i] {
            i += 1;
            continue;
        }
        let gap_start = i;
        while i < n && !channel.valid[i] {
            i += 1;
        }
        let gap_end = i; // exclusive
        let len = gap_end - gap_start;
        if len > MAX_INTERP_GAP || gap_start == 0 || gap_end == n {
            continue; // too long, or no anchor on one side
        }
        let left = channel.values[gap_start - 1];
        let right = channel.values[gap_end];
        let span = (len + 1) as f64;
        for (k, j) in (gap_start..gap_end).enumerate() {
            let t = (k + 1) as f64 / span;
            channel.set(j, left + t * (right - left));
            filled += 1;
        }
    }
    filled
}

/// Clean a series in place: flag load outliers as missing, then interpolate
/// short gaps on every channel. Requires at least one full rolling window of
/// hours; shorter series are rejected.
pub fn clean_series(series: &mut LoadSeries) -> Result<CleanReport> {
    if series.len() < OUTLIER_WINDOW {
        return Err(Error::Data(format!(
            "cleaning requires at least {OUTLIER_WINDOW} hours, got {}",
            series.len()
        )));
    }
    let outlier_mask = detect_outliers(&series.load);
    for (i, &flagged) in outlier_mask.iter().enumerate() {
        if flagged {
            series.load.unset(i);
        }
    }
    let mut interpolated = 0;
    for channel in [
        &mut series.load,
        &mut series.temperature,
        &mut series.humidity,
        &mut series.wind_speed,
        &mut series.irradiance,
        &mut series.renew_share,
    ] {
        interpolated += interpolate_channel(channel);
    }
    series.check_invariants()?;
    Ok(CleanReport { outlier_mask, interpolated })
}
