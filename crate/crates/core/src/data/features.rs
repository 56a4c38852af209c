//! Feature engineering: derived weather indices, cyclical calendar
//! encodings, and train-only standardization.

use std::ops::Range;

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::series::LoadSeries;
use crate::math::Matrix;
use crate::{Error, Result};

pub const N_FEATURES: usize = 14;
pub const F_LOAD: usize = 0;
pub const F_TEMP: usize = 1;
pub const F_HUMIDITY: usize = 2;
pub const F_WIND: usize = 3;
pub const F_IRRADIANCE: usize = 4;
pub const F_HEAT_INDEX: usize = 5;
pub const F_WIND_CHILL: usize = 6;
pub const F_SIN_HOUR: usize = 7;
pub const F_COS_HOUR: usize = 8;
pub const F_SIN_DOW: usize = 9;
pub const F_COS_DOW: usize = 10;
pub const F_HOLIDAY: usize = 11;
pub const F_WEEKEND: usize = 12;
pub const F_RENEW: usize = 13;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "load", "temp_c", "humidity_pct", "wind_ms", "irradiance_wm2", "heat_index_c",
    "wind_chill_c", "sin_hour", "cos_hour", "sin_dow", "cos_dow", "holiday", "weekend",
    "renew_share",
];

/// Columns eligible for standardization: the physical channels. Cyclical
/// encodings, flags and the renewable fraction are already bounded and are
/// left untouched so their structural invariants (s²+c²=1, {0,1}) survive.
const STANDARDIZED: [bool; N_FEATURES] = [
    true, true, true, true, true, true, true, false, false, false, false, false, false, false,
];

/// Fixed-date holiday calendar (month, day).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolidayCalendar {
    pub month_days: Vec<(u32, u32)>,
}

impl HolidayCalendar {
    /// New Year's Day, Independence Day, Christmas.
    pub fn default_us() -> Self {
        Self { month_days: vec![(1, 1), (7, 4), (12, 25)] }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.month_days.iter().any(|&(m, d)| date.month() == m && date.day() == d)
    }
}

/// Hourly feature rows plus a row-validity mask inherited from the series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub start: DateTime<Utc>,
    pub data: Matrix,
    pub valid: Vec<bool>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.data.rows()
    }
}

/// NOAA heat index (Rothfusz regression with the NWS low/high-humidity
/// adjustments), active for temperatures at or above 26.7 °C; passthrough
/// otherwise. Inputs in °C and %, output in °C.
pub fn heat_index_c(temp_c: f64, humidity_pct: f64) -> f64 {
    if temp_c < 26.7 {
        return temp_c;
    }
    let t = temp_c * 9.0 / 5.0 + 32.0;
    let rh = humidity_pct;
    let mut hi = -42.379 + 2.049_015_23 * t + 10.143_331_27 * rh
        - 0.224_755_41 * t * rh
        - 6.837_83e-3 * t * t
        - 5.481_717e-2 * rh * rh
        + 1.228_74e-3 * t * t * rh
        + 8.528_2e-4 * t * rh * rh
        - 1.99e-6 * t * t * rh * rh;
    if rh < 13.0 && (80.0..=112.0).contains(&t) {
        hi -= (13.0 - rh) / 4.0 * ((17.0 - (t - 95.0).abs()) / 17.0).max(0.0).sqrt();
    } else if rh > 85.0 && (80.0..=87.0).contains(&t) {
        hi += (rh - 85.0) / 10.0 * (87.0 - t) / 2.0;
    }
    (hi - 32.0) * 5.0 / 9.0
}

/// NOAA (2001) wind chill, active at or below 10 °C with wind of at least
/// 1.34 m/s; passthrough otherwise. Wind converted to km/h internally.
pub fn wind_chill_c(temp_c: f64, wind_ms: f64) -> f64 {
    if temp_c > 10.0 || wind_ms < 1.34 {
        return temp_c;
    }
    let v = (wind_ms * 3.6).powf(0.16);
    13.12 + 0.6215 * temp_c - 11.37 * v + 0.3965 * temp_c * v
}

/// Build the raw (unstandardized) feature matrix from a cleaned series.
pub fn engineer_features(series: &LoadSeries, calendar: &HolidayCalendar) -> FeatureMatrix {
    let n = series.len();
    let tau = 2.0 * std::f64::consts::PI;
    let mut data = Matrix::zeros(n, N_FEATURES);
    let mut valid = Vec::with_capacity(n);
    for i in 0..n {
        let ok = series.row_valid(i);
        valid.push(ok);
        if !ok {
            continue;
        }
        let t = series.temperature.values[i];
        let row = data.row_mut(i);
        row[F_LOAD] = series.load.values[i];
        row[F_TEMP] = t;
        row[F_HUMIDITY] = series.humidity.values[i];
        row[F_WIND] = series.wind_speed.values[i];
        row[F_IRRADIANCE] = series.irradiance.values[i];
        row[F_HEAT_INDEX] = heat_index_c(t, series.humidity.values[i]);
        row[F_WIND_CHILL] = wind_chill_c(t, series.wind_speed.values[i]);
        let hour = series.hour_of_day(i) as f64;
        let dow = series.day_of_week(i) as f64;
        row[F_SIN_HOUR] = (tau * hour / 24.0).sin();
        row[F_COS_HOUR] = (tau * hour / 24.0).cos();
        row[F_SIN_DOW] = (tau * dow / 7.0).sin();
        row[F_COS_DOW] = (tau * dow / 7.0).cos();
        row[F_HOLIDAY] = if calendar.contains(series.date(i)) { 1.0 } else { 0.0 };
        row[F_WEEKEND] = if series.weekend[i] { 1.0 } else { 0.0 };
        // The renewable share is optional; absent values stay 0.
        row[F_RENEW] = series.renew_share.get(i).unwrap_or(0.0);
    }
    FeatureMatrix { start: series.start, data, valid }
}

/// Per-column standardization statistics fitted on training rows only.
/// Population standard deviation, so transformed training columns have
/// variance exactly one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns actually standardized by `apply`.
    pub scaled: Vec<bool>,
    /// Eligible columns skipped because they were constant on train rows.
    pub constant: Vec<bool>,
}

impl Scaler {
    /// Fit on the valid rows of `matrix` within `train_rows`.
    pub fn fit(matrix: &FeatureMatrix, train_rows: Range<usize>) -> Result<Self> {
        let rows: Vec<usize> = train_rows
            .filter(|&i| i < matrix.n_rows() && matrix.valid[i])
            .collect();
        if rows.is_empty() {
            return Err(Error::Config("scaler fit: empty training partition".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; N_FEATURES];
        let mut std = vec![1.0; N_FEATURES];
        let mut scaled = vec![false; N_FEATURES];
        let mut constant = vec![false; N_FEATURES];
        for c in 0..N_FEATURES {
            if !STANDARDIZED[c] {
                continue;
            }
            let m = rows.iter().map(|&i| matrix.data.get(i, c)).sum::<f64>() / n;
            let var = rows
                .iter()
                .map(|&i| {
                    let d = matrix.data.get(i, c) - m;
                    d * d
                })
                .sum::<f64>()
                / n;
            if var > 0.0 {
                mean[c] = m;
                std[c] = var.sqrt();
                scaled[c] = true;
            } else {
                constant[c] = true;
            }
        }
        Ok(Self { mean, std, scaled, constant })
    }

    /// Standardize every valid row with the fitted statistics.
    pub fn apply(&self, matrix: &FeatureMatrix) -> FeatureMatrix {
        let mut out = matrix.clone();
        for i in 0..out.n_rows() {
            if !out.valid[i] {
                continue;
            }
            let row = out.data.row_mut(i);
            for c in 0..N_FEATURES {
                if self.scaled[c] {
                    row[c] = (row[c] - self.mean[c]) / self.std[c];
                }
            }
        }
        out
    }

    pub fn standardize(&self, col: usize, v: f64) -> f64 {
        if self.scaled[col] {
            (v - self.mean[col]) / self.std[col]
        } else {
            v
        }
    }

    pub fn destandardize(&self, col: usize, v: f64) -> f64 {
        if self.scaled[col] {
            v * self.std[col] + self.mean[col]
        } else {
            v
        }
    }

    /// Convert a standardized load value back to MW.
    pub fn destandardize_load(&self, v: f64) -> f64 {
        self.destandardize(F_LOAD, v)
    }

    /// MW per standardized unit for widths/variances.
    pub fn load_std(&self) -> f64 {
        if self.scaled[F_LOAD] {
            self.std[F_LOAD]
        } else {
            1.0
        }
    }
}
