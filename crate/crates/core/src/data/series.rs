//! The raw hourly record: demand, weather covariates and calendar flags on a
//! dense hourly grid with explicit validity masks.

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One measured channel on the hourly grid. Invalid slots hold 0.0 and must
/// never be read; sentinel values would corrupt downstream statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Channel {
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl Channel {
    pub fn dense(values: Vec<f64>) -> Self {
        let valid = vec![true; values.len()];
        Self { values, valid }
    }

    pub fn invalid(len: usize) -> Self {
        Self { values: vec![0.0; len], valid: vec![false; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.valid[i].then(|| self.values[i])
    }

    pub fn set(&mut self, i: usize, v: f64) {
        self.values[i] = v;
        self.valid[i] = true;
    }

    pub fn unset(&mut self, i: usize) {
        self.values[i] = 0.0;
        self.valid[i] = false;
    }
}

/// Hourly demand series with weather covariates (Eq. 1 inputs). The grid is
/// dense: absent hours are represented by invalid slots, not skipped rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadSeries {
    pub start: DateTime<Utc>,
    pub load: Channel,
    pub temperature: Channel,
    pub humidity: Channel,
    pub wind_speed: Channel,
    pub irradiance: Channel,
    pub renew_share: Channel,
    pub holiday: Vec<bool>,
    pub weekend: Vec<bool>,
}

impl LoadSeries {
    /// Construct an all-invalid grid of `len` hours starting at `start`.
    pub fn empty(start: DateTime<Utc>, len: usize) -> Self {
        let weekend = (0..len)
            .map(|i| {
                let wd = (start + Duration::hours(i as i64)).weekday();
                wd == chrono::Weekday::Sat || wd == chrono::Weekday::Sun
            })
            .collect();
        Self {
            start,
            load: Channel::invalid(len),
            temperature: Channel::invalid(len),
            humidity: Channel::invalid(len),
            wind_speed: Channel::invalid(len),
            irradiance: Channel::invalid(len),
            renew_share: Channel::invalid(len),
            holiday: vec![false; len],
            weekend,
        }
    }

    pub fn len(&self) -> usize {
        self.load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load.is_empty()
    }

    pub fn timestamp(&self, i: usize) -> DateTime<Utc> {
        self.start + Duration::hours(i as i64)
    }

    pub fn hour_of_day(&self, i: usize) -> u32 {
        self.timestamp(i).hour()
    }

    /// Monday = 0 … Sunday = 6.
    pub fn day_of_week(&self, i: usize) -> u32 {
        self.timestamp(i).weekday().num_days_from_monday()
    }

    pub fn date(&self, i: usize) -> NaiveDate {
        self.timestamp(i).date_naive()
    }

    /// True when every channel is valid at hour `i`.
    pub fn row_valid(&self, i: usize) -> bool {
        self.load.valid[i]
            && self.temperature.valid[i]
            && self.humidity.valid[i]
            && self.wind_speed.valid[i]
            && self.irradiance.valid[i]
    }

    /// Validate the structural invariants (equal channel lengths, load ≥ 0).
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.len();
        for (name, len) in [
            ("temperature", self.temperature.len()),
            ("humidity", self.humidity.len()),
            ("wind_speed", self.wind_speed.len()),
            ("irradiance", self.irradiance.len()),
            ("renew_share", self.renew_share.len()),
            ("holiday", self.holiday.len()),
            ("weekend", self.weekend.len()),
        ] {
            if len != n {
                return Err(Error::Data(format!(
                    "channel {name} has length {len}, expected {n}"
                )));
            }
        }
        for i in 0..n {
            if let Some(v) = self.load.get(i) {
                if v < 0.0 {
                    return Err(Error::Data(format!(
                        "negative load {v} at {}",
                        self.timestamp(i)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Hour-aligned UTC timestamp or a descriptive error.
pub fn hour_aligned(ts: DateTime<Utc>) -> Result<DateTime<Utc>> {
    if ts.minute() != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
        return Err(Error::Data(format!("timestamp {ts} is not on an hour boundary")));
    }
    Ok(ts)
}

/// Midnight UTC of the given calendar date.
pub fn utc_hour(year: i32, month: u32, day: u32, hour: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(year, month, day, hour, 0, 0).unwrap()
}
