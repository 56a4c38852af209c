//! Extreme-event labeling.
//!
//! A heatwave is a run of at least [`MIN_EVENT_DAYS`] consecutive calendar
//! days whose daily maximum temperature strictly exceeds the 95th percentile
//! of daily maxima pooled by calendar month over the full series (January
//! days across all years share one pool). A cold snap is the symmetric
//! construct on daily minima and the 5th percentile. Ties resolve as
//! non-exceedance, so a constant series yields no events.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::series::LoadSeries;
use crate::math::stats::quantile_type7_unsorted;

/// Minimum run length, in days, for a qualifying event.
pub const MIN_EVENT_DAYS: usize = 3;
/// Upper-tail percentile for heatwaves.
pub const HEAT_PERCENTILE: f64 = 0.95;
/// Lower-tail percentile for cold snaps.
pub const COLD_PERCENTILE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Normal,
    Heatwave,
    ColdSnap,
}

/// A labeled event span. `start` and `end` are inclusive hour indices into
/// the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLabel {
    pub kind: EventKind,
    pub start: usize,
    pub end: usize,
}

impl EventLabel {
    pub fn duration_hours(&self) -> usize {
        self.end - self.start + 1
    }
}

#[derive(Debug, Clone, Copy)]
struct DaySummary {
    date: NaiveDate,
    first_hour: usize,
    last_hour: usize,
    max_temp: f64,
    min_temp: f64,
}

fn summarize_days(series: &LoadSeries) -> Vec<DaySummary> {
    let mut days: Vec<DaySummary> = Vec::new();
    for i in 0..series.len() {
        let temp = match series.temperature.get(i) {
            Some(t) => t,
            None => continue,
        };
        let date = series.date(i);
        match days.last_mut() {
            Some(day) if day.date == date => {
                day.last_hour = i;
                day.max_temp = day.max_temp.max(temp);
                day.min_temp = day.min_temp.min(temp);
            }
            _ => days.push(DaySummary {
                date,
                first_hour: i,
                last_hour: i,
                max_temp: temp,
                min_temp: temp,
            }),
        }
    }
    days
}

/// Per calendar month (1..=12), the (p95 of daily maxima, p5 of daily
/// minima) thresholds. Months absent from the series hold `None`.
fn monthly_thresholds(days: &[DaySummary]) -> [Option<(f64, f64)>; 12] {
    let mut thresholds = [None; 12];
    for month in 1..=12u32 {
        let mut maxima: Vec<f64> = days
            .iter()
            .filter(|d| d.date.month() == month)
            .map(|d| d.max_temp)
            .collect();
        if maxima.is_empty() {
            continue;
        }
        let mut minima: Vec<f64> = days
            .iter()
            .filter(|d| d.date.month() == month)
            .map(|d| d.min_temp)
            .collect();
        let hot = quantile_type7_unsorted(&mut maxima, HEAT_PERCENTILE);
        let cold = quantile_type7_unsorted(&mut minima, COLD_PERCENTILE);
        thresholds[(month - 1) as usize] = Some((hot, cold));
    }
    thresholds
}

fn collect_runs(
    days: &[DaySummary],
    flags: &[bool],
    kind: EventKind,
    out: &mut Vec<EventLabel>,
) {
    let mut i = 0;
    while i < days.len() {
        if !flags[i] {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < days.len()
            && flags[j + 1]
            && days[j + 1].date == days[j].date.succ_opt().expect("date overflow")
        {
            j += 1;
        }
        if j - i + 1 >= MIN_EVENT_DAYS {
            out.push(EventLabel {
                kind,
                start: days[i].first_hour,
                end: days[j].last_hour,
            });
        }
        i = j + 1;
    }
}

/// Label heatwaves and cold snaps. Pure in the series; repeated calls yield
/// identical labels. Hours outside every returned span are normal.
pub fn label_extreme_events(series: &LoadSeries) -> Vec<EventLabel> {
    let days = summarize_days(series);
    if days.is_empty() {
        return Vec::new();
    }
    let thresholds = monthly_thresholds(&days);
    let mut hot_flags = vec![false; days.len()];
    let mut cold_flags = vec![false; days.len()];
    for (i, day) in days.iter().enumerate() {
        if let Some((hot, cold)) = thresholds[(day.date.month() - 1) as usize] {
            hot_flags[i] = day.max_temp > hot;
            cold_flags[i] = day.min_temp < cold;
        }
    }
    let mut labels = Vec::new();
    collect_runs(&days, &hot_flags, EventKind::Heatwave, &mut labels);
    collect_runs(&days, &cold_flags, EventKind::ColdSnap, &mut labels);
    labels.sort_by_key(|l| (l.start, l.end));
    labels
}

/// Expand labels to a per-hour kind vector. When spans overlap, heatwave
/// takes precedence over cold snap.
pub fn hour_kinds(len: usize, labels: &[EventLabel]) -> Vec<EventKind> {
    let mut kinds = vec![EventKind::Normal; len];
    for pass in [EventKind::ColdSnap, EventKind::Heatwave] {
        for label in labels.iter().filter(|l| l.kind == pass) {
            for kind in kinds.iter_mut().take(label.end.min(len - 1) + 1).skip(label.start) {
                *kind = pass;
            }
        }
    }
    kinds
}
