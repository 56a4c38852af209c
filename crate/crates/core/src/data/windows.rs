//! Windowing and chronological partitioning.
//!
//! A window pairs `L` consecutive input hours with the `H` target hours that
//! immediately follow. Candidate origins advance at `stride_train`; after
//! partitioning, the test partition is thinned to the non-overlapping stride
//! `stride_test` (normally `H`). Windows touching an invalid (gap) row are
//! dropped. Partitions are assigned in chronological window order with the
//! floor/remainder rule: `floor(fraction · N)` windows per partition, any
//! leftover appended to the test partition.

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::events::{hour_kinds, EventKind, EventLabel};
use super::features::{FeatureMatrix, Scaler, F_LOAD};
use crate::math::Matrix;
use crate::{Error, Result};

/// Default partition fractions (train, cal_fit, cal_eval, test).
pub const DEFAULT_FRACTIONS: [f64; 4] = [0.667, 0.056, 0.056, 0.221];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    CalFit,
    CalEval,
    Test,
}

pub const PARTITIONS: [Partition; 4] =
    [Partition::Train, Partition::CalFit, Partition::CalEval, Partition::Test];

/// One forecasting instance. `x` is the standardized `L × 14` input block,
/// `y` the `H` standardized load targets, `origin` the row index of the
/// first input hour.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Window {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub origin: usize,
    /// Timestamp of the first target hour (the forecast issue boundary).
    pub issue_time: DateTime<Utc>,
    pub partition: Partition,
    /// True when any target hour lies inside a labeled heatwave.
    pub heatwave: bool,
    /// True when any target hour lies inside a labeled cold snap.
    pub cold_snap: bool,
}

/// Window origins plus the geometry they were cut with; partition tags are
/// attached by [`chronological_split`].
#[derive(Debug, Clone)]
pub struct WindowPlan {
    pub origins: Vec<usize>,
    pub l: usize,
    pub h: usize,
    pub stride_train: usize,
    pub stride_test: usize,
    pub partitions: Vec<Partition>,
}

/// Fully materialized dataset.
#[derive(Debug, Clone)]
pub struct WindowDataset {
    pub windows: Vec<Window>,
    pub l: usize,
    pub h: usize,
    pub scaler: Scaler,
    pub start: DateTime<Utc>,
}

impl WindowDataset {
    pub fn partition(&self, p: Partition) -> Vec<&Window> {
        self.windows.iter().filter(|w| w.partition == p).collect()
    }

    pub fn partition_len(&self, p: Partition) -> usize {
        self.windows.iter().filter(|w| w.partition == p).count()
    }
}

/// Enumerate valid window origins over the feature matrix.
pub fn make_windows(
    matrix: &FeatureMatrix,
    l: usize,
    h: usize,
    stride_train: usize,
    stride_test: usize,
) -> Result<WindowPlan> {
    if l == 0 || h == 0 {
        return Err(Error::Config("window lengths L and H must be at least 1".into()));
    }
    if stride_train == 0 || stride_test == 0 {
        return Err(Error::Config("window strides must be at least 1".into()));
    }
    let n = matrix.n_rows();
    if n < l + h {
        return Err(Error::Config(format!(
            "need at least L + H = {} rows to cut one window, got {n}",
            l + h
        )));
    }
    // Prefix sums of invalid rows make the gap check O(1) per candidate.
    let mut invalid_before = vec![0usize; n + 1];
    for i in 0..n {
        invalid_before[i + 1] = invalid_before[i] + usize::from(!matrix.valid[i]);
    }
    let origins: Vec<usize> = (0..=n - l - h)
        .step_by(stride_train)
        .filter(|&s| invalid_before[s + l + h] == invalid_before[s])
        .collect();
    Ok(WindowPlan { origins, l, h, stride_train, stride_test, partitions: Vec::new() })
}

/// Partition counts under the floor/remainder rule.
fn partition_counts(n: usize, fractions: [f64; 4]) -> Result<[usize; 4]> {
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("partition fractions must sum to 1, got {sum}")));
    }
    if fractions.iter().any(|&f| f < 0.0) {
        return Err(Error::Config("partition fractions must be non-negative".into()));
    }
    let mut counts = [0usize; 4];
    for (c, f) in counts.iter_mut().zip(fractions) {
        *c = (f * n as f64).floor() as usize;
    }
    let assigned: usize = counts.iter().sum();
    counts[3] += n - assigned; // leftovers favor the test partition
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::Config(format!(
            "fractions {fractions:?} leave an empty partition for {n} windows (counts {counts:?})"
        )));
    }
    Ok(counts)
}

/// Tag each origin with its partition, in chronological order.
pub fn chronological_split(mut plan: WindowPlan, fractions: [f64; 4]) -> Result<WindowPlan> {
    let counts = partition_counts(plan.origins.len(), fractions)?;
    let mut partitions = Vec::with_capacity(plan.origins.len());
    for (part, &count) in PARTITIONS.iter().zip(&counts) {
        partitions.extend(std::iter::repeat(*part).take(count));
    }
    plan.partitions = partitions;
    Ok(plan)
}

/// Drop test windows so consecutive kept test origins are at least
/// `stride_test` apart (non-overlapping targets when `stride_test = H`).
pub fn thin_test_partition(plan: &mut WindowPlan) {
    let mut last_kept: Option<usize> = None;
    let mut keep = vec![true; plan.origins.len()];
    for (i, (&origin, &part)) in plan.origins.iter().zip(&plan.partitions).enumerate() {
        if part != Partition::Test {
            continue;
        }
        match last_kept {
            Some(prev) if origin < prev + plan.stride_test => keep[i] = false,
            _ => last_kept = Some(origin),
        }
    }
    let mut it = keep.iter();
    plan.origins.retain(|_| *it.next().unwrap());
    let mut it = keep.iter();
    plan.partitions.retain(|_| *it.next().unwrap());
}

/// Rows the scaler may see: everything up to and including the last hour
/// consumed by a train-partition window.
fn train_row_span(plan: &WindowPlan) -> Result<std::ops::Range<usize>> {
    let last_train = plan
        .origins
        .iter()
        .zip(&plan.partitions)
        .filter(|(_, p)| **p == Partition::Train)
        .map(|(&o, _)| o)
        .max()
        .ok_or_else(|| Error::Config("no train windows to fit the scaler on".into()))?;
    Ok(0..last_train + plan.l + plan.h)
}

/// Cut windows, split chronologically, thin the test partition, fit the
/// scaler on training rows only, and materialize standardized windows.
pub fn build_dataset(
    matrix: &FeatureMatrix,
    labels: &[EventLabel],
    l: usize,
    h: usize,
    stride_train: usize,
    stride_test: usize,
    fractions: [f64; 4],
) -> Result<WindowDataset> {
    let plan = make_windows(matrix, l, h, stride_train, stride_test)?;
    let mut plan = chronological_split(plan, fractions)?;
    thin_test_partition(&mut plan);
    let scaler = Scaler::fit(matrix, train_row_span(&plan)?)?;
    let standardized = scaler.apply(matrix);
    let kinds = hour_kinds(matrix.n_rows(), labels);
    let windows = plan
        .origins
        .iter()
        .zip(&plan.partitions)
        .map(|(&s, &part)| {
            let mut x = Matrix::zeros(l, standardized.data.cols());
            for r in 0..l {
                x.row_mut(r).copy_from_slice(standardized.data.row(s + r));
            }
            let y: Vec<f64> =
                (0..h).map(|k| standardized.data.get(s + l + k, F_LOAD)).collect();
            let target_kinds = &kinds[s + l..s + l + h];
            Window {
                x,
                y,
                origin: s,
                issue_time: matrix.start + Duration::hours((s + l) as i64),
                partition: part,
                heatwave: target_kinds.iter().any(|&k| k == EventKind::Heatwave),
                cold_snap: target_kinds.iter().any(|&k| k == EventKind::ColdSnap),
            }
        })
        .collect();
    Ok(WindowDataset { windows, l, h, scaler, start: matrix.start })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::features::{engineer_features, HolidayCalendar, N_FEATURES};
    use crate::data::series::utc_hour;
    use crate::data::synthetic::{generate_synthetic, SynthConfig};

    fn feature_matrix(n: usize) -> FeatureMatrix {
        FeatureMatrix {
            start: utc_hour(2021, 1, 1, 0),
            data: Matrix::from_fn(n, N_FEATURES, |r, c| (r * N_FEATURES + c) as f64 * 0.001),
            valid: vec![true; n],
        }
    }

    #[test]
    fn window_count_examples() {
        let m = feature_matrix(200);
        let plan = make_windows(&m, 168, 24, 1, 24).unwrap();
        assert_eq!(plan.origins.len(), 9);

        let m = feature_matrix(192);
        let plan = make_windows(&m, 168, 24, 1, 24).unwrap();
        assert_eq!(plan.origins, vec![0]);

        let m = feature_matrix(191);
        assert!(matches!(make_windows(&m, 168, 24, 1, 24), Err(Error::Config(_))));
    }

    #[test]
    fn windows_crossing_a_gap_are_dropped() {
        let mut m = feature_matrix(200);
        m.valid[195] = false;
        let plan = make_windows(&m, 168, 24, 1, 24).unwrap();
        // Origins 4..=8 span row 195; only 0..=3 survive.
        assert_eq!(plan.origins, vec![0, 1, 2, 3]);
    }

    #[test]
    fn split_counts_follow_floor_remainder_rule() {
        let m = feature_matrix(168 + 24 + 99); // exactly 100 stride-1 windows
        let plan = make_windows(&m, 168, 24, 1, 24).unwrap();
        assert_eq!(plan.origins.len(), 100);
        let plan = chronological_split(plan, DEFAULT_FRACTIONS).unwrap();
        let count = |p: Partition| plan.partitions.iter().filter(|&&q| q == p).count();
        assert_eq!(count(Partition::Train), 66);
        assert_eq!(count(Partition::CalFit), 5);
        assert_eq!(count(Partition::CalEval), 5);
        assert_eq!(count(Partition::Test), 24); // 22 floor + 2 leftover
    }

    #[test]
    fn degenerate_fractions_rejected() {
        let m = feature_matrix(300);
        let plan = make_windows(&m, 168, 24, 1, 24).unwrap();
        assert!(matches!(
            chronological_split(plan.clone(), [1.0, 0.0, 0.0, 0.0]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            chronological_split(plan, [0.5, 0.2, 0.2, 0.2]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn partition_origins_are_strictly_ordered() {
        let m = feature_matrix(168 + 24 + 199);
        let plan = make_windows(&m, 168, 24, 1, 24).unwrap();
        let plan = chronological_split(plan, DEFAULT_FRACTIONS).unwrap();
        let max_origin = |p: Partition| {
            plan.origins
                .iter()
                .zip(&plan.partitions)
                .filter(|(_, q)| **q == p)
                .map(|(&o, _)| o)
                .max()
                .unwrap()
        };
        let min_origin = |p: Partition| {
            plan.origins
                .iter()
                .zip(&plan.partitions)
                .filter(|(_, q)| **q == p)
                .map(|(&o, _)| o)
                .min()
                .unwrap()
        };
        assert!(max_origin(Partition::Train) < min_origin(Partition::CalFit));
        assert!(max_origin(Partition::CalFit) < min_origin(Partition::CalEval));
        assert!(max_origin(Partition::CalEval) < min_origin(Partition::Test));
    }

    #[test]
    fn test_partition_thinned_to_stride_h() {
        let m = feature_matrix(168 + 24 + 399);
        let plan = make_windows(&m, 168, 24, 1, 24).unwrap();
        let mut plan = chronological_split(plan, DEFAULT_FRACTIONS).unwrap();
        thin_test_partition(&mut plan);
        let test_origins: Vec<usize> = plan
            .origins
            .iter()
            .zip(&plan.partitions)
            .filter(|(_, p)| **p == Partition::Test)
            .map(|(&o, _)| o)
            .collect();
        assert!(!test_origins.is_empty());
        for pair in test_origins.windows(2) {
            assert!(pair[1] - pair[0] >= 24, "overlap between {} and {}", pair[0], pair[1]);
        }
        // Train windows keep stride 1.
        let train_origins: Vec<usize> = plan
            .origins
            .iter()
            .zip(&plan.partitions)
            .filter(|(_, p)| **p == Partition::Train)
            .map(|(&o, _)| o)
            .collect();
        assert_eq!(train_origins[1] - train_origins[0], 1);
    }

    #[test]
    fn build_dataset_standardizes_and_pairs_targets() {
        let cfg = SynthConfig { hours: 1200, seed: 3, ..SynthConfig::default() };
        let series = generate_synthetic(&cfg).unwrap();
        let matrix = engineer_features(&series, &HolidayCalendar::default_us());
        let ds = build_dataset(&matrix, &[], 168, 24, 1, 24, DEFAULT_FRACTIONS).unwrap();
        assert!(ds.partition_len(Partition::Train) > 0);
        assert!(ds.partition_len(Partition::Test) > 0);
        // Targets are the standardized load values immediately after the
        // inputs: destandardize and compare to the raw series.
        let w = &ds.windows[0];
        assert_eq!(w.x.shape(), (168, N_FEATURES));
        assert_eq!(w.y.len(), 24);
        for k in 0..24 {
            let mw = ds.scaler.destandardize_load(w.y[k]);
            let raw = series.load.values[w.origin + 168 + k];
            assert!((mw - raw).abs() < 1e-9, "target {k}: {mw} vs {raw}");
        }
        assert_eq!(w.issue_time, series.timestamp(w.origin + 168));
    }

    #[test]
    fn scaler_sees_only_training_rows() {
        let cfg = SynthConfig { hours: 1500, seed: 4, ..SynthConfig::default() };
        let series = generate_synthetic(&cfg).unwrap();
        let matrix = engineer_features(&series, &HolidayCalendar::default_us());
        let ds = build_dataset(&matrix, &[], 168, 24, 1, 24, DEFAULT_FRACTIONS).unwrap();
        let last_train_origin = ds
            .windows
            .iter()
            .filter(|w| w.partition == Partition::Train)
            .map(|w| w.origin)
            .max()
            .unwrap();
        let refit = Scaler::fit(&matrix, 0..last_train_origin + 168 + 24).unwrap();
        assert_eq!(ds.scaler.mean, refit.mean);
        let full = Scaler::fit(&matrix, 0..matrix.n_rows()).unwrap();
        assert_ne!(ds.scaler.mean, full.mean, "scaler must not see test rows");
    }

    #[test]
    fn event_overlap_tags_windows() {
        let cfg = SynthConfig { hours: 1200, seed: 5, ..SynthConfig::default() };
        let series = generate_synthetic(&cfg).unwrap();
        let matrix = engineer_features(&series, &HolidayCalendar::default_us());
        // Synthetic label covering target hours of early windows only.
        let labels = vec![EventLabel {
            kind: EventKind::Heatwave,
            start: 170,
            end: 200,
        }];
        let ds = build_dataset(&matrix, &labels, 168, 24, 1, 24, DEFAULT_FRACTIONS).unwrap();
        let w0 = &ds.windows[0]; // targets 168..192 overlap 170..=200
        assert!(w0.heatwave);
        assert!(!w0.cold_snap);
        let far = ds.windows.iter().find(|w| w.origin > 300).unwrap();
        assert!(!far.heatwave);
    }

    #[test]
    fn window_integrity_no_gap_between_input_and_target() {
        let m = feature_matrix(400);
        let plan = make_windows(&m, 168, 24, 2, 24).unwrap();
        for &s in &plan.origins {
            assert!(s + 168 + 24 <= 400);
        }
        // Stride honored.
        for pair in plan.origins.windows(2) {
            assert_eq!(pair[1] - pair[0], 2);
        }
    }
}
