//! Shared data plumbing for the experiment runners: series acquisition,
//! event-label sidecars, dataset construction, and per-window prediction.

use std::path::{Path, PathBuf};

use crate::calibration::{calibrate_distribution, CalibrationMap};
use crate::data::{
    build_dataset, clean_series, engineer_features, generate_synthetic, ingest_csv,
    label_extreme_events, EventLabel, HolidayCalendar, LoadSeries, Partition, Scaler, Window,
    WindowDataset,
};
use crate::inference::{predict_mc, predictive_distribution, PredictiveDistribution};
use crate::model::{Model, QuantileTensor};
use crate::{parallel, Error, Result};

use super::config::{DataConfig, ExperimentConfig};

/// Sidecar path for a CSV export: `foo.csv` → `foo.events.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("events.json")
}

pub fn write_event_sidecar(labels: &[EventLabel], path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(labels)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_event_sidecar(path: &Path) -> Result<Vec<EventLabel>> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::Format(format!("event sidecar {}: {e}", path.display())))
}

/// Acquire the cleaned series plus event labels. Synthetic data is labeled
/// in-process; CSV data reads the sidecar when present, otherwise the run
/// proceeds without event regimes (with a warning).
pub fn load_labeled_series(data: &DataConfig) -> Result<(LoadSeries, Vec<EventLabel>)> {
    let (mut series, labels) = match &data.csv {
        Some(path) => {
            let series = ingest_csv(path)?;
            let sidecar = sidecar_path(path);
            let labels = if sidecar.exists() {
                read_event_sidecar(&sidecar)?
            } else {
                log::warn!(
                    "no event sidecar at {}; reports will carry no heatwave/cold-snap slices",
                    sidecar.display()
                );
                Vec::new()
            };
            (series, labels)
        }
        None => {
            let series = generate_synthetic(&data.synth)?;
            let labels = label_extreme_events(&series);
            (series, labels)
        }
    };
    clean_series(&mut series)?;
    Ok((series, labels))
}

/// Full pipeline from config to a windowed dataset.
pub fn prepare_dataset(cfg: &ExperimentConfig) -> Result<(WindowDataset, Vec<EventLabel>)> {
    let (series, labels) = load_labeled_series(&cfg.data)?;
    let features = engineer_features(&series, &HolidayCalendar::default_us());
    let dataset = build_dataset(
        &features,
        &labels,
        cfg.model.lookback,
        cfg.model.horizon,
        cfg.windows.stride_train,
        cfg.model.horizon,
        cfg.windows.fractions,
    )?;
    Ok((dataset, labels))
}

/// Deterministic per-window MC seed (distinct windows draw distinct noise).
pub fn window_seed(base: u64, w: usize) -> u64 {
    base.wrapping_add((w as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// One evaluated window: its pooled predictive distribution plus the
/// quantile block actually reported (calibrated when a map is given).
pub struct WindowPrediction {
    pub dist: PredictiveDistribution,
    pub reported: QuantileTensor,
}

/// Run MC inference over a window list in parallel, optionally applying an
/// isotonic calibration map to the reported quantiles.
pub fn predict_windows(
    model: &Model,
    windows: &[&Window],
    t_passes: usize,
    seed: u64,
    map: Option<&CalibrationMap>,
) -> Result<Vec<WindowPrediction>> {
    let results: Vec<Result<WindowPrediction>> = parallel::map_indexed(windows.len(), |w| {
        let samples = predict_mc(model, &windows[w].x, t_passes, window_seed(seed, w))?;
        let dist = predictive_distribution(&samples)?;
        let reported = match map {
            Some(m) => calibrate_distribution(m, &dist)?,
            None => QuantileTensor {
                values: dist.pooled_quantiles.clone(),
                levels: dist.levels.clone(),
            },
        };
        Ok(WindowPrediction { dist, reported })
    });
    results.into_iter().collect()
}

/// Flatten per-window predictions into per-level forecast columns with
/// matching actuals and partition tags, one entry per (window, hour) cell.
pub fn flatten_predictions(
    windows: &[&Window],
    preds: &[WindowPrediction],
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Partition>) {
    let k_len = preds.first().map(|p| p.reported.levels.len()).unwrap_or(0);
    let mut per_level: Vec<Vec<f64>> = vec![Vec::new(); k_len];
    let mut actuals = Vec::new();
    let mut partitions = Vec::new();
    for (window, pred) in windows.iter().zip(preds) {
        for h in 0..window.y.len() {
            for (k, col) in per_level.iter_mut().enumerate() {
                col.push(pred.reported.values.get(h, k));
            }
            actuals.push(window.y[h]);
            partitions.push(window.partition);
        }
    }
    (per_level, actuals, partitions)
}

/// De-standardize a quantile tensor into MW.
pub fn to_mw(reported: &QuantileTensor, scaler: &Scaler) -> QuantileTensor {
    QuantileTensor {
        values: reported.values.map(|v| scaler.destandardize_load(v)),
        levels: reported.levels.clone(),
    }
}
