//! Mechanism-ablation ladder: six rungs from a deterministic point
//! forecaster up to the fully calibrated probabilistic model, trained on
//! shared data with a shared seed and scored on the shared test split.

use std::path::Path;

use crate::calibration::{calibrate_distribution, fit_isotonic_checked, CalibrationMap};
use crate::data::{Partition, Scaler, Window, WindowDataset};
use crate::inference::{predict_mc, predictive_distribution};
use crate::metrics::{crps_quantile, crps_samples};
use crate::model::{level_index, Model, ModelConfig};
use crate::training::train;
use crate::{parallel, Error, Result};

use super::config::ExperimentConfig;
use super::pipeline::{flatten_predictions, predict_windows, prepare_dataset, window_seed};

/// One row of the ablation table. Interval columns are absent for the
/// deterministic rung, which produces no interval.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub rung: char,
    pub label: String,
    pub mae_mw: f64,
    pub rmse_mw: f64,
    pub crps_std: f64,
    pub picp_90: Option<f64>,
    pub mpiw_90_mw: Option<f64>,
}

fn rung_config(base: &ModelConfig, rung: char) -> ModelConfig {
    let mut cfg = base.clone();
    cfg.use_mc_dropout = matches!(rung, 'B' | 'C' | 'D' | 'E' | 'F');
    cfg.use_variational = matches!(rung, 'C' | 'D' | 'E' | 'F');
    cfg.use_stochastic_attention = matches!(rung, 'D' | 'E' | 'F');
    if matches!(rung, 'A' | 'B' | 'C' | 'D') {
        cfg = cfg.with_scalar_head();
    }
    cfg
}

fn rung_label(rung: char) -> &'static str {
    match rung {
        'A' => "deterministic",
        'B' => "+ mc_dropout",
        'C' => "+ variational_ffn",
        'D' => "+ stochastic_attention",
        'E' => "+ quantile_head",
        'F' => "+ isotonic_calibration",
        _ => unreachable!(),
    }
}

/// Linear-interpolation empirical quantile of a sorted sample.
fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (n - 1) as f64 * p;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < n {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[n - 1]
    }
}

struct CellScores {
    abs_err_std: f64,
    sq_err_std: f64,
    crps_std: f64,
    covered_90: Option<bool>,
    width_90_std: Option<f64>,
}

fn accumulate(cells: Vec<CellScores>, rung: char, scaler: &Scaler) -> AblationRow {
    let n = cells.len() as f64;
    let s = scaler.load_std();
    let mae = cells.iter().map(|c| c.abs_err_std).sum::<f64>() / n;
    let mse = cells.iter().map(|c| c.sq_err_std).sum::<f64>() / n;
    let crps = cells.iter().map(|c| c.crps_std).sum::<f64>() / n;
    let has_intervals = cells.iter().all(|c| c.covered_90.is_some());
    let (picp, mpiw) = if has_intervals {
        let hits = cells.iter().filter(|c| c.covered_90 == Some(true)).count() as f64;
        let width = cells.iter().map(|c| c.width_90_std.unwrap()).sum::<f64>() / n;
        (Some(hits / n), Some(width * s))
    } else {
        (None, None)
    };
    AblationRow {
        rung,
        label: rung_label(rung).to_string(),
        mae_mw: mae * s,
        rmse_mw: mse.sqrt() * s,
        crps_std: crps,
        picp_90: picp,
        mpiw_90_mw: mpiw,
    }
}

fn evaluate_rung(
    rung: char,
    model: &Model,
    dataset: &WindowDataset,
    t_passes: usize,
    seed: u64,
) -> Result<AblationRow> {
    let levels = &model.cfg.quantile_levels;
    let test: Vec<&Window> = dataset.partition(Partition::Test);
    if test.is_empty() {
        return Err(Error::Data("test partition is empty".into()));
    }

    // F calibrates on cal_fit before reading test quantiles.
    let map: Option<CalibrationMap> = if rung == 'F' {
        let fit_windows = dataset.partition(Partition::CalFit);
        if fit_windows.is_empty() {
            return Err(Error::Data("cal_fit partition is empty".into()));
        }
        let preds = predict_windows(model, &fit_windows, t_passes, seed, None)?;
        let (per_level, actuals, partitions) = flatten_predictions(&fit_windows, &preds);
        Some(fit_isotonic_checked(&per_level, &actuals, levels, &partitions)?)
    } else {
        None
    };

    let results: Vec<Result<Vec<CellScores>>> = parallel::map_indexed(test.len(), |w| {
        let window = test[w];
        let t = if rung == 'A' { 1 } else { t_passes };
        let samples = predict_mc(model, &window.x, t, window_seed(seed, w))?;
        let mut cells = Vec::with_capacity(window.y.len());
        match rung {
            'A' => {
                // Single deterministic pass; CRPS of a point forecast is MAE.
                for (h, &y) in window.y.iter().enumerate() {
                    let m = samples.pass_median(0, h)?;
                    cells.push(CellScores {
                        abs_err_std: (m - y).abs(),
                        sq_err_std: (m - y) * (m - y),
                        crps_std: crps_samples(&[m], y)?,
                        covered_90: None,
                        width_90_std: None,
                    });
                }
            }
            'B' | 'C' | 'D' => {
                // Sample-based scores over the T per-pass medians.
                for (h, &y) in window.y.iter().enumerate() {
                    let mut draws: Vec<f64> = (0..samples.n_passes())
                        .map(|t| samples.pass_median(t, h))
                        .collect::<Result<_>>()?;
                    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let med = empirical_quantile(&draws, 0.5);
                    let lo = empirical_quantile(&draws, 0.05);
                    let hi = empirical_quantile(&draws, 0.95);
                    cells.push(CellScores {
                        abs_err_std: (med - y).abs(),
                        sq_err_std: (med - y) * (med - y),
                        crps_std: crps_samples(&draws, y)?,
                        covered_90: Some(lo <= y && y <= hi),
                        width_90_std: Some(hi - lo),
                    });
                }
            }
            'E' | 'F' => {
                let dist = predictive_distribution(&samples)?;
                let tensor = match &map {
                    Some(m) => calibrate_distribution(m, &dist)?,
                    None => crate::model::QuantileTensor {
                        levels: dist.levels.clone(),
                        values: dist.pooled_quantiles.clone(),
                    },
                };
                let q05 = level_index(levels, 0.05)?;
                let q50 = level_index(levels, 0.50)?;
                let q95 = level_index(levels, 0.95)?;
                for (h, &y) in window.y.iter().enumerate() {
                    let row = tensor.values.row(h);
                    let med = row[q50];
                    cells.push(CellScores {
                        abs_err_std: (med - y).abs(),
                        sq_err_std: (med - y) * (med - y),
                        crps_std: crps_quantile(row, levels, y)?,
                        covered_90: Some(row[q05] <= y && y <= row[q95]),
                        width_90_std: Some(row[q95] - row[q05]),
                    });
                }
            }
            _ => unreachable!(),
        }
        Ok(cells)
    });
    let per_window: Vec<Vec<CellScores>> = results.into_iter().collect::<Result<_>>()?;

    let cells: Vec<CellScores> = per_window.into_iter().flatten().collect();
    Ok(accumulate(cells, rung, &dataset.scaler))
}

fn write_rows(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut out = String::from("rung,label,mae_mw,rmse_mw,crps_std,picp_90,mpiw_90_mw\n");
    for r in rows {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.rung,
            r.label,
            r.mae_mw,
            r.rmse_mw,
            r.crps_std,
            opt(r.picp_90),
            opt(r.mpiw_90_mw)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Train and score all six rungs, rewriting `out_csv` after each rung so an
/// aborted run still leaves the completed rows on disk.
pub fn run_ablate(cfg: &ExperimentConfig, out_csv: &Path) -> Result<Vec<AblationRow>> {
    cfg.validate()?;
    let (dataset, _labels) = prepare_dataset(cfg)?;
    let mut rows = Vec::with_capacity(6);
    for rung in ['A', 'B', 'C', 'D', 'E', 'F'] {
        let model_cfg = rung_config(&cfg.model, rung);
        let model = Model::new(model_cfg, cfg.train.seed)?;
        let outcome = train(&model, &dataset, &cfg.train)?;
        let row = evaluate_rung(
            rung,
            &outcome.best,
            &dataset,
            cfg.inference.t_passes,
            cfg.inference.seed,
        )?;
        log::info!(
            "ablation rung {} ({}): crps_std {:.4}",
            row.rung,
            row.label,
            row.crps_std
        );
        rows.push(row);
        write_rows(out_csv, &rows)?;
    }
    Ok(rows)
}
