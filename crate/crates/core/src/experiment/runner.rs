//! Library implementations behind the CLI subcommands. Every runner is a
//! pure function of its config and seed: fixed inputs yield byte-identical
//! artifacts.

use std::path::{Path, PathBuf};

use crate::calibration::{
    conformity_scores, fit_conformal, fit_isotonic_checked, measure_coverage, CalibrationMap,
    ConformalOffsets,
};
use crate::data::{export_csv, generate_synthetic, label_extreme_events, Partition, SynthConfig};
use crate::metrics::{EvalInstance, MetricsReport};
use crate::model::{enforce_noncrossing, Checkpoint, Model};
use crate::training::{train, TrainOutcome};
use crate::{Error, Result};

use super::config::{CalibrationMethod, ExperimentConfig};
use super::pipeline::{
    flatten_predictions, predict_windows, prepare_dataset, sidecar_path, to_mw,
    write_event_sidecar,
};
use super::plots::{interval_trace_svg, reliability_svg, TracePoint};
use super::rundir::RunDir;

/// Artifacts produced by `generate`.
#[derive(Debug, Clone)]
pub struct GenerateOutcome {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
    pub n_hours: usize,
    pub n_events: usize,
}

/// Generate a synthetic series and write the CSV plus event sidecar.
pub fn run_generate(synth: &SynthConfig, csv: &Path) -> Result<GenerateOutcome> {
    let series = generate_synthetic(synth)?;
    let labels = label_extreme_events(&series);
    export_csv(&series, csv)?;
    let sidecar = sidecar_path(csv);
    write_event_sidecar(&labels, &sidecar)?;
    Ok(GenerateOutcome { csv: csv.to_path_buf(), sidecar, n_hours: series.len(), n_events: labels.len() })
}

/// Outcome of `train`: the populated run directory plus the in-memory
/// training result.
pub struct TrainRunOutcome {
    pub run: RunDir,
    pub outcome: TrainOutcome,
}

/// Train a model from config and write the run directory
/// `{config.json, history.csv, best.ckpt, final.ckpt}`.
pub fn run_train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainRunOutcome> {
    cfg.validate()?;
    let (dataset, _labels) = prepare_dataset(cfg)?;
    let model = Model::new(cfg.model.clone(), cfg.train.seed)?;
    let outcome = train(&model, &dataset, &cfg.train)?;

    let run = RunDir::create(out)?;
    cfg.write_json(&run.config_path())?;
    outcome.history.write_csv(&run.history_path())?;
    let best_epoch = outcome.history.best().epoch;
    let final_epoch = outcome.history.records.last().map(|r| r.epoch).unwrap_or(0);
    Checkpoint::from_model(&outcome.best, &dataset.scaler, cfg.train.seed, best_epoch)
        .save(&run.best_checkpoint_path())?;
    Checkpoint::from_model(&outcome.final_model, &dataset.scaler, cfg.train.seed, final_epoch)
        .save(&run.final_checkpoint_path())?;
    Ok(TrainRunOutcome { run, outcome })
}

/// Predict over the test partition with the best checkpoint and write
/// `forecasts.csv`. Applies the isotonic map when one has been fitted.
pub fn run_predict(run: &RunDir) -> Result<PathBuf> {
    let cfg = run.load_config()?;
    let (model, scaler) = run.load_best()?;
    if model.cfg != cfg.model {
        return Err(Error::Format(
            "checkpoint architecture disagrees with the config snapshot".into(),
        ));
    }
    let map = run.load_calibration()?;
    let (dataset, _labels) = prepare_dataset(&cfg)?;
    let windows = dataset.partition(Partition::Test);
    if windows.is_empty() {
        return Err(Error::Data("test partition is empty".into()));
    }
    let predictions =
        predict_windows(&model, &windows, cfg.inference.t_passes, cfg.inference.seed, map.as_ref())?;
    let mut rows = Vec::with_capacity(windows.len());
    for (window, pred) in windows.iter().zip(&predictions) {
        let mut view = pred.dist.mw_view(&scaler);
        // Report calibrated quantiles when a map is active.
        view.pooled_quantiles_mw = to_mw(&pred.reported, &scaler).values;
        rows.push((window.issue_time, view));
    }
    let path = run.forecasts_path();
    crate::inference::export_forecasts(&path, &rows, &model.cfg.quantile_levels)?;
    Ok(path)
}

/// Outcome of `calibrate`: mean absolute coverage deviation on cal_eval
/// before and after the adjustment.
#[derive(Debug, Clone)]
pub struct CalibrateOutcome {
    pub method: CalibrationMethod,
    pub before_mean_dev: f64,
    pub after_mean_dev: f64,
}

/// Fit the chosen calibration method on cal_fit, verify on cal_eval, and
/// write the artifact plus a before/after coverage table.
pub fn run_calibrate(run: &RunDir, method: CalibrationMethod) -> Result<CalibrateOutcome> {
    let cfg = run.load_config()?;
    let (model, _scaler) = run.load_best()?;
    let (dataset, _labels) = prepare_dataset(&cfg)?;
    let levels = model.cfg.quantile_levels.clone();
    let k_len = levels.len();

    let fit_windows = dataset.partition(Partition::CalFit);
    let eval_windows = dataset.partition(Partition::CalEval);
    if fit_windows.is_empty() || eval_windows.is_empty() {
        return Err(Error::Data("calibration needs non-empty cal_fit and cal_eval".into()));
    }

    // Raw pooled quantiles on both calibration slices (standardized units;
    // coverage is scale-free).
    let fit_preds =
        predict_windows(&model, &fit_windows, cfg.inference.t_passes, cfg.inference.seed, None)?;
    let eval_preds =
        predict_windows(&model, &eval_windows, cfg.inference.t_passes, cfg.inference.seed, None)?;

    let (fit_per_level, fit_actuals, fit_partitions) =
        flatten_predictions(&fit_windows, &fit_preds);
    let (eval_per_level, eval_actuals, _) = flatten_predictions(&eval_windows, &eval_preds);

    let map = match method {
        CalibrationMethod::Isotonic => {
            fit_isotonic_checked(&fit_per_level, &fit_actuals, &levels, &fit_partitions)?
        }
        // Conformal adjusts intervals directly; `none` records an identity map.
        _ => CalibrationMap::identity(&levels),
    };

    // Interval offsets are only fitted for the conformal method.
    let mut offsets: Option<ConformalOffsets> = None;
    if method == CalibrationMethod::Conformal {
        let idx = |alpha: f64| crate::model::level_index(&levels, alpha);
        let (q05, q10, q90, q95) = (idx(0.05)?, idx(0.10)?, idx(0.90)?, idx(0.95)?);
        let scores_for = |lo: usize, hi: usize| {
            conformity_scores(&fit_per_level[lo], &fit_per_level[hi], &fit_actuals)
        };
        let fitted = fit_conformal(&[
            (0.2, scores_for(q10, q90)?),
            (0.1, scores_for(q05, q95)?),
        ])?;
        run.write_json(&run.conformal_path(), &fitted)?;
        offsets = Some(fitted);
    }
    if method != CalibrationMethod::Conformal {
        run.write_json(&run.calibration_path(), &map)?;
    }

    // Before/after one-sided coverage per level on cal_eval.
    let mut table = String::from("level,coverage_before,coverage_after\n");
    let mut before_dev = 0.0;
    let mut after_dev = 0.0;
    for (k, &alpha) in levels.iter().enumerate() {
        let before = measure_coverage(&eval_per_level[k], &eval_actuals)?;
        let after_forecasts: Vec<f64> = match (&offsets, method) {
            (Some(off), CalibrationMethod::Conformal) => {
                // Conformal moves the 80%/90% interval edges only.
                let shift = match alpha {
                    a if a == 0.05 => -off.offset(0.1).unwrap_or(0.0),
                    a if a == 0.95 => off.offset(0.1).unwrap_or(0.0),
                    a if a == 0.10 => -off.offset(0.2).unwrap_or(0.0),
                    a if a == 0.90 => off.offset(0.2).unwrap_or(0.0),
                    _ => 0.0,
                };
                eval_per_level[k].iter().map(|q| q + shift).collect()
            }
            _ => {
                // Re-read each eval row at the adjusted level.
                let mut out = Vec::with_capacity(eval_actuals.len());
                let adjusted = map.map(alpha);
                let n_rows = eval_actuals.len();
                for row_idx in 0..n_rows {
                    let row: Vec<f64> =
                        (0..k_len).map(|kk| eval_per_level[kk][row_idx]).collect();
                    out.push(crate::inference::quantile_from_row(&levels, &row, adjusted)?);
                }
                out
            }
        };
        let after = measure_coverage(&after_forecasts, &eval_actuals)?;
        before_dev += (before - alpha).abs();
        after_dev += (after - alpha).abs();
        table.push_str(&format!("{alpha},{before},{after}\n"));
    }
    std::fs::write(run.coverage_table_path(), table)?;
    Ok(CalibrateOutcome {
        method,
        before_mean_dev: before_dev / k_len as f64,
        after_mean_dev: after_dev / k_len as f64,
    })
}

/// Evaluate the best checkpoint on the test partition: metrics report
/// (JSON + CSV), reliability curve (CSV + SVG), and an interval-trace SVG.
/// Uses the fitted calibration artifacts when present.
pub fn run_evaluate(run: &RunDir) -> Result<MetricsReport> {
    let cfg = run.load_config()?;
    let (model, scaler) = run.load_best()?;
    if model.cfg != cfg.model {
        return Err(Error::Format(
            "checkpoint architecture disagrees with the config snapshot".into(),
        ));
    }
    let map = run.load_calibration()?;
    let offsets = run.load_conformal()?;
    let (dataset, _labels) = prepare_dataset(&cfg)?;
    let windows = dataset.partition(Partition::Test);
    if windows.is_empty() {
        return Err(Error::Data("test partition is empty".into()));
    }
    let levels = model.cfg.quantile_levels.clone();
    let predictions =
        predict_windows(&model, &windows, cfg.inference.t_passes, cfg.inference.seed, map.as_ref())?;

    let mut instances = Vec::with_capacity(windows.len());
    for (window, pred) in windows.iter().zip(&predictions) {
        let mut q_std = pred.reported.values.clone();
        if let Some(off) = &offsets {
            let idx = |alpha: f64| crate::model::level_index(&levels, alpha);
            let widen = [
                (idx(0.05)?, idx(0.95)?, off.offset(0.1).unwrap_or(0.0)),
                (idx(0.10)?, idx(0.90)?, off.offset(0.2).unwrap_or(0.0)),
            ];
            for h in 0..q_std.rows() {
                for &(lo, hi, o) in &widen {
                    q_std.set(h, lo, q_std.get(h, lo) - o);
                    q_std.set(h, hi, q_std.get(h, hi) + o);
                }
            }
            enforce_noncrossing(&mut q_std);
        }
        // Hard non-crossing assertion on every emitted row.
        for h in 0..q_std.rows() {
            if q_std.row(h).windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Data(format!(
                    "crossed quantile row emitted at window origin {} hour {h}",
                    window.origin
                )));
            }
        }
        let q_mw = q_std.map(|v| scaler.destandardize_load(v));
        instances.push(EvalInstance {
            quantiles_std: q_std,
            quantiles_mw: q_mw,
            actual_std: window.y.clone(),
            actual_mw: window.y.iter().map(|v| scaler.destandardize_load(*v)).collect(),
            heatwave: window.heatwave,
            cold_snap: window.cold_snap,
        });
    }
    let report = crate::metrics::compute_report(&instances, &levels)?;
    report.write_json(&run.metrics_json_path())?;
    report.write_csv(&run.metrics_csv_path())?;
    report.write_reliability_csv(&run.reliability_csv_path())?;
    std::fs::write(run.reliability_plot_path(), reliability_svg(&report.all.reliability)?)?;

    // Interval trace over the first few test windows (90% band).
    let q05 = crate::model::level_index(&levels, 0.05)?;
    let q50 = crate::model::level_index(&levels, 0.50)?;
    let q95 = crate::model::level_index(&levels, 0.95)?;
    let mut points = Vec::new();
    for inst in instances.iter().take(3) {
        for h in 0..inst.actual_mw.len() {
            points.push(TracePoint {
                actual: inst.actual_mw[h],
                lower: inst.quantiles_mw.get(h, q05),
                median: inst.quantiles_mw.get(h, q50),
                upper: inst.quantiles_mw.get(h, q95),
            });
        }
    }
    std::fs::write(run.interval_plot_path(), interval_trace_svg(&points)?)?;
    Ok(report)
}

/// Render `report.md` from the artifacts already in the run directory.
pub fn run_report(run: &RunDir) -> Result<PathBuf> {
    let cfg = run.load_config()?;
    let metrics_path = run.metrics_json_path();
    if !metrics_path.is_file() {
        return Err(Error::Data("no metrics.json in run directory; run `evaluate` first".into()));
    }
    let report: MetricsReport = serde_json::from_slice(&std::fs::read(&metrics_path)?)
        .map_err(|e| Error::Format(format!("metrics.json: {e}")))?;
    let history = std::fs::read_to_string(run.history_path())?;
    let n_epochs = history.lines().count().saturating_sub(1);
    let best_val = history
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(2)?.parse::<f64>().ok())
        .fold(f64::INFINITY, f64::min);

    let mut md = String::new();
    md.push_str("# Forecast run report\n\n");
    md.push_str("## Configuration\n\n");
    md.push_str(&format!(
        "- data: {}\n- model: {} layers, d_model {}, lookback {} h, horizon {} h\n\
         - seeds: data {}, train {}, inference {}\n- MC passes: {}\n- calibration: {:?}\n\n",
        match &cfg.data.csv {
            Some(p) => format!("csv `{}`", p.display()),
            None => format!("synthetic ({} hours)", cfg.data.synth.hours),
        },
        cfg.model.n_layers,
        cfg.model.d_model,
        cfg.model.lookback,
        cfg.model.horizon,
        cfg.data.synth.seed,
        cfg.train.seed,
        cfg.inference.seed,
        cfg.inference.t_passes,
        cfg.calibration,
    ));
    md.push_str("## Training\n\n");
    md.push_str(&format!(
        "- epochs run: {n_epochs}\n- best validation CRPS: {best_val:.6}\n\n"
    ));
    md.push_str("## Test metrics\n\n");
    md.push_str("| regime | n | MAE (MW) | RMSE (MW) | CRPS (std) | PICP 80 | PICP 90 | MPIW 90 (MW) | Winkler 90 (MW) |\n");
    md.push_str("|---|---|---|---|---|---|---|---|---|\n");
    let mut row = |name: &str, m: &crate::metrics::RegimeMetrics| {
        md.push_str(&format!(
            "| {name} | {} | {:.2} | {:.2} | {:.4} | {:.3} | {:.3} | {:.2} | {:.2} |\n",
            m.n_instances,
            m.mae_mw,
            m.rmse_mw,
            m.crps_std,
            m.picp_80,
            m.picp_90,
            m.mpiw_90_mw,
            m.winkler_90_mw
        ));
    };
    row("all", &report.all);
    if let Some(m) = &report.heatwave {
        row("heatwave", m);
    }
    if let Some(m) = &report.cold_snap {
        row("cold_snap", m);
    }
    if let Some(m) = &report.normal {
        row("normal", m);
    }
    md.push_str("\n## Reliability\n\n| nominal | coverage |\n|---|---|\n");
    for (alpha, cov) in &report.all.reliability {
        md.push_str(&format!("| {alpha:.2} | {cov:.4} |\n"));
    }
    md.push_str("\n![reliability](reliability.svg)\n\n![intervals](interval_trace.svg)\n");
    let path = run.report_path();
    std::fs::write(&path, md)?;
    Ok(path)
}
