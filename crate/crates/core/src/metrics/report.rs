//! Aggregated evaluation reports with per-regime slicing.
//!
//! Metrics are averaged uniformly over forecast horizons and instances.
//! Interval metrics use the central 80% interval `[q0.10, q0.90]` and 90%
//! interval `[q0.05, q0.95]`; scale-free metrics (coverage) are computed
//! on MW values, error metrics are reported in both standardized units
//! and MW where meaningful.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::math::Matrix;
use crate::metrics::ops::{crps_quantile, mpiw, picp, point_metrics, reliability_curve, winkler_mean};
use crate::model::level_index;
use crate::{Error, Result};

/// One evaluated forecast instance: an `H × K` quantile block plus the
/// realized actuals, in both standardized units and MW.
#[derive(Debug, Clone)]
pub struct EvalInstance {
    pub quantiles_std: Matrix,
    pub quantiles_mw: Matrix,
    pub actual_std: Vec<f64>,
    pub actual_mw: Vec<f64>,
    /// Target window overlaps a labeled heatwave.
    pub heatwave: bool,
    /// Target window overlaps a labeled cold snap.
    pub cold_snap: bool,
}

impl EvalInstance {
    fn validate(&self, n_levels: usize) -> Result<()> {
        let h = self.actual_std.len();
        if self.actual_mw.len() != h
            || self.quantiles_std.shape() != (h, n_levels)
            || self.quantiles_mw.shape() != (h, n_levels)
        {
            return Err(Error::Shape(format!(
                "instance with {h} target hours has quantile blocks {:?} / {:?} and {} MW actuals",
                self.quantiles_std.shape(),
                self.quantiles_mw.shape(),
                self.actual_mw.len()
            )));
        }
        Ok(())
    }
}

/// Metric values for one regime slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeMetrics {
    pub n_instances: usize,
    pub mae_mw: f64,
    pub rmse_mw: f64,
    pub crps_std: f64,
    pub crps_mw: f64,
    pub picp_80: f64,
    pub picp_90: f64,
    pub mpiw_80_mw: f64,
    pub mpiw_90_mw: f64,
    pub winkler_90_mw: f64,
    /// `(nominal level, empirical one-sided coverage)` per model level.
    pub reliability: Vec<(f64, f64)>,
}

/// Full evaluation report. Event regimes with zero instances are absent
/// rather than reported as zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub levels: Vec<f64>,
    pub all: RegimeMetrics,
    pub heatwave: Option<RegimeMetrics>,
    pub cold_snap: Option<RegimeMetrics>,
    pub normal: Option<RegimeMetrics>,
}

/// Column indices of the levels the interval metrics need.
struct LevelColumns {
    q05: usize,
    q10: usize,
    q50: usize,
    q90: usize,
    q95: usize,
}

impl LevelColumns {
    fn resolve(levels: &[f64]) -> Result<Self> {
        Ok(LevelColumns {
            q05: level_index(levels, 0.05)?,
            q10: level_index(levels, 0.10)?,
            q50: level_index(levels, 0.50)?,
            q90: level_index(levels, 0.90)?,
            q95: level_index(levels, 0.95)?,
        })
    }
}

fn regime_metrics(
    instances: &[&EvalInstance],
    levels: &[f64],
    cols: &LevelColumns,
) -> Result<RegimeMetrics> {
    // Flatten (instance, horizon) pairs in deterministic order.
    let mut medians_mw = Vec::new();
    let mut actuals_mw = Vec::new();
    let mut lo80 = Vec::new();
    let mut hi80 = Vec::new();
    let mut lo90 = Vec::new();
    let mut hi90 = Vec::new();
    let mut per_level_mw: Vec<Vec<f64>> = vec![Vec::new(); levels.len()];
    let mut crps_std_sum = 0.0;
    let mut crps_mw_sum = 0.0;
    let mut n_rows = 0usize;
    for inst in instances {
        for h in 0..inst.actual_std.len() {
            let row_std = inst.quantiles_std.row(h);
            let row_mw = inst.quantiles_mw.row(h);
            crps_std_sum += crps_quantile(row_std, levels, inst.actual_std[h])?;
            crps_mw_sum += crps_quantile(row_mw, levels, inst.actual_mw[h])?;
            medians_mw.push(row_mw[cols.q50]);
            actuals_mw.push(inst.actual_mw[h]);
            lo80.push(row_mw[cols.q10]);
            hi80.push(row_mw[cols.q90]);
            lo90.push(row_mw[cols.q05]);
            hi90.push(row_mw[cols.q95]);
            for (k, col) in per_level_mw.iter_mut().enumerate() {
                col.push(row_mw[k]);
            }
            n_rows += 1;
        }
    }
    let (mae_mw, rmse_mw) = point_metrics(&medians_mw, &actuals_mw)?;
    Ok(RegimeMetrics {
        n_instances: instances.len(),
        mae_mw,
        rmse_mw,
        crps_std: crps_std_sum / n_rows as f64,
        crps_mw: crps_mw_sum / n_rows as f64,
        picp_80: picp(&lo80, &hi80, &actuals_mw)?,
        picp_90: picp(&lo90, &hi90, &actuals_mw)?,
        mpiw_80_mw: mpiw(&lo80, &hi80)?,
        mpiw_90_mw: mpiw(&lo90, &hi90)?,
        winkler_90_mw: winkler_mean(&lo90, &hi90, &actuals_mw, 0.1)?,
        reliability: reliability_curve(&per_level_mw, levels, &actuals_mw)?,
    })
}

/// Compute the full report: metrics over all instances plus heatwave,
/// cold-snap, and normal slices (absent when a slice is empty).
pub fn compute_report(instances: &[EvalInstance], levels: &[f64]) -> Result<MetricsReport> {
    if instances.is_empty() {
        return Err(Error::Data("no evaluation instances".into()));
    }
    for inst in instances {
        inst.validate(levels.len())?;
    }
    let cols = LevelColumns::resolve(levels)?;
    let all_refs: Vec<&EvalInstance> = instances.iter().collect();
    let heat: Vec<&EvalInstance> = instances.iter().filter(|i| i.heatwave).collect();
    let cold: Vec<&EvalInstance> = instances.iter().filter(|i| i.cold_snap).collect();
    let normal: Vec<&EvalInstance> =
        instances.iter().filter(|i| !i.heatwave && !i.cold_snap).collect();
    let slice = |refs: &[&EvalInstance]| -> Result<Option<RegimeMetrics>> {
        if refs.is_empty() {
            Ok(None)
        } else {
            regime_metrics(refs, levels, &cols).map(Some)
        }
    };
    Ok(MetricsReport {
        levels: levels.to_vec(),
        all: regime_metrics(&all_refs, levels, &cols)?,
        heatwave: slice(&heat)?,
        cold_snap: slice(&cold)?,
        normal: slice(&normal)?,
    })
}

impl MetricsReport {
    /// Pretty-printed JSON with trailing newline.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }

    /// Flat `regime,metric,value` CSV covering every present regime.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("regime,metric,value\n");
        let mut emit = |name: &str, m: &RegimeMetrics| {
            let rows: [(&str, f64); 10] = [
                ("n_instances", m.n_instances as f64),
                ("mae_mw", m.mae_mw),
                ("rmse_mw", m.rmse_mw),
                ("crps_std", m.crps_std),
                ("crps_mw", m.crps_mw),
                ("picp_80", m.picp_80),
                ("picp_90", m.picp_90),
                ("mpiw_80_mw", m.mpiw_80_mw),
                ("mpiw_90_mw", m.mpiw_90_mw),
                ("winkler_90_mw", m.winkler_90_mw),
            ];
            for (metric, value) in rows {
                out.push_str(&format!("{name},{metric},{value}\n"));
            }
        };
        emit("all", &self.all);
        if let Some(m) = &self.heatwave {
            emit("heatwave", m);
        }
        if let Some(m) = &self.cold_snap {
            emit("cold_snap", m);
        }
        if let Some(m) = &self.normal {
            emit("normal", m);
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Two-column reliability CSV for the full (`all`) slice.
    pub fn write_reliability_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("nominal_level,empirical_coverage\n");
        for (alpha, coverage) in &self.all.reliability {
            out.push_str(&format!("{alpha},{coverage}\n"));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}
