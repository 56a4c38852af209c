//! Isotonic quantile-level recalibration.
//!
//! The model's nominal levels rarely achieve their nominal coverage out of
//! the box. On the held-out `cal_fit` slice we measure the empirical
//! coverage `ĉ(α_k)` of every nominal level, pool-adjacent-violators the
//! sequence into a monotone coverage curve, and invert that curve: the
//! stored map sends each nominal level to the level one should *request*
//! from the predictive CDF so that realized coverage lands on the nominal
//! target. Requested levels are clamped to `(ε, 1−ε)`.

use serde::{Deserialize, Serialize};

use crate::data::Partition;
use crate::inference::{quantile_from_row, PredictiveDistribution};
use crate::math::Matrix;
use crate::model::{isotonic_projection, Model, QuantileTensor};
use crate::{Error, Result};

/// Clamp bound for adjusted request levels.
pub const CLAMP_EPS: f64 = 1e-3;

/// Fraction of instances with `y ≤ q̂` — the one-sided empirical coverage
/// of a quantile forecast. Ties count as covered.
pub fn measure_coverage(forecasts: &[f64], actuals: &[f64]) -> Result<f64> {
    if forecasts.len() != actuals.len() {
        return Err(Error::Shape(format!(
            "{} forecasts vs {} actuals",
            forecasts.len(),
            actuals.len()
        )));
    }
    if forecasts.is_empty() {
        return Err(Error::Data("measure_coverage on empty input".into()));
    }
    let covered = forecasts.iter().zip(actuals).filter(|(q, y)| y <= q).count();
    Ok(covered as f64 / forecasts.len() as f64)
}

/// Monotone map from nominal level to adjusted request level, piecewise
/// linear between knots and clamped to `(ε, 1−ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMap {
    /// `(nominal α, adjusted request level α_cal)`, sorted by nominal.
    pub knots: Vec<(f64, f64)>,
}

impl CalibrationMap {
    pub fn identity(levels: &[f64]) -> Self {
        CalibrationMap { knots: levels.iter().map(|&a| (a, a)).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.knots.iter().all(|(a, c)| (a - c).abs() < 1e-9)
    }

    /// Adjusted request level for a nominal `alpha`: linear interpolation
    /// between knots, flat beyond the outermost knots, clamped.
    pub fn map(&self, alpha: f64) -> f64 {
        let k = &self.knots;
        let out = if alpha <= k[0].0 {
            k[0].1
        } else if alpha >= k[k.len() - 1].0 {
            k[k.len() - 1].1
        } else {
            let i = k.partition_point(|&(a, _)| a < alpha);
            let (a0, c0) = k[i - 1];
            let (a1, c1) = k[i];
            c0 + (alpha - a0) / (a1 - a0) * (c1 - c0)
        };
        out.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)
    }

    fn validate(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::Config("calibration map needs at least one knot".into()));
        }
        if self.knots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Config("calibration knots must have increasing nominals".into()));
        }
        if self.knots.windows(2).any(|w| w[0].1 > w[1].1 + 1e-12) {
            return Err(Error::Config("calibration map must be non-decreasing".into()));
        }
        Ok(())
    }
}

/// Fit the isotonic level map on `cal_fit` data. `per_level[k]` holds the
/// level-`k` quantile forecasts for every instance, aligned with `actuals`.
pub fn fit_isotonic(
    per_level: &[Vec<f64>],
    actuals: &[f64],
    levels: &[f64],
) -> Result<CalibrationMap> {
    if per_level.len() != levels.len() {
        return Err(Error::Shape(format!(
            "{} forecast columns vs {} levels",
            per_level.len(),
            levels.len()
        )));
    }
    if levels.is_empty() {
        return Err(Error::Config("empty level set".into()));
    }
    // Empirical coverage per nominal level, then PAVA to restore
    // monotonicity of the measured curve.
    let mut coverage: Vec<f64> = Vec::with_capacity(levels.len());
    for forecasts in per_level {
        coverage.push(measure_coverage(forecasts, actuals)?);
    }
    isotonic_projection(&mut coverage);

    if coverage.windows(2).all(|w| (w[1] - w[0]).abs() < 1e-12) {
        // Flat coverage curve (e.g. all-identical actuals): inversion is
        // undefined, fall back to the identity map.
        log::warn!(
            "degenerate calibration fit: coverage curve is flat at {:.4}; using identity map",
            coverage[0]
        );
        return Ok(CalibrationMap::identity(levels));
    }

    let knots = levels
        .iter()
        .map(|&alpha| (alpha, invert_coverage_curve(levels, &coverage, alpha)))
        .collect();
    let mut map = CalibrationMap { knots };
    // Float noise from interpolation can leave microscopic inversions;
    // project the adjusted levels back to monotone.
    let mut adjusted: Vec<f64> = map.knots.iter().map(|&(_, c)| c).collect();
    isotonic_projection(&mut adjusted);
    for (knot, adj) in map.knots.iter_mut().zip(adjusted) {
        knot.1 = adj;
    }
    map.validate()?;
    Ok(map)
}

/// Partition-checked variant: refuses to fit on anything but `cal_fit`
/// rows, returning [`Error::Leakage`] otherwise.
pub fn fit_isotonic_checked(
    per_level: &[Vec<f64>],
    actuals: &[f64],
    levels: &[f64],
    partitions: &[Partition],
) -> Result<CalibrationMap> {
    if partitions.len() != actuals.len() {
        return Err(Error::Shape(format!(
            "{} partition tags vs {} actuals",
            partitions.len(),
            actuals.len()
        )));
    }
    if let Some(i) = partitions.iter().position(|p| *p != Partition::CalFit) {
        return Err(Error::Leakage(format!(
            "calibration fit fed a row from partition {:?} at index {i}",
            partitions[i]
        )));
    }
    fit_isotonic(per_level, actuals, levels)
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Invert the monotone piecewise-linear coverage curve `α ↦ ĉ(α)`: find
/// the request level whose fitted coverage equals `target`. Within the
/// measured coverage range the curve is inverted segment by segment
/// (flat pooled spans return their midpoint). Beyond the range the
/// boundary segment is extended linearly in logit–logit space — the same
/// family the predictive CDF uses for its tail reads, so the composite
/// request-then-read correction is exact for logistic model/truth pairs
/// rather than systematically over-widening.
fn invert_coverage_curve(levels: &[f64], coverage: &[f64], target: f64) -> f64 {
    let k = levels.len();
    debug_assert!(k >= 2);
    if target < coverage[0] {
        let (i, j) = boundary_segment(coverage, true);
        let slope = (logit(coverage[j]) - logit(coverage[i]))
            / (logit(levels[j]) - logit(levels[i]));
        return sigmoid(logit(levels[i]) + (logit(target) - logit(coverage[i])) / slope);
    }
    if target > coverage[k - 1] {
        let (i, j) = boundary_segment(coverage, false);
        let slope = (logit(coverage[j]) - logit(coverage[i]))
            / (logit(levels[j]) - logit(levels[i]));
        return sigmoid(logit(levels[j]) + (logit(target) - logit(coverage[j])) / slope);
    }
    let j = coverage.partition_point(|&c| c < target);
    if j == 0 {
        return levels[0];
    }
    let (c0, c1) = (coverage[j - 1], coverage[j]);
    if (c1 - c0).abs() < 1e-12 {
        return 0.5 * (levels[j - 1] + levels[j]);
    }
    levels[j - 1] + (target - c0) / (c1 - c0) * (levels[j] - levels[j - 1])
}

/// Knot indices `(i, i+1)` of the non-flat segment nearest the lower
/// (`true`) or upper (`false`) boundary. Callers only reach this when the
/// curve is non-flat somewhere.
fn boundary_segment(coverage: &[f64], lower: bool) -> (usize, usize) {
    let k = coverage.len();
    let idx: Box<dyn Iterator<Item = usize>> =
        if lower { Box::new(0..k - 1) } else { Box::new((0..k - 1).rev()) };
    for i in idx {
        if (coverage[i + 1] - coverage[i]).abs() >= 1e-12 {
            return (i, i + 1);
        }
    }
    unreachable!("flat curves take the identity path before inversion");
}

/// Recalibrate a pooled predictive distribution: every nominal level is
/// replaced by its adjusted request level and read back from the pooled
/// piecewise-linear CDF, then rows are re-monotonized.
pub fn calibrate_distribution(
    map: &CalibrationMap,
    dist: &PredictiveDistribution,
) -> Result<QuantileTensor> {
    map.validate()?;
    let h_len = dist.horizon();
    let k_len = dist.levels.len();
    let mut values = Matrix::zeros(h_len, k_len);
    for h in 0..h_len {
        let row = dist.pooled_quantiles.row(h).to_vec();
        for (k, &alpha) in dist.levels.iter().enumerate() {
            let adjusted = map.map(alpha);
            values.set(h, k, quantile_from_row(&dist.levels, &row, adjusted)?);
        }
    }
    let mut out = QuantileTensor { values, levels: dist.levels.clone() };
    out.enforce_noncrossing();
    Ok(out)
}

/// End-to-end calibrated prediction: run the MC ensemble, pool it, and
/// read recalibrated quantiles from the pooled CDF.
pub fn apply_calibration(
    map: &CalibrationMap,
    model: &Model,
    x: &Matrix,
    t: usize,
    seed: u64,
) -> Result<QuantileTensor> {
    let samples = crate::inference::predict_mc(model, x, t, seed)?;
    let dist = crate::inference::predictive_distribution(&samples)?;
    calibrate_distribution(map, &dist)
}
