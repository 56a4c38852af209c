//! Monte-Carlo predictive inference.
//!
//! `predict_mc` runs `T` stochastic forward passes, each keyed to
//! `(seed, pass index)` so passes can execute in any order — or in
//! parallel — and still produce identical draws. The sample set is pooled
//! into a [`PredictiveDistribution`] carrying the per-horizon predictive
//! mean, the aleatoric/epistemic variance split, and re-monotonized pooled
//! quantiles.

use serde::{Deserialize, Serialize};

use super::cdf::variance_from_quantiles;
use crate::data::Scaler;
use crate::math::Matrix;
use crate::model::{forward, isotonic_projection, level_index, Mode, Model, QuantileTensor};
use crate::rng::{derive, stream};
use crate::{parallel, Error, Result};

/// `T` stochastic quantile tensors, each already non-crossing.
#[derive(Debug, Clone)]
pub struct MCSampleSet {
    pub samples: Vec<QuantileTensor>,
    pub levels: Vec<f64>,
    /// Base seed; pass `t` used the stream derived from `(seed, t)`.
    pub seed: u64,
}

impl MCSampleSet {
    pub fn n_passes(&self) -> usize {
        self.samples.len()
    }

    pub fn horizon(&self) -> usize {
        self.samples[0].values.rows()
    }

    /// Median (q0.50) of pass `t` at horizon `h`.
    pub fn pass_median(&self, t: usize, h: usize) -> Result<f64> {
        let k = level_index(&self.levels, 0.5)?;
        Ok(self.samples[t].values.get(h, k))
    }
}

/// Predictive distribution pooled across passes, in standardized units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub levels: Vec<f64>,
    /// Mean across passes of the per-pass median.
    pub mean: Vec<f64>,
    /// Population variance across passes of the per-pass median.
    pub epistemic_var: Vec<f64>,
    /// Mean across passes of the per-pass quantile-implied variance.
    pub aleatoric_var: Vec<f64>,
    /// Per-cell mean across passes, re-monotonized per row.
    pub pooled_quantiles: Matrix,
}

/// De-standardized (megawatt) view of a predictive distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MwView {
    pub mean_mw: Vec<f64>,
    pub epistemic_var_mw: Vec<f64>,
    pub aleatoric_var_mw: Vec<f64>,
    pub pooled_quantiles_mw: Matrix,
}

impl PredictiveDistribution {
    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    pub fn total_var(&self, h: usize) -> f64 {
        self.aleatoric_var[h] + self.epistemic_var[h]
    }

    /// Convert to megawatts with the scaler the model was trained under.
    /// Variances scale by the square of the load standard deviation.
    pub fn mw_view(&self, scaler: &Scaler) -> MwView {
        let s = scaler.load_std();
        let s2 = s * s;
        MwView {
            mean_mw: self.mean.iter().map(|v| scaler.destandardize_load(*v)).collect(),
            epistemic_var_mw: self.epistemic_var.iter().map(|v| v * s2).collect(),
            aleatoric_var_mw: self.aleatoric_var.iter().map(|v| v * s2).collect(),
            pooled_quantiles_mw: Matrix::from_fn(
                self.pooled_quantiles.rows(),
                self.pooled_quantiles.cols(),
                |h, k| scaler.destandardize_load(self.pooled_quantiles.get(h, k)),
            ),
        }
    }
}

/// Run `T` stochastic passes with per-pass derived RNG streams and enforce
/// non-crossing on every sample.
pub fn predict_mc(model: &Model, x: &Matrix, t: usize, seed: u64) -> Result<MCSampleSet> {
    if t == 0 {
        return Err(Error::Config("predict_mc needs at least one pass".into()));
    }
    let samples: Vec<Result<QuantileTensor>> = parallel::map_indexed(t, |pass| {
        let mut rng = derive(seed, stream::PREDICT, pass as u64);
        let mut q = forward(model, x, Mode::Stochastic, &mut rng)?;
        q.enforce_noncrossing();
        Ok(q)
    });
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(MCSampleSet { samples, levels: model.cfg.quantile_levels.clone(), seed })
}

/// Per-horizon uncertainty split: aleatoric = mean over passes of the
/// quantile-implied within-pass variance; epistemic = population variance
/// over passes of the per-pass median.
pub fn decompose_uncertainty(samples: &MCSampleSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = samples.n_passes();
    if t == 0 {
        return Err(Error::Config("empty sample set".into()));
    }
    let h_len = samples.horizon();
    let median_col = level_index(&samples.levels, 0.5)?;
    let mut aleatoric = vec![0.0; h_len];
    let mut epistemic = vec![0.0; h_len];
    for h in 0..h_len {
        let medians: Vec<f64> =
            (0..t).map(|i| samples.samples[i].values.get(h, median_col)).collect();
        let mean = medians.iter().sum::<f64>() / t as f64;
        epistemic[h] = medians.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / t as f64;
        let mut within = 0.0;
        for sample in &samples.samples {
            within += variance_from_quantiles(&samples.levels, sample.values.row(h))?;
        }
        aleatoric[h] = within / t as f64;
    }
    Ok((aleatoric, epistemic))
}

/// Pool a sample set into a full predictive distribution.
pub fn predictive_distribution(samples: &MCSampleSet) -> Result<PredictiveDistribution> {
    let t = samples.n_passes();
    let h_len = samples.horizon();
    let k_len = samples.levels.len();
    let median_col = level_index(&samples.levels, 0.5)?;
    let (aleatoric_var, epistemic_var) = decompose_uncertainty(samples)?;
    let mut pooled = Matrix::zeros(h_len, k_len);
    for sample in &samples.samples {
        pooled.add_assign(&sample.values);
    }
    let mut pooled = pooled.map(|v| v / t as f64);
    for h in 0..h_len {
        isotonic_projection(pooled.row_mut(h));
    }
    let mean = (0..h_len)
        .map(|h| {
            (0..t).map(|i| samples.samples[i].values.get(h, median_col)).sum::<f64>() / t as f64
        })
        .collect();
    Ok(PredictiveDistribution {
        levels: samples.levels.clone(),
        mean,
        epistemic_var,
        aleatoric_var,
        pooled_quantiles: pooled,
    })
}

/// Interval bounds read from the pooled quantiles at two stored levels.
pub fn prediction_interval(
    dist: &PredictiveDistribution,
    lo_level: f64,
    hi_level: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if lo_level >= hi_level {
        return Err(Error::Level(format!(
            "interval bounds must satisfy lo < hi, got ({lo_level}, {hi_level})"
        )));
    }
    let lo = level_index(&dist.levels, lo_level)?;
    let hi = level_index(&dist.levels, hi_level)?;
    let lower = (0..dist.horizon()).map(|h| dist.pooled_quantiles.get(h, lo)).collect();
    let upper = (0..dist.horizon()).map(|h| dist.pooled_quantiles.get(h, hi)).collect();
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny_model(seed: u64) -> Model {
        let mut cfg = ModelConfig::desk();
        cfg.n_layers = 1;
        cfg.n_heads = 2;
        cfg.d_model = 8;
        cfg.d_ff = 16;
        cfg.patch_len = 4;
        cfg.lookback = 8;
        cfg.horizon = 2;
        cfg.d_in = 3;
        cfg.quantile_levels = vec![0.05, 0.25, 0.5, 0.75, 0.95];
        Model::new(cfg, seed).unwrap()
    }

    fn tiny_input(model: &Model) -> Matrix {
        Matrix::from_fn(model.cfg.lookback, model.cfg.d_in, |r, c| {
            ((r * 7 + c * 3) % 5) as f64 * 0.2 - 0.4
        })
    }

    #[test]
    fn same_seed_reproduces_sample_sets() {
        let model = tiny_model(1);
        let x = tiny_input(&model);
        let a = predict_mc(&model, &x, 5, 99).unwrap();
        let b = predict_mc(&model, &x, 5, 99).unwrap();
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert_eq!(sa.values.as_slice(), sb.values.as_slice());
        }
    }

    #[test]
    fn single_pass_pooled_equals_sample_and_epistemic_zero() {
        let model = tiny_model(2);
        let x = tiny_input(&model);
        let set = predict_mc(&model, &x, 1, 7).unwrap();
        let dist = predictive_distribution(&set).unwrap();
        assert_eq!(dist.pooled_quantiles.as_slice(), set.samples[0].values.as_slice());
        assert!(dist.epistemic_var.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_noise_model_gives_identical_samples() {
        let mut model = tiny_model(3);
        model.cfg.dropout_retention = 1.0;
        model.params.set_noise_logs(-1000.0);
        let x = tiny_input(&model);
        let set = predict_mc(&model, &x, 4, 11).unwrap();
        for s in &set.samples[1..] {
            assert_eq!(s.values.as_slice(), set.samples[0].values.as_slice());
        }
        let (_, epistemic) = decompose_uncertainty(&set).unwrap();
        assert!(epistemic.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decomposition_hand_case() {
        // Two passes, medians {0, 2}, per-pass variances {1, 3} via rows
        // [-d, 0, d] with Var = (2/3)d² at levels {.25,.5,.75}.
        let levels = vec![0.25, 0.5, 0.75];
        let d1 = (1.5f64).sqrt(); // Var 1
        let d2 = (4.5f64).sqrt(); // Var 3
        let s1 = QuantileTensor {
            values: Matrix::from_vec(1, 3, vec![-d1, 0.0, d1]),
            levels: levels.clone(),
        };
        let s2 = QuantileTensor {
            values: Matrix::from_vec(1, 3, vec![2.0 - d2, 2.0, 2.0 + d2]),
            levels: levels.clone(),
        };
        let set = MCSampleSet { samples: vec![s1, s2], levels, seed: 0 };
        let (aleatoric, epistemic) = decompose_uncertainty(&set).unwrap();
        assert!((aleatoric[0] - 2.0).abs() < 1e-12, "{}", aleatoric[0]);
        assert!((epistemic[0] - 1.0).abs() < 1e-12, "{}", epistemic[0]);
        let dist = predictive_distribution(&set).unwrap();
        assert!((dist.total_var(0) - 3.0).abs() < 1e-12);
        assert!((dist.mean[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_passes_have_zero_aleatoric() {
        let levels = vec![0.25, 0.5, 0.75];
        let s = QuantileTensor {
            values: Matrix::from_vec(1, 3, vec![1.0, 1.0, 1.0]),
            levels: levels.clone(),
        };
        let set = MCSampleSet { samples: vec![s.clone(), s], levels, seed: 0 };
        let (aleatoric, _) = decompose_uncertainty(&set).unwrap();
        assert_eq!(aleatoric[0], 0.0);
    }

    #[test]
    fn pooled_quantiles_stay_monotone() {
        let model = tiny_model(4);
        let x = tiny_input(&model);
        let set = predict_mc(&model, &x, 16, 3).unwrap();
        let dist = predictive_distribution(&set).unwrap();
        for h in 0..dist.horizon() {
            let row = dist.pooled_quantiles.row(h);
            assert!(row.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn interval_lookup_and_errors() {
        let dist = PredictiveDistribution {
            levels: vec![0.05, 0.5, 0.95],
            mean: vec![100.0],
            epistemic_var: vec![0.0],
            aleatoric_var: vec![0.0],
            pooled_quantiles: Matrix::from_vec(1, 3, vec![90.0, 100.0, 110.0]),
        };
        let (lo, hi) = prediction_interval(&dist, 0.05, 0.95).unwrap();
        assert_eq!((lo[0], hi[0]), (90.0, 110.0));
        assert!(matches!(prediction_interval(&dist, 0.5, 0.5), Err(Error::Level(_))));
        assert!(matches!(prediction_interval(&dist, 0.1, 0.9), Err(Error::Level(_))));
    }

    #[test]
    fn variance_decomposition_identity() {
        let model = tiny_model(5);
        let x = tiny_input(&model);
        let set = predict_mc(&model, &x, 8, 21).unwrap();
        let dist = predictive_distribution(&set).unwrap();
        for h in 0..dist.horizon() {
            let total = dist.total_var(h);
            assert_eq!(total, dist.aleatoric_var[h] + dist.epistemic_var[h]);
            assert!(dist.aleatoric_var[h] >= 0.0);
            assert!(dist.epistemic_var[h] >= 0.0);
        }
    }

    #[test]
    fn mw_view_scales_correctly() {
        let fm = crate::data::FeatureMatrix {
            start: chrono::DateTime::from_timestamp(0, 0).unwrap(),
            data: Matrix::from_fn(50, crate::data::N_FEATURES, |r, c| {
                (r as f64) * 0.5 + c as f64
            }),
            valid: vec![true; 50],
        };
        let scaler = Scaler::fit(&fm, 0..50).unwrap();
        let dist = PredictiveDistribution {
            levels: vec![0.5],
            mean: vec![1.0],
            epistemic_var: vec![2.0],
            aleatoric_var: vec![3.0],
            pooled_quantiles: Matrix::from_vec(1, 1, vec![1.0]),
        };
        let mw = dist.mw_view(&scaler);
        let s = scaler.load_std();
        assert!((mw.mean_mw[0] - scaler.destandardize_load(1.0)).abs() < 1e-12);
        assert!((mw.epistemic_var_mw[0] - 2.0 * s * s).abs() < 1e-12);
        assert!((mw.aleatoric_var_mw[0] - 3.0 * s * s).abs() < 1e-12);
    }
}
