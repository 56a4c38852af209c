//! Scalar evaluation metrics: point errors, two CRPS estimators, interval
//! coverage/width/Winkler scores, and reliability curves.

use crate::training::loss::pinball;
use crate::{Error, Result};

fn check_aligned(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("aligned inputs required, got {a} vs {b}")));
    }
    Ok(())
}

/// MAE and RMSE of median forecasts.
pub fn point_metrics(medians: &[f64], actuals: &[f64]) -> Result<(f64, f64)> {
    check_aligned(medians.len(), actuals.len())?;
    if medians.is_empty() {
        return Err(Error::Data("point_metrics on empty input".into()));
    }
    let n = medians.len() as f64;
    let mae = medians.iter().zip(actuals).map(|(q, y)| (y - q).abs()).sum::<f64>() / n;
    let mse = medians.iter().zip(actuals).map(|(q, y)| (y - q).powi(2)).sum::<f64>() / n;
    Ok((mae, mse.sqrt()))
}

/// Sample-based CRPS in the energy form
/// `mean|X − y| − ½·mean|X − X'|`, the pair mean running over **all**
/// ordered pairs including self-pairs. Computed with the sorted-sum
/// identity `Σ_{i<j}(x_(j) − x_(i)) = Σ_k x_(k)·(2k − n + 1)` instead of
/// the O(n²) double loop.
pub fn crps_samples(samples: &[f64], y: f64) -> Result<f64> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::Data("crps_samples needs at least one draw".into()));
    }
    let abs_term = samples.iter().map(|x| (x - y).abs()).sum::<f64>() / n as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ordered_sum = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        ordered_sum += x * (2.0 * i as f64 - (n - 1) as f64);
    }
    let pair_mean = 2.0 * ordered_sum / (n * n) as f64;
    Ok(abs_term - 0.5 * pair_mean)
}

/// Quantile-decomposition CRPS: `(2/K)·Σ_k pinball(y, q_k, α_k)`.
pub fn crps_quantile(quantiles: &[f64], levels: &[f64], y: f64) -> Result<f64> {
    check_aligned(quantiles.len(), levels.len())?;
    if quantiles.is_empty() {
        return Err(Error::Data("crps_quantile needs at least one level".into()));
    }
    if quantiles.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Level(format!("non-monotone quantile row: {quantiles:?}")));
    }
    let mut total = 0.0;
    for (q, alpha) in quantiles.iter().zip(levels) {
        total += pinball(y, *q, *alpha)?;
    }
    Ok(2.0 * total / quantiles.len() as f64)
}

fn check_intervals(lower: &[f64], upper: &[f64]) -> Result<()> {
    check_aligned(lower.len(), upper.len())?;
    if let Some(i) = lower.iter().zip(upper).position(|(l, u)| l > u) {
        return Err(Error::Data(format!(
            "crossed interval at index {i}: ({}, {})",
            lower[i], upper[i]
        )));
    }
    Ok(())
}

/// Prediction-interval coverage probability with inclusive bounds.
pub fn picp(lower: &[f64], upper: &[f64], actuals: &[f64]) -> Result<f64> {
    check_intervals(lower, upper)?;
    check_aligned(lower.len(), actuals.len())?;
    if actuals.is_empty() {
        return Err(Error::Data("picp on empty input".into()));
    }
    let covered = actuals
        .iter()
        .zip(lower.iter().zip(upper))
        .filter(|&(y, (l, u))| l <= y && y <= u)
        .count();
    Ok(covered as f64 / actuals.len() as f64)
}

/// Mean prediction-interval width.
pub fn mpiw(lower: &[f64], upper: &[f64]) -> Result<f64> {
    check_intervals(lower, upper)?;
    if lower.is_empty() {
        return Ok(0.0);
    }
    Ok(lower.iter().zip(upper).map(|(l, u)| u - l).sum::<f64>() / lower.len() as f64)
}

/// Winkler interval score for one observation: the width, plus
/// `(2/α)·violation` when the observation escapes the interval.
pub fn winkler(lower: f64, upper: f64, y: f64, miss_rate: f64) -> Result<f64> {
    if lower > upper {
        return Err(Error::Data(format!("crossed interval ({lower}, {upper})")));
    }
    if !(miss_rate > 0.0 && miss_rate < 1.0) {
        return Err(Error::Config(format!("winkler miss rate must be in (0,1), got {miss_rate}")));
    }
    let width = upper - lower;
    let penalty = if y < lower {
        2.0 / miss_rate * (lower - y)
    } else if y > upper {
        2.0 / miss_rate * (y - upper)
    } else {
        0.0
    };
    Ok(width + penalty)
}

/// Mean Winkler score over aligned intervals and observations.
pub fn winkler_mean(
    lower: &[f64],
    upper: &[f64],
    actuals: &[f64],
    miss_rate: f64,
) -> Result<f64> {
    check_aligned(lower.len(), actuals.len())?;
    check_aligned(lower.len(), upper.len())?;
    if actuals.is_empty() {
        return Err(Error::Data("winkler_mean on empty input".into()));
    }
    let mut total = 0.0;
    for i in 0..actuals.len() {
        total += winkler(lower[i], upper[i], actuals[i], miss_rate)?;
    }
    Ok(total / actuals.len() as f64)
}

/// Empirical one-sided coverage at every nominal level: for each level `k`,
/// the fraction of instances whose actual fell at or below the forecast
/// quantile. `per_level[k]` holds the level-`k` forecasts for every
/// instance.
pub fn reliability_curve(
    per_level: &[Vec<f64>],
    levels: &[f64],
    actuals: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_aligned(per_level.len(), levels.len())?;
    let mut curve = Vec::with_capacity(levels.len());
    for (forecasts, &alpha) in per_level.iter().zip(levels) {
        let coverage = crate::calibration::measure_coverage(forecasts, actuals)?;
        curve.push((alpha, coverage));
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive, stream};
    use rand::Rng;
    use rand_distr::Distribution;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn point_metrics_hand_cases() {
        let (mae, rmse) = point_metrics(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((mae, rmse), (0.0, 0.0));
        let (mae, rmse) = point_metrics(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((mae - 3.5).abs() < 1e-12);
        assert!((rmse - 12.5f64.sqrt()).abs() < 1e-12);
        assert!(rmse >= mae);
        assert!(matches!(point_metrics(&[], &[]), Err(Error::Data(_))));
    }

    #[test]
    fn rmse_dominates_mae_on_random_data() {
        let mut rng = derive(1, stream::TRAIN_NOISE, 50);
        let normal = rand_distr::StandardNormal;
        let q: Vec<f64> = (0..200).map(|_| normal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..200).map(|_| normal.sample(&mut rng)).collect();
        let (mae, rmse) = point_metrics(&q, &y).unwrap();
        assert!(rmse >= mae);
    }

    #[test]
    fn crps_samples_hand_cases() {
        assert_eq!(crps_samples(&[1.0, 3.0], 2.0).unwrap(), 0.5);
        assert_eq!(crps_samples(&[5.0, 5.0, 5.0], 5.0).unwrap(), 0.0);
        // Point mass away from truth reduces to absolute error.
        assert_eq!(crps_samples(&[7.0, 7.0], 3.0).unwrap(), 4.0);
        // Matches the naive all-ordered-pairs double loop.
        let samples: [f64; 5] = [0.3, -1.2, 2.5, 0.0, 1.1];
        let y = 0.4;
        let n = samples.len() as f64;
        let naive_abs = samples.iter().map(|x| (x - y).abs()).sum::<f64>() / n;
        let mut naive_pairs = 0.0;
        for a in samples {
            for b in samples {
                naive_pairs += (a - b).abs();
            }
        }
        let naive = naive_abs - 0.5 * naive_pairs / (n * n);
        assert!((crps_samples(&samples, y).unwrap() - naive).abs() < 1e-12);
    }

    #[test]
    fn crps_quantile_hand_cases() {
        // K=1, α=0.5 reduces to absolute error.
        assert_eq!(crps_quantile(&[4.0], &[0.5], 7.0).unwrap(), 3.0);
        assert_eq!(crps_quantile(&[4.0], &[0.5], 1.0).unwrap(), 3.0);
        // Perfect forecast of a point mass.
        let levels = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95];
        let q = [2.0; 7];
        assert_eq!(crps_quantile(&q, &levels, 2.0).unwrap(), 0.0);
        // Zero iff every quantile equals y.
        let mut q2 = q;
        q2[6] = 2.5;
        assert!(crps_quantile(&q2, &levels, 2.0).unwrap() > 0.0);
        // Non-monotone rejected.
        assert!(matches!(
            crps_quantile(&[1.0, 0.5], &[0.25, 0.75], 0.0),
            Err(Error::Level(_))
        ));
    }

    #[test]
    fn crps_estimators_cross_check_at_median() {
        // Forecast = N(0,1): quantile form on the seven paper levels vs the
        // energy form on 10,000 draws, evaluated at the median.
        let levels = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95];
        let gauss = Normal::new(0.0, 1.0).unwrap();
        let q: Vec<f64> = levels.iter().map(|&a| gauss.inverse_cdf(a)).collect();
        let mut rng = derive(3, stream::TRAIN_NOISE, 51);
        let normal = rand_distr::StandardNormal;
        let draws: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let y = 0.0;
        let via_quantiles = crps_quantile(&q, &levels, y).unwrap();
        let via_samples = crps_samples(&draws, y).unwrap();
        let rel = (via_quantiles - via_samples).abs() / via_samples;
        assert!(rel < 0.10, "quantile {via_quantiles} vs sample {via_samples} rel {rel}");
    }

    #[test]
    fn crps_is_proper_against_location_shift() {
        // True forecaster N(μ,1) must beat a +0.5σ-shifted one on average
        // over many instances with y ~ N(μ,1).
        let mut rng = derive(4, stream::TRAIN_NOISE, 52);
        let normal = rand_distr::StandardNormal;
        let t = 32;
        let (mut true_total, mut shifted_total) = (0.0, 0.0);
        let n_instances = 10_000;
        for _ in 0..n_instances {
            let mu: f64 = normal.sample(&mut rng);
            let eps: f64 = normal.sample(&mut rng);
            let y = mu + eps;
            let true_draws: Vec<f64> = (0..t)
                .map(|_| {
                    let e: f64 = normal.sample(&mut rng);
                    mu + e
                })
                .collect();
            let shifted_draws: Vec<f64> = true_draws.iter().map(|d| d + 0.5).collect();
            true_total += crps_samples(&true_draws, y).unwrap();
            shifted_total += crps_samples(&shifted_draws, y).unwrap();
        }
        assert!(
            true_total < shifted_total,
            "propriety violated: {true_total} vs {shifted_total}"
        );
    }

    #[test]
    fn picp_hand_cases() {
        let lower = vec![0.0; 10];
        let upper = vec![1.0; 10];
        let mut y = vec![0.5; 9];
        y.push(2.0);
        assert_eq!(picp(&lower, &upper, &y).unwrap(), 0.9);
        // Boundary counts as covered.
        assert_eq!(picp(&[0.0], &[1.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(picp(&[0.0], &[1.0], &[0.0]).unwrap(), 1.0);
        // Degenerate interval exactly on the actual.
        assert_eq!(picp(&[2.0], &[2.0], &[2.0]).unwrap(), 1.0);
        // Crossed interval rejected.
        assert!(matches!(picp(&[1.0], &[0.0], &[0.5]), Err(Error::Data(_))));
    }

    #[test]
    fn nested_interval_coverage_is_monotone() {
        let mut rng = derive(5, stream::TRAIN_NOISE, 53);
        let normal = rand_distr::StandardNormal;
        let n = 500;
        let mut l80 = Vec::new();
        let mut u80 = Vec::new();
        let mut l90 = Vec::new();
        let mut u90 = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let c: f64 = normal.sample(&mut rng);
            let w80: f64 = rng.gen_range(0.1..2.0);
            let extra: f64 = rng.gen_range(0.0..1.0);
            l80.push(c - w80);
            u80.push(c + w80);
            l90.push(c - w80 - extra);
            u90.push(c + w80 + extra);
            let eps: f64 = normal.sample(&mut rng);
            y.push(c + eps);
        }
        let p80 = picp(&l80, &u80, &y).unwrap();
        let p90 = picp(&l90, &u90, &y).unwrap();
        assert!(p90 >= p80, "{p90} vs {p80}");
    }

    #[test]
    fn mpiw_hand_cases() {
        assert_eq!(mpiw(&[0.0, 10.0], &[20.0, 30.0]).unwrap(), 20.0);
        assert_eq!(mpiw(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(mpiw(&[0.0, 0.0], &[10.0, 30.0]).unwrap(), 20.0);
    }

    #[test]
    fn winkler_hand_cases() {
        // Covered: width only.
        assert_eq!(winkler(90.0, 110.0, 100.0, 0.1).unwrap(), 20.0);
        // One unit above: width + 2/0.1.
        assert_eq!(winkler(90.0, 110.0, 111.0, 0.1).unwrap(), 40.0);
        // Winkler ≥ width, equality iff covered.
        for y in [85.0, 95.0, 105.0, 115.0] {
            let score = winkler(90.0, 110.0, y, 0.1).unwrap();
            assert!(score >= 20.0);
            assert_eq!(score == 20.0, (90.0..=110.0).contains(&y));
        }
        // Widening a covering interval strictly increases the score.
        let narrow = winkler(95.0, 105.0, 100.0, 0.1).unwrap();
        let wide = winkler(90.0, 110.0, 100.0, 0.1).unwrap();
        assert!(wide > narrow);
    }

    #[test]
    fn reliability_curve_oracle() {
        // Perfectly calibrated constant forecaster against N(0,1) truth:
        // coverage within 2/√n of nominal at n = 10,000.
        let levels = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95];
        let gauss = Normal::new(0.0, 1.0).unwrap();
        let n = 10_000;
        let mut rng = derive(6, stream::TRAIN_NOISE, 54);
        let normal = rand_distr::StandardNormal;
        let actuals: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let per_level: Vec<Vec<f64>> =
            levels.iter().map(|&a| vec![gauss.inverse_cdf(a); n]).collect();
        let curve = reliability_curve(&per_level, &levels, &actuals).unwrap();
        let bound = 2.0 / (n as f64).sqrt();
        for (alpha, coverage) in curve {
            assert!(
                (coverage - alpha).abs() <= bound,
                "level {alpha}: coverage {coverage}"
            );
            assert!((0.0..=1.0).contains(&coverage));
        }
        // Degenerate forecasters saturate coverage.
        let huge: Vec<Vec<f64>> = levels.iter().map(|_| vec![f64::MAX; 10]).collect();
        let tiny: Vec<Vec<f64>> = levels.iter().map(|_| vec![f64::MIN; 10]).collect();
        let ys = vec![0.0; 10];
        for (_, c) in reliability_curve(&huge, &levels, &ys).unwrap() {
            assert_eq!(c, 1.0);
        }
        for (_, c) in reliability_curve(&tiny, &levels, &ys).unwrap() {
            assert_eq!(c, 0.0);
        }
    }
}
