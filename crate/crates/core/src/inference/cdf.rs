//! Distribution reads from a K-point quantile row.
//!
//! A row of quantiles `(q_k)` at levels `(α_k)` is interpreted as a
//! piecewise-linear CDF through the points `(q_k, α_k)`. Two tail
//! conventions are used, each where it is the right tool:
//!
//! * **Variance** integrates the distribution whose CDF is flat outside
//!   the outer quantiles — equivalently, atoms of mass `α_1` at `q_1` and
//!   `1 − α_K` at `q_K`. Closed-form segment integration, no sampling.
//! * **Quantile reads** inside the knot span interpolate linearly in level;
//!   reads beyond the outer knots extrapolate with a logistic tail fitted
//!   through the two outermost knots on that side, so calibrated levels
//!   like 0.975 can move past `q_0.95` instead of saturating.

use crate::{Error, Result};

fn check_row(levels: &[f64], quantiles: &[f64]) -> Result<()> {
    if levels.len() != quantiles.len() || levels.is_empty() {
        return Err(Error::Shape(format!(
            "{} levels vs {} quantiles",
            levels.len(),
            quantiles.len()
        )));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Level(format!("levels must be strictly increasing: {levels:?}")));
    }
    if quantiles.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Level(format!("quantile row must be non-decreasing: {quantiles:?}")));
    }
    Ok(())
}

/// Variance of the piecewise-linear CDF with flat (atom) tails clamped at
/// the outer quantiles. Exact segment integration:
/// a linear-CDF segment from `(q_k, α_k)` to `(q_{k+1}, α_{k+1})` is a
/// uniform slice with mass `α_{k+1} − α_k`, first moment `(q_k+q_{k+1})/2`
/// and second moment `(q_k² + q_k·q_{k+1} + q_{k+1}²)/3`.
pub fn variance_from_quantiles(levels: &[f64], quantiles: &[f64]) -> Result<f64> {
    check_row(levels, quantiles)?;
    let k = levels.len();
    let (q_lo, q_hi) = (quantiles[0], quantiles[k - 1]);
    let mut mean = levels[0] * q_lo + (1.0 - levels[k - 1]) * q_hi;
    let mut second = levels[0] * q_lo * q_lo + (1.0 - levels[k - 1]) * q_hi * q_hi;
    for i in 0..k - 1 {
        let mass = levels[i + 1] - levels[i];
        let (a, b) = (quantiles[i], quantiles[i + 1]);
        mean += mass * 0.5 * (a + b);
        second += mass * (a * a + a * b + b * b) / 3.0;
    }
    Ok((second - mean * mean).max(0.0))
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Read the quantile at `alpha` from the row's piecewise-linear CDF, with
/// logistic extrapolation beyond the outer knots. `alpha` must lie in
/// (0, 1).
pub fn quantile_from_row(levels: &[f64], quantiles: &[f64], alpha: f64) -> Result<f64> {
    check_row(levels, quantiles)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Level(format!("quantile read at level {alpha} outside (0,1)")));
    }
    let k = levels.len();
    if k == 1 {
        return Ok(quantiles[0]);
    }
    if alpha < levels[0] {
        return Ok(logistic_tail(levels[0], quantiles[0], levels[1], quantiles[1], alpha));
    }
    if alpha > levels[k - 1] {
        return Ok(logistic_tail(
            levels[k - 1],
            quantiles[k - 1],
            levels[k - 2],
            quantiles[k - 2],
            alpha,
        ));
    }
    let i = levels.partition_point(|&l| l < alpha).min(k - 1).max(1);
    let (l0, l1) = (levels[i - 1], levels[i]);
    let (q0, q1) = (quantiles[i - 1], quantiles[i]);
    let t = (alpha - l0) / (l1 - l0);
    Ok(q0 + t * (q1 - q0))
}

/// Logistic quantile function through two knots: linear in logit space,
/// `q(α) = m + s·logit(α)`. Degenerate knots (equal quantiles) collapse to
/// a flat tail.
fn logistic_tail(l_outer: f64, q_outer: f64, l_inner: f64, q_inner: f64, alpha: f64) -> f64 {
    let denom = logit(l_inner) - logit(l_outer);
    if denom == 0.0 || q_inner == q_outer {
        return q_outer;
    }
    let s = (q_inner - q_outer) / denom;
    q_outer + s * (logit(alpha) - logit(l_outer))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEVELS3: [f64; 3] = [0.25, 0.5, 0.75];

    #[test]
    fn point_mass_has_zero_variance() {
        let v = variance_from_quantiles(&LEVELS3, &[3.0, 3.0, 3.0]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn symmetric_row_variance_by_hand() {
        // Row [-d, 0, d] at levels {.25,.5,.75}: atoms .25 at ±d, two
        // uniform segments of mass .25 each ⇒ Var = (2/3)·d².
        let d = 1.5f64;
        let v = variance_from_quantiles(&LEVELS3, &[-d, 0.0, d]).unwrap();
        assert!((v - 2.0 / 3.0 * d * d).abs() < 1e-12, "{v}");
    }

    #[test]
    fn uniform_quantiles_hand_integration() {
        // Quantiles of U(0,1) at {.25,.5,.75} reconstruct under the
        // tail-atom rule to 0.25δ(¼) + 0.25U(¼,½) + 0.25U(½,¾) + 0.25δ(¾):
        // E[X] = 0.5, E[X²] = 7/24, Var = 1/24.
        let v = variance_from_quantiles(&LEVELS3, &[0.25, 0.5, 0.75]).unwrap();
        assert!((v - 1.0 / 24.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn variance_is_shift_invariant_and_scale_quadratic() {
        let base = [-1.0, 0.2, 1.7];
        let v0 = variance_from_quantiles(&LEVELS3, &base).unwrap();
        let shifted: Vec<f64> = base.iter().map(|q| q + 10.0).collect();
        let v1 = variance_from_quantiles(&LEVELS3, &shifted).unwrap();
        assert!((v0 - v1).abs() < 1e-9);
        let scaled: Vec<f64> = base.iter().map(|q| q * 3.0).collect();
        let v2 = variance_from_quantiles(&LEVELS3, &scaled).unwrap();
        assert!((v2 - 9.0 * v0).abs() < 1e-9);
    }

    #[test]
    fn interior_reads_interpolate() {
        let levels = [0.1, 0.5, 0.9];
        let q = [0.0, 1.0, 3.0];
        assert_eq!(quantile_from_row(&levels, &q, 0.5).unwrap(), 1.0);
        assert!((quantile_from_row(&levels, &q, 0.3).unwrap() - 0.5).abs() < 1e-12);
        assert!((quantile_from_row(&levels, &q, 0.7).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(quantile_from_row(&levels, &q, 0.1).unwrap(), 0.0);
        assert_eq!(quantile_from_row(&levels, &q, 0.9).unwrap(), 3.0);
    }

    #[test]
    fn tail_reads_extend_monotonically() {
        let levels = [0.05, 0.5, 0.95];
        let q = [-1.6, 0.0, 1.6];
        let q975 = quantile_from_row(&levels, &q, 0.975).unwrap();
        let q99 = quantile_from_row(&levels, &q, 0.99).unwrap();
        assert!(q975 > 1.6, "calibrated tail must extend past the outer knot: {q975}");
        assert!(q99 > q975);
        let q01 = quantile_from_row(&levels, &q, 0.01).unwrap();
        assert!(q01 < -1.6, "{q01}");
    }

    #[test]
    fn logistic_tail_recovers_a_true_logistic() {
        // If the forecast quantiles come from a logistic distribution, the
        // tail extrapolation is exact.
        let m = 2.0;
        let s = 0.7;
        let qf = |a: f64| m + s * logit(a);
        let levels = [0.05, 0.25, 0.5, 0.75, 0.95];
        let q: Vec<f64> = levels.iter().map(|&a| qf(a)).collect();
        for alpha in [0.01, 0.02, 0.98, 0.99] {
            let got = quantile_from_row(&levels, &q, alpha).unwrap();
            assert!((got - qf(alpha)).abs() < 1e-9, "{alpha}: {got} vs {}", qf(alpha));
        }
    }

    #[test]
    fn degenerate_rows_and_bad_input() {
        // Point mass: every read returns the atom.
        assert_eq!(quantile_from_row(&LEVELS3, &[2.0, 2.0, 2.0], 0.99).unwrap(), 2.0);
        // Non-monotone row rejected.
        assert!(matches!(
            quantile_from_row(&LEVELS3, &[1.0, 0.5, 2.0], 0.5),
            Err(Error::Level(_))
        ));
        // Out-of-range alpha rejected.
        assert!(matches!(
            quantile_from_row(&LEVELS3, &[0.0, 1.0, 2.0], 0.0),
            Err(Error::Level(_))
        ));
        // Mismatched shapes rejected.
        assert!(matches!(
            variance_from_quantiles(&LEVELS3, &[0.0, 1.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn single_level_row() {
        assert_eq!(quantile_from_row(&[0.5], &[4.2], 0.9).unwrap(), 4.2);
        let v = variance_from_quantiles(&[0.5], &[4.2]).unwrap();
        assert_eq!(v, 0.0);
    }
}
