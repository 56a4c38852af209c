//! Pool-adjacent-violators algorithm (PAVA) for isotonic regression.
//!
//! One routine serves three callers: projecting a quantile vector onto the
//! non-decreasing cone (non-crossing enforcement), fitting the monotone
//! coverage map in calibration, and re-monotonizing pooled quantile sets.

/// Weighted least-squares isotonic regression: the non-decreasing vector
/// minimizing `sum_i w_i (out_i - values_i)^2`.
pub fn isotonic_non_decreasing_weighted(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len(), "isotonic weight length mismatch");
    // (weighted mean, total weight, element count) per pooled block.
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        assert!(w > 0.0, "isotonic weights must be positive");
        let mut mean = v;
        let mut weight = w;
        let mut count = 1;
        while let Some(&(prev_mean, prev_weight, prev_count)) = blocks.last() {
            if prev_mean <= mean {
                break;
            }
            blocks.pop();
            let total = prev_weight + weight;
            mean = (prev_mean * prev_weight + mean * weight) / total;
            weight = total;
            count += prev_count;
        }
        blocks.push((mean, weight, count));
    }
    let mut out = Vec::with_capacity(values.len());
    for (mean, _, count) in blocks {
        out.extend(std::iter::repeat(mean).take(count));
    }
    out
}

/// Unweighted isotonic regression (all weights 1).
pub fn isotonic_non_decreasing(values: &[f64]) -> Vec<f64> {
    isotonic_non_decreasing_weighted(values, &vec![1.0; values.len()])
}
