//! Quantile output container and the non-crossing projection.

use serde::{Deserialize, Serialize};

use crate::math::Matrix;
use crate::{Error, Result};

/// An `H × K` matrix of conditional quantile estimates: one row per horizon
/// step, one column per quantile level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTensor {
    pub values: Matrix,
    pub levels: Vec<f64>,
}

impl QuantileTensor {
    pub fn horizon(&self) -> usize {
        self.values.rows()
    }

    pub fn n_levels(&self) -> usize {
        self.values.cols()
    }

    /// Index of a quantile level, matched exactly (within 1e-9).
    pub fn level_index(&self, alpha: f64) -> Result<usize> {
        level_index(&self.levels, alpha)
    }

    pub fn row(&self, h: usize) -> &[f64] {
        self.values.row(h)
    }

    /// Project every row onto the monotone non-decreasing cone, resolving
    /// quantile crossings with the L2-nearest ordered vector.
    pub fn enforce_noncrossing(&mut self) {
        for h in 0..self.values.rows() {
            isotonic_projection(self.values.row_mut(h));
        }
    }
}

/// Index of `alpha` in a level grid, matched exactly (within 1e-9).
pub fn level_index(levels: &[f64], alpha: f64) -> Result<usize> {
    levels
        .iter()
        .position(|l| (l - alpha).abs() <= 1e-9)
        .ok_or_else(|| Error::Level(format!("level {alpha} not in grid {levels:?}")))
}

/// Pool-adjacent-violators: replace `v` in place with the monotone
/// non-decreasing vector of minimal squared distance. Already-monotone
/// input is returned unchanged.
pub fn isotonic_projection(v: &mut [f64]) {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(v.len());
    for &x in v.iter() {
        let mut sum = x;
        let mut count = 1usize;
        while let Some(&(prev_sum, prev_count)) = blocks.last() {
            if prev_sum * count as f64 > sum * prev_count as f64 {
                sum += prev_sum;
                count += prev_count;
                blocks.pop();
            } else {
                break;
            }
        }
        blocks.push((sum, count));
    }
    let mut i = 0;
    for (sum, count) in blocks {
        let mean = sum / count as f64;
        for _ in 0..count {
            v[i] = mean;
            i += 1;
        }
    }
}

/// Row-wise non-crossing projection of a full quantile matrix.
pub fn enforce_noncrossing(values: &mut Matrix) {
    for h in 0..values.rows() {
        isotonic_projection(values.row_mut(h));
    }
}
