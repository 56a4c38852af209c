//! Flat parameter storage with a named registry.
//!
//! All learnable tensors live in one `Vec<f64>` so the optimizer can treat
//! the model as a single flat vector; the registry records each tensor's
//! name, shape, offset, role, and whether weight decay applies. Registration
//! order is fixed, which makes checkpoints and gradient layouts stable.

use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::math::Matrix;
use crate::rng::{derive, stream};
use crate::{Error, Result};

/// Role of a parameter tensor; decides initialization, weight decay, and
/// which tensors the KL term ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRole {
    /// Dense weight matrix (Xavier init, weight decay).
    Weight,
    /// Mean of a variational weight matrix (Xavier init, weight decay).
    VariationalMean,
    /// Log-std of a variational weight matrix (constant init, no decay).
    VariationalLogStd,
    /// Bias vector (zero init, no decay).
    Bias,
    /// Layer-norm gain (ones init, no decay).
    LayerNormGain,
    /// Layer-norm shift (zero init, no decay).
    LayerNormShift,
    /// Log of the attention noise scale σ_a (no decay).
    AttnLogNoise,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub role: ParamRole,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn decays(&self) -> bool {
        matches!(self.role, ParamRole::Weight | ParamRole::VariationalMean)
    }
}

/// Initial value of every variational log-std entry.
pub const INIT_LOG_SIGMA: f64 = -5.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSet {
    pub values: Vec<f64>,
    pub entries: Vec<ParamEntry>,
}

/// Names of the tensors in one transformer block, in registration order.
fn block_layout(l: usize, cfg: &ModelConfig) -> Vec<(String, usize, usize, ParamRole)> {
    let d = cfg.d_model;
    let ff = cfg.d_ff;
    let mut v = Vec::new();
    for proj in ["wq", "wk", "wv", "wo"] {
        v.push((format!("layer{l}.attn.{proj}"), d, d, ParamRole::Weight));
    }
    for bias in ["bq", "bk", "bv", "bo"] {
        v.push((format!("layer{l}.attn.{bias}"), 1, d, ParamRole::Bias));
    }
    v.push((format!("layer{l}.attn.log_sigma_a"), 1, 1, ParamRole::AttnLogNoise));
    v.push((format!("layer{l}.ln1.gain"), 1, d, ParamRole::LayerNormGain));
    v.push((format!("layer{l}.ln1.shift"), 1, d, ParamRole::LayerNormShift));
    v.push((format!("layer{l}.ffn.w1_mean"), d, ff, ParamRole::VariationalMean));
    v.push((format!("layer{l}.ffn.w1_log_std"), d, ff, ParamRole::VariationalLogStd));
    v.push((format!("layer{l}.ffn.b1"), 1, ff, ParamRole::Bias));
    v.push((format!("layer{l}.ffn.w2_mean"), ff, d, ParamRole::VariationalMean));
    v.push((format!("layer{l}.ffn.w2_log_std"), ff, d, ParamRole::VariationalLogStd));
    v.push((format!("layer{l}.ffn.b2"), 1, d, ParamRole::Bias));
    v.push((format!("layer{l}.ln2.gain"), 1, d, ParamRole::LayerNormGain));
    v.push((format!("layer{l}.ln2.shift"), 1, d, ParamRole::LayerNormShift));
    v
}

fn layout(cfg: &ModelConfig) -> Vec<(String, usize, usize, ParamRole)> {
    let d = cfg.d_model;
    let mut v = vec![
        ("embed.w".to_string(), cfg.patch_len * cfg.d_in, d, ParamRole::Weight),
        ("embed.b".to_string(), 1, d, ParamRole::Bias),
    ];
    for l in 0..cfg.n_layers {
        v.extend(block_layout(l, cfg));
    }
    let head_out = cfg.horizon * cfg.n_levels();
    v.push(("head.w".to_string(), cfg.n_patches() * d, head_out, ParamRole::Weight));
    v.push(("head.b".to_string(), 1, head_out, ParamRole::Bias));
    v
}

impl ParamSet {
    /// Allocate and initialize all parameters for the given architecture.
    /// Each tensor draws from its own derived RNG substream, so the
    /// initialization of tensor k does not shift when another tensor's
    /// shape changes.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let layout = layout(cfg);
        let mut values = Vec::new();
        let mut entries = Vec::with_capacity(layout.len());
        for (k, (name, rows, cols, role)) in layout.into_iter().enumerate() {
            let offset = values.len();
            let n = rows * cols;
            let mut rng = derive(seed, stream::PARAM_INIT, k as u64);
            match role {
                ParamRole::Weight | ParamRole::VariationalMean => {
                    let bound = (6.0 / (rows + cols) as f64).sqrt();
                    let dist = Uniform::new_inclusive(-bound, bound);
                    values.extend((0..n).map(|_| dist.sample(&mut rng)));
                }
                ParamRole::VariationalLogStd => {
                    values.extend(std::iter::repeat(INIT_LOG_SIGMA).take(n));
                }
                ParamRole::Bias | ParamRole::LayerNormShift => {
                    values.extend(std::iter::repeat(0.0).take(n));
                }
                ParamRole::LayerNormGain => {
                    values.extend(std::iter::repeat(1.0).take(n));
                }
                ParamRole::AttnLogNoise => {
                    values.extend(std::iter::repeat(cfg.attn_noise_init.ln()).take(n));
                }
            }
            entries.push(ParamEntry { name, offset, rows, cols, role });
        }
        ParamSet { values, entries }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn entry(&self, name: &str) -> Result<&ParamEntry> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Shape(format!("unknown parameter {name:?}")))
    }

    pub fn entry_index(&self, name: &str) -> Result<usize> {
        self.entries
            .iter()
            .position(|e| e.name == name)
            .ok_or_else(|| Error::Shape(format!("unknown parameter {name:?}")))
    }

    /// Copy one tensor out as a matrix.
    pub fn matrix(&self, entry: &ParamEntry) -> Matrix {
        let slice = &self.values[entry.offset..entry.offset + entry.len()];
        Matrix::from_vec(entry.rows, entry.cols, slice.to_vec())
    }

    /// Overwrite one tensor from a matrix of the same shape.
    pub fn set_matrix(&mut self, name: &str, m: &Matrix) -> Result<()> {
        let entry = self.entry(name)?.clone();
        if (entry.rows, entry.cols) != m.shape() {
            return Err(Error::Shape(format!(
                "parameter {name:?} is {}×{}, got {}×{}",
                entry.rows,
                entry.cols,
                m.rows(),
                m.cols()
            )));
        }
        self.values[entry.offset..entry.offset + entry.len()].copy_from_slice(m.as_slice());
        Ok(())
    }

    /// Per-element weight-decay mask aligned with `values`.
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.values.len()];
        for e in &self.entries {
            if e.decays() {
                mask[e.offset..e.offset + e.len()].iter_mut().for_each(|m| *m = true);
            }
        }
        mask
    }

    /// Fill every variational log-std and attention log-noise entry with a
    /// value (used by ablations and the zero-noise reduction).
    pub fn set_noise_logs(&mut self, log_value: f64) {
        for e in &self.entries {
            if matches!(e.role, ParamRole::VariationalLogStd | ParamRole::AttnLogNoise) {
                self.values[e.offset..e.offset + e.len()]
                    .iter_mut()
                    .for_each(|v| *v = log_value);
            }
        }
    }

    /// Gaussian jitter of every parameter, used by tests that need a
    /// non-symmetric parameter point.
    pub fn perturb(&mut self, seed: u64, scale: f64) {
        let mut rng = derive(seed, stream::PARAM_INIT, u64::MAX);
        for v in self.values.iter_mut() {
            let eps: f64 = StandardNormal.sample(&mut rng);
            *v += scale * eps;
        }
    }
}
