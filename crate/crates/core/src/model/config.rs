//! Model hyperparameter configuration with reference and desk profiles.

use serde::{Deserialize, Serialize};

use crate::data::N_FEATURES;
use crate::{Error, Result};

/// Quantile levels of the seven-level forecast head.
pub const DEFAULT_LEVELS: [f64; 7] = [0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    /// Patch length P in hours.
    pub patch_len: usize,
    /// Lookback L in hours.
    pub lookback: usize,
    /// Forecast horizon H in hours.
    pub horizon: usize,
    /// Input channels per hour.
    pub d_in: usize,
    /// Strictly increasing quantile levels in (0, 1).
    pub quantile_levels: Vec<f64>,
    /// Dropout retention probability p (keep probability).
    pub dropout_retention: f64,
    /// Initial attention noise scale σ_a.
    pub attn_noise_init: f64,
    /// Ablation toggles: disabling a mechanism makes it deterministic.
    pub use_mc_dropout: bool,
    pub use_variational: bool,
    pub use_stochastic_attention: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ModelConfig {
    /// Desk-scale profile: small enough to train on a laptop CPU while
    /// keeping the reference architecture shape.
    pub fn desk() -> Self {
        ModelConfig {
            n_layers: 2,
            n_heads: 4,
            d_model: 64,
            d_ff: 256,
            patch_len: 16,
            lookback: 168,
            horizon: 24,
            d_in: N_FEATURES,
            quantile_levels: DEFAULT_LEVELS.to_vec(),
            dropout_retention: 0.90,
            attn_noise_init: 0.01,
            use_mc_dropout: true,
            use_variational: true,
            use_stochastic_attention: true,
        }
    }

    /// Reference profile from the published configuration table.
    pub fn paper() -> Self {
        ModelConfig {
            n_layers: 6,
            n_heads: 8,
            d_model: 512,
            d_ff: 2048,
            ..Self::desk()
        }
    }

    /// Number of non-overlapping patches after left padding.
    pub fn n_patches(&self) -> usize {
        self.lookback.div_ceil(self.patch_len)
    }

    /// Lookback after replicate-padding to a multiple of the patch length.
    pub fn padded_len(&self) -> usize {
        self.n_patches() * self.patch_len
    }

    pub fn n_levels(&self) -> usize {
        self.quantile_levels.len()
    }

    /// Per-head key width d_k.
    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Switch to a single-median head (used by ablation rungs A–D).
    pub fn with_scalar_head(mut self) -> Self {
        self.quantile_levels = vec![0.5];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("d_model", self.d_model),
            ("d_ff", self.d_ff),
            ("patch_len", self.patch_len),
            ("lookback", self.lookback),
            ("horizon", self.horizon),
            ("d_in", self.d_in),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.quantile_levels.is_empty() {
            return Err(Error::Config("at least one quantile level required".into()));
        }
        for pair in self.quantile_levels.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::Config(format!(
                    "quantile levels must be strictly increasing, got {:?}",
                    self.quantile_levels
                )));
            }
        }
        let (lo, hi) = (
            self.quantile_levels[0],
            self.quantile_levels[self.quantile_levels.len() - 1],
        );
        if lo <= 0.0 || hi >= 1.0 {
            return Err(Error::Config(format!(
                "quantile levels must lie strictly inside (0,1), got [{lo}, {hi}]"
            )));
        }
        if !(self.dropout_retention > 0.0 && self.dropout_retention <= 1.0) {
            return Err(Error::Config(format!(
                "dropout retention must be in (0,1], got {}",
                self.dropout_retention
            )));
        }
        if self.attn_noise_init < 0.0 || !self.attn_noise_init.is_finite() {
            return Err(Error::Config(format!(
                "attention noise init must be finite and non-negative, got {}",
                self.attn_noise_init
            )));
        }
        Ok(())
    }
}
