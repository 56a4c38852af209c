//! Pre-sampled noise for one stochastic forward pass.
//!
//! Sampling every random draw up front (in a fixed order) lets the same
//! noise realization drive two different computations — the key ingredient
//! of finite-difference gradient checks in stochastic mode — and keeps the
//! forward pass itself deterministic given `(parameters, input, noise)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::ModelConfig;
use crate::math::Matrix;

/// Forward-pass mode: `Deterministic` consumes no randomness and uses
/// posterior means; `Stochastic` samples dropout masks, variational weights,
/// and attention noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Deterministic,
    Stochastic,
}

/// Noise for one transformer block.
#[derive(Debug, Clone)]
pub struct BlockNoise {
    /// Pre-softmax logit noise per head, each `n_patches × n_patches`,
    /// standard normal (scaled by σ_a inside the forward pass).
    pub attn_eps: Vec<Matrix>,
    /// Inverted-dropout mask after the attention output projection:
    /// entries are 0 or 1/p.
    pub attn_dropout: Matrix,
    /// Standard-normal ε for the two variational FFN weight matrices.
    pub ffn_w1_eps: Matrix,
    pub ffn_w2_eps: Matrix,
    /// Inverted-dropout mask after the FFN second affine.
    pub ffn_dropout: Matrix,
}

/// All noise consumed by one stochastic forward pass.
#[derive(Debug, Clone)]
pub struct NoiseDraws {
    pub blocks: Vec<BlockNoise>,
}

fn standard_normal(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect(),
    )
}

/// Inverted dropout mask: keep with probability `p`, scale kept units by
/// `1/p` so the expectation is the identity. `p = 1` yields all ones.
fn dropout_mask(rng: &mut impl Rng, rows: usize, cols: usize, p: f64) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| if rng.gen::<f64>() < p { 1.0 / p } else { 0.0 })
            .collect(),
    )
}

impl NoiseDraws {
    /// Sample every draw for one pass, honoring the config's mechanism
    /// toggles: a disabled mechanism gets identity noise (ones masks, zero
    /// epsilons) and consumes no randomness.
    pub fn sample(cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let n = cfg.n_patches();
        let d = cfg.d_model;
        let blocks = (0..cfg.n_layers)
            .map(|_| {
                let attn_eps = if cfg.use_stochastic_attention {
                    (0..cfg.n_heads).map(|_| standard_normal(rng, n, n)).collect()
                } else {
                    (0..cfg.n_heads).map(|_| Matrix::zeros(n, n)).collect()
                };
                let (attn_dropout, ffn_dropout) = if cfg.use_mc_dropout {
                    (
                        dropout_mask(rng, n, d, cfg.dropout_retention),
                        dropout_mask(rng, n, d, cfg.dropout_retention),
                    )
                } else {
                    (
                        Matrix::from_fn(n, d, |_, _| 1.0),
                        Matrix::from_fn(n, d, |_, _| 1.0),
                    )
                };
                let (ffn_w1_eps, ffn_w2_eps) = if cfg.use_variational {
                    (
                        standard_normal(rng, d, cfg.d_ff),
                        standard_normal(rng, cfg.d_ff, d),
                    )
                } else {
                    (Matrix::zeros(d, cfg.d_ff), Matrix::zeros(cfg.d_ff, d))
                };
                BlockNoise { attn_eps, attn_dropout, ffn_w1_eps, ffn_w2_eps, ffn_dropout }
            })
            .collect();
        NoiseDraws { blocks }
    }
}
