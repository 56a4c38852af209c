//! Differentiable forward computation of the Bayesian transformer.
//!
//! The network is PatchTST-shaped: the standardized `L × d_in` input is
//! left-padded (replicating the oldest hour) to a multiple of the patch
//! length, cut into non-overlapping patches, each flattened and linearly
//! projected to `d_model`, summed with fixed sinusoidal positional
//! encodings, then passed through `n_layers` post-norm blocks of multi-head
//! attention and a feed-forward sublayer, and finally flattened into a
//! linear head that emits an `H × K` quantile matrix.
//!
//! Three Bayesian mechanisms ride on top, each active only in stochastic
//! mode and individually toggleable:
//! * Monte-Carlo dropout (inverted, retention `p`) after the attention
//!   output projection and after the FFN second affine;
//! * variational FFN weights sampled in weight space,
//!   `w = μ + ε ⊙ exp(log σ)`;
//! * learnable Gaussian noise `σ_a · ε` added to pre-softmax attention
//!   logits.

use rand::Rng;

use super::config::ModelConfig;
use super::noise::{BlockNoise, Mode, NoiseDraws};
use super::params::{ParamRole, ParamSet};
use super::quantile::QuantileTensor;
use crate::math::tape::{Tape, TapeId};
use crate::math::Matrix;
use crate::{Error, Result};

/// Constants of the analytic approximation to KL(N(μ,σ²) ‖ log-uniform)
/// as a function of log α = log(σ²/μ²) (Molchanov et al. approximation).
pub const KL_K1: f64 = 0.63576;
pub const KL_K2: f64 = 1.87320;
pub const KL_K3: f64 = 1.48695;
/// log α is clamped to this symmetric range before evaluating the
/// approximation, keeping exp/sigmoid arguments well-conditioned.
pub const LOG_ALPHA_CLAMP: f64 = 20.0;
/// Floor added to μ² so log α is defined at μ = 0.
pub const MU_SQ_FLOOR: f64 = 1e-12;

/// A model is a validated architecture plus its flat parameters.
#[derive(Debug, Clone)]
pub struct Model {
    pub cfg: ModelConfig,
    pub params: ParamSet,
}

impl Model {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let params = ParamSet::init(&cfg, seed);
        Ok(Model { cfg, params })
    }
}

/// Tape leaves for every parameter entry, aligned with `params.entries`.
pub struct Binding {
    pub ids: Vec<TapeId>,
}

/// Register every parameter tensor as a differentiable tape leaf.
pub fn bind_params(tape: &mut Tape, params: &ParamSet) -> Binding {
    let ids = params.entries.iter().map(|e| tape.leaf(params.matrix(e))).collect();
    Binding { ids }
}

impl Binding {
    fn id(&self, params: &ParamSet, name: &str) -> Result<TapeId> {
        Ok(self.ids[params.entry_index(name)?])
    }
}

/// Left-pad by replicating the oldest row, slice into non-overlapping
/// patches, and flatten each patch (hour-major) into one row.
pub fn pad_patches(x: &Matrix, cfg: &ModelConfig) -> Matrix {
    let pad = cfg.padded_len() - x.rows();
    let n = cfg.n_patches();
    let width = cfg.patch_len * cfg.d_in;
    Matrix::from_fn(n, width, |p, j| {
        let hour_in_patch = j / cfg.d_in;
        let feature = j % cfg.d_in;
        let padded_row = p * cfg.patch_len + hour_in_patch;
        let source_row = padded_row.saturating_sub(pad);
        x.get(source_row, feature)
    })
}

/// Fixed sinusoidal positional encodings; distinct positions receive
/// distinct rows.
pub fn positional_encoding(n_positions: usize, d_model: usize) -> Matrix {
    Matrix::from_fn(n_positions, d_model, |pos, j| {
        let i = (j / 2) as f64;
        let angle = pos as f64 / 10_000f64.powf(2.0 * i / d_model as f64);
        if j % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

struct Builder<'a> {
    tape: &'a mut Tape,
    cfg: &'a ModelConfig,
    params: &'a ParamSet,
    binding: &'a Binding,
}

impl<'a> Builder<'a> {
    fn p(&mut self, name: &str) -> Result<TapeId> {
        self.binding.id(self.params, name)
    }

    /// `x·W + b` with a broadcast bias row.
    fn affine(&mut self, x: TapeId, w: &str, b: &str) -> Result<TapeId> {
        let w = self.p(w)?;
        let b = self.p(b)?;
        let xw = self.tape.matmul(x, w);
        Ok(self.tape.add_row(xw, b))
    }

    /// Post-norm layer normalization with learned gain and shift.
    fn layer_norm(&mut self, x: TapeId, gain: &str, shift: &str) -> Result<TapeId> {
        let gain = self.p(gain)?;
        let shift = self.p(shift)?;
        let normed = self.tape.layer_norm_rows(x);
        let scaled = self.tape.mul_row(normed, gain);
        Ok(self.tape.add_row(scaled, shift))
    }

    fn dropout(&mut self, x: TapeId, mask: &Matrix) -> TapeId {
        let mask = self.tape.constant(mask.clone());
        self.tape.mul(x, mask)
    }

    /// Effective weight of a variational linear: the mean in deterministic
    /// mode, `μ + ε ⊙ exp(log σ)` under a noise draw.
    fn variational_weight(
        &mut self,
        mean: &str,
        log_std: &str,
        eps: Option<&Matrix>,
    ) -> Result<TapeId> {
        let mean = self.p(mean)?;
        match eps {
            Some(eps) if self.cfg.use_variational => {
                let log_std = self.p(log_std)?;
                let std = self.tape.exp(log_std);
                let eps = self.tape.constant(eps.clone());
                let noise = self.tape.mul(std, eps);
                Ok(self.tape.add(mean, noise))
            }
            _ => Ok(mean),
        }
    }

    /// Multi-head attention, pre-residual: projections, per-head scaled
    /// dot-product logits (optionally perturbed by learnable Gaussian
    /// noise), softmax, value mixing, and the output projection.
    fn attn_core(&mut self, l: usize, x: TapeId, noise: Option<&BlockNoise>) -> Result<TapeId> {
        let d_head = self.cfg.d_head();
        let q = self.affine(x, &format!("layer{l}.attn.wq"), &format!("layer{l}.attn.bq"))?;
        let k = self.affine(x, &format!("layer{l}.attn.wk"), &format!("layer{l}.attn.bk"))?;
        let v = self.affine(x, &format!("layer{l}.attn.wv"), &format!("layer{l}.attn.bv"))?;
        let sigma_a = if noise.is_some() && self.cfg.use_stochastic_attention {
            let log_sigma = self.p(&format!("layer{l}.attn.log_sigma_a"))?;
            Some(self.tape.exp(log_sigma))
        } else {
            None
        };
        let mut heads = Vec::with_capacity(self.cfg.n_heads);
        for h in 0..self.cfg.n_heads {
            let qh = self.tape.slice_cols(q, h * d_head, d_head);
            let kh = self.tape.slice_cols(k, h * d_head, d_head);
            let vh = self.tape.slice_cols(v, h * d_head, d_head);
            let raw = self.tape.matmul_nt(qh, kh);
            let mut logits = self.tape.scale(raw, 1.0 / (d_head as f64).sqrt());
            if let (Some(sigma), Some(noise)) = (sigma_a, noise) {
                let eps = self.tape.constant(noise.attn_eps[h].clone());
                let perturbation = self.tape.scale_broadcast(sigma, eps);
                logits = self.tape.add(logits, perturbation);
            }
            let weights = self.tape.softmax_rows(logits);
            heads.push(self.tape.matmul(weights, vh));
        }
        let mixed = self.tape.concat_cols(&heads);
        self.affine(mixed, &format!("layer{l}.attn.wo"), &format!("layer{l}.attn.bo"))
    }

    fn attention_block(
        &mut self,
        l: usize,
        x: TapeId,
        noise: Option<&BlockNoise>,
    ) -> Result<TapeId> {
        let mut out = self.attn_core(l, x, noise)?;
        if let Some(noise) = noise {
            if self.cfg.use_mc_dropout {
                out = self.dropout(out, &noise.attn_dropout);
            }
        }
        let residual = self.tape.add(x, out);
        self.layer_norm(residual, &format!("layer{l}.ln1.gain"), &format!("layer{l}.ln1.shift"))
    }

    fn ffn_block(&mut self, l: usize, x: TapeId, noise: Option<&BlockNoise>) -> Result<TapeId> {
        let w1 = self.variational_weight(
            &format!("layer{l}.ffn.w1_mean"),
            &format!("layer{l}.ffn.w1_log_std"),
            noise.map(|n| &n.ffn_w1_eps),
        )?;
        let w2 = self.variational_weight(
            &format!("layer{l}.ffn.w2_mean"),
            &format!("layer{l}.ffn.w2_log_std"),
            noise.map(|n| &n.ffn_w2_eps),
        )?;
        let b1 = self.p(&format!("layer{l}.ffn.b1"))?;
        let b2 = self.p(&format!("layer{l}.ffn.b2"))?;
        let xw1 = self.tape.matmul(x, w1);
        let pre = self.tape.add_row(xw1, b1);
        let hidden = self.tape.gelu(pre);
        let hw2 = self.tape.matmul(hidden, w2);
        let mut out = self.tape.add_row(hw2, b2);
        if let Some(noise) = noise {
            if self.cfg.use_mc_dropout {
                out = self.dropout(out, &noise.ffn_dropout);
            }
        }
        let residual = self.tape.add(x, out);
        self.layer_norm(residual, &format!("layer{l}.ln2.gain"), &format!("layer{l}.ln2.shift"))
    }
}

/// Build the full forward computation on an existing tape. `noise = None`
/// is deterministic mode; `Some` drives every stochastic mechanism with the
/// pre-sampled draws. Returns the id of the `H × K` output node.
pub fn forward_on_tape(
    tape: &mut Tape,
    cfg: &ModelConfig,
    params: &ParamSet,
    binding: &Binding,
    x: &Matrix,
    noise: Option<&NoiseDraws>,
) -> Result<TapeId> {
    if x.shape() != (cfg.lookback, cfg.d_in) {
        return Err(Error::Shape(format!(
            "input must be {}×{}, got {}×{}",
            cfg.lookback,
            cfg.d_in,
            x.rows(),
            x.cols()
        )));
    }
    if let Some(noise) = noise {
        if noise.blocks.len() != cfg.n_layers {
            return Err(Error::Shape(format!(
                "noise draws cover {} blocks, model has {}",
                noise.blocks.len(),
                cfg.n_layers
            )));
        }
    }
    let mut b = Builder { tape, cfg, params, binding };
    let patches = pad_patches(x, cfg);
    let patches = b.tape.constant(patches);
    let embedded = b.affine(patches, "embed.w", "embed.b")?;
    let pe = b.tape.constant(positional_encoding(cfg.n_patches(), cfg.d_model));
    let mut tokens = b.tape.add(embedded, pe);
    for l in 0..cfg.n_layers {
        let block_noise = noise.map(|n| &n.blocks[l]);
        tokens = b.attention_block(l, tokens, block_noise)?;
        tokens = b.ffn_block(l, tokens, block_noise)?;
    }
    let flat = b.tape.reshape(tokens, 1, cfg.n_patches() * cfg.d_model);
    let out = b.affine(flat, "head.w", "head.b")?;
    Ok(b.tape.reshape(out, cfg.horizon, cfg.n_levels()))
}

/// One forward pass on a fresh tape. Deterministic mode consumes no
/// randomness; stochastic mode samples one noise realization from `rng`.
pub fn forward(
    model: &Model,
    x: &Matrix,
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<QuantileTensor> {
    let noise = match mode {
        Mode::Deterministic => None,
        Mode::Stochastic => Some(NoiseDraws::sample(&model.cfg, rng)),
    };
    let mut tape = Tape::new();
    let binding = bind_params(&mut tape, &model.params);
    let out = forward_on_tape(&mut tape, &model.cfg, &model.params, &binding, x, noise.as_ref())?;
    Ok(QuantileTensor {
        values: tape.value(out).clone(),
        levels: model.cfg.quantile_levels.clone(),
    })
}

/// Scalar form of the per-weight KL approximation, used by tests and as the
/// reference for the tape version.
pub fn kl_from_mu_sigma(mu: f64, sigma: f64) -> f64 {
    let log_alpha = (2.0 * sigma.ln() - (mu * mu + MU_SQ_FLOOR).ln())
        .clamp(-LOG_ALPHA_CLAMP, LOG_ALPHA_CLAMP);
    let sigmoid = 1.0 / (1.0 + (-(KL_K2 + KL_K3 * log_alpha)).exp());
    let softplus = (1.0 + (-log_alpha).exp()).ln();
    (-KL_K1 * sigmoid + 0.5 * softplus + KL_K1).max(0.0)
}

/// Total KL divergence of every variational weight matrix to the
/// log-uniform prior, as a differentiable 1×1 tape node.
pub fn kl_log_uniform(
    tape: &mut Tape,
    params: &ParamSet,
    binding: &Binding,
) -> Result<TapeId> {
    let mut total: Option<TapeId> = None;
    for (idx, entry) in params.entries.iter().enumerate() {
        if entry.role != ParamRole::VariationalMean {
            continue;
        }
        let log_std_name = entry.name.replace("_mean", "_log_std");
        let mean = binding.ids[idx];
        let log_std = binding.id(params, &log_std_name)?;
        let mu_sq = tape.mul(mean, mean);
        let mu_sq_safe = tape.add_scalar(mu_sq, MU_SQ_FLOOR);
        let ln_mu_sq = tape.ln(mu_sq_safe);
        let two_log_std = tape.scale(log_std, 2.0);
        let log_alpha_raw = tape.sub(two_log_std, ln_mu_sq);
        let log_alpha = tape.clamp(log_alpha_raw, -LOG_ALPHA_CLAMP, LOG_ALPHA_CLAMP);
        let scaled = tape.scale(log_alpha, KL_K3);
        let shifted = tape.add_scalar(scaled, KL_K2);
        let sig = tape.sigmoid(shifted);
        let neg_log_alpha = tape.scale(log_alpha, -1.0);
        let sp = tape.softplus(neg_log_alpha);
        let sig_term = tape.scale(sig, -KL_K1);
        let sp_term = tape.scale(sp, 0.5);
        let sum = tape.add(sig_term, sp_term);
        let raw = tape.add_scalar(sum, KL_K1);
        let clamped = tape.relu(raw);
        let site_total = tape.sum_all(clamped);
        total = Some(match total {
            Some(t) => tape.add(t, site_total),
            None => site_total,
        });
    }
    Ok(total.unwrap_or_else(|| tape.constant(Matrix::scalar(0.0))))
}
