//! The Bayesian patch-transformer model: architecture configuration, flat
//! parameter storage, pre-sampled stochastic draws, the differentiable
//! forward pass, quantile post-processing, and JSON checkpoints.

pub mod checkpoint;
pub mod config;
pub mod forward;
pub mod noise;
pub mod params;
pub mod quantile;

pub use checkpoint::{Checkpoint, TensorBlob, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{ModelConfig, DEFAULT_LEVELS};
pub use forward::{
    bind_params, forward, forward_on_tape, kl_from_mu_sigma, kl_log_uniform, pad_patches,
    positional_encoding, Binding, Model,
};
pub use noise::{BlockNoise, Mode, NoiseDraws};
pub use params::{ParamEntry, ParamRole, ParamSet, INIT_LOG_SIGMA};
pub use quantile::{enforce_noncrossing, isotonic_projection, level_index, QuantileTensor};
