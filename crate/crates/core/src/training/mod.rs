//! Losses, optimizer, the training loop, and gradient verification.

pub mod gradcheck;
pub mod loss;
pub mod optimizer;
pub mod train;

pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use loss::{
    elbo_objective, kl_weight, multi_quantile_loss, multi_quantile_loss_on_tape, pinball,
};
pub use optimizer::{clip_global_norm, cosine_lr, AdamW};
pub use train::{train, EpochRecord, TrainConfig, TrainHistory, TrainOutcome};
