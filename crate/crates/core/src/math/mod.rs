//! Numerical building blocks: dense matrices, the reverse-mode tape,
//! isotonic regression, and small statistics helpers.

pub mod matrix;
pub mod pava;
pub mod stats;
pub mod tape;

pub use matrix::Matrix;
pub use pava::isotonic_non_decreasing;
pub use tape::{Tape, TapeId};
