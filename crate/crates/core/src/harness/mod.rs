//! Synthetic data, evaluation, and timing.

pub mod bench;
pub mod eval;
pub mod synth;
