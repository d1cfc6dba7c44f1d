//! Multi-view RGB-D registration with cycle-consistent anchor points.

pub mod cli;
pub mod coherence;
pub mod config;
pub mod error;
pub mod frames;
pub mod harness;
pub mod matching;
pub mod pose;
pub mod rng;
pub mod se3;
pub mod trajectory;
pub mod weights;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use se3::{Pose, PoseDelta6D, Rotation};
