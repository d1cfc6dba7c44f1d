//! Spatial-coherence and geometric terms of the fine matching affinity.

pub mod attention;
pub mod embedding;
pub mod sampson;
pub mod spatial;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use attention::{anchor_attention, attention_matrix, AttentionWeights};
pub use embedding::{distance_embedding, DistanceEmbedding};
pub use sampson::{sampson_cost, sampson_error, GeometricCandidate};
pub use spatial::spatial_coherence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    /// Distance-embedding sensitivity, meters.
    pub sigma_d: f64,
    /// Coherence bandwidth, meters.
    pub sigma_rs: f64,
    /// Window side in fine cells (odd).
    pub window: usize,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig {
            sigma_d: 0.6,
            sigma_rs: 0.3,
            window: 7,
        }
    }
}

impl CoherenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_d > 0.0 && self.sigma_rs > 0.0) {
            return Err(Error::Config("sigma_d and sigma_rs must be positive".into()));
        }
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::Config("window must be odd".into()));
        }
        Ok(())
    }
}

/// Fine-matching affinity: feature similarity plus coherence weight minus
/// geometric cost.
pub fn fine_affinity(similarity: f64, eta: f64, gamma: f64) -> f64 {
    similarity + eta - gamma
}
