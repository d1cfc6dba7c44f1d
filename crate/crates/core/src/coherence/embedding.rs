use nalgebra::Vector3;

use super::CoherenceConfig;
use crate::error::{Error, Result};

/// Sinusoidal encoding of a point's mean distance to the anchors of its frame.
pub type DistanceEmbedding = Vec<f64>;

/// Mean Euclidean distance from `point` to `anchors`.
pub fn mean_anchor_distance(point: &Vector3<f64>, anchors: &[Vector3<f64>]) -> Result<f64> {
    if anchors.is_empty() {
        return Err(Error::EmptyAnchors);
    }
    Ok(anchors.iter().map(|a| (point - a).norm()).sum::<f64>() / anchors.len() as f64)
}

/// Standard transformer positional encoding of the scalar `x`:
/// `[sin(x w_0), cos(x w_0), sin(x w_1), …]` with `w_k = 10000^(-2k/dim)`.
pub fn sinusoid(x: f64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|i| {
            let k = (i / 2) as f64;
            let w = 10000f64.powf(-2.0 * k / dim as f64);
            if i % 2 == 0 {
                (x * w).sin()
            } else {
                (x * w).cos()
            }
        })
        .collect()
}

/// Embedding of `point` from its mean anchor distance scaled by `sigma_d`.
pub fn distance_embedding(
    point: &Vector3<f64>,
    anchors: &[Vector3<f64>],
    cfg: &CoherenceConfig,
    dim: usize,
) -> Result<DistanceEmbedding> {
    let rho = mean_anchor_distance(point, anchors)?;
    Ok(sinusoid(rho / cfg.sigma_d, dim))
}
