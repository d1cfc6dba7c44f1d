use nalgebra::Vector3;

use super::CoherenceConfig;
use crate::error::{Error, Result};

/// Distances from `x` to each anchor, in anchor order.
pub fn distance_profile(x: &Vector3<f64>, anchors: &[Vector3<f64>]) -> Vec<f64> {
    anchors.iter().map(|a| (x - a).norm()).collect()
}

/// `exp(-d² / sigma_rs²)` with `d = Σ_k |p_k - q_k|` over two distance profiles.
pub fn coherence_from_profiles(p: &[f64], q: &[f64], cfg: &CoherenceConfig) -> f64 {
    let d: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    (-(d * d) / (cfg.sigma_rs * cfg.sigma_rs)).exp()
}

/// Spatial-coherence weight of the candidate match `x_r ↔ x_s`, where
/// `anchors_i[k]` and `anchors_j[k]` are the same anchor seen in frames `i`
/// and `j`. It is 1 when `x_r` and `x_s` sit at the same distances from
/// every anchor and decays with the summed distance discrepancy.
pub fn spatial_coherence(
    x_r: &Vector3<f64>,
    x_s: &Vector3<f64>,
    anchors_i: &[Vector3<f64>],
    anchors_j: &[Vector3<f64>],
    cfg: &CoherenceConfig,
) -> Result<f64> {
    if anchors_i.is_empty() {
        return Err(Error::EmptyAnchors);
    }
    if anchors_i.len() != anchors_j.len() {
        return Err(Error::DimensionMismatch {
            expected: anchors_i.len(),
            got: anchors_j.len(),
        });
    }
    Ok(coherence_from_profiles(
        &distance_profile(x_r, anchors_i),
        &distance_profile(x_s, anchors_j),
        cfg,
    ))
}
