use nalgebra::Vector3;

use crate::se3::Pose;

/// Weighted 3D matches between frames `i` and `j`: `x_r[k]` in frame `i`
/// pairs with `x_s[k]` in frame `j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairMatches3D {
    pub i: usize,
    pub j: usize,
    pub x_r: Vec<Vector3<f64>>,
    pub x_s: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
}

/// `Σ_pairs Σ_k w_k ‖x_r − T_ij(x_s)‖²` with `T_ij = T_i⁻¹ T_j` from the
/// world-from-frame `poses`.
pub fn registration_loss(pairs: &[PairMatches3D], poses: &[Pose]) -> f64 {
    pairs
        .iter()
        .map(|p| {
            let t = poses[p.i].between(&poses[p.j]);
            p.x_r
                .iter()
                .zip(&p.x_s)
                .zip(&p.weights)
                .map(|((r, s), w)| w * (r - t.transform_point(s)).norm_squared())
                .sum::<f64>()
        })
        .sum()
}
