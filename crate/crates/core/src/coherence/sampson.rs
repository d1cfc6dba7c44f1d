use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::frames::Intrinsics;
use crate::se3::{skew, Pose};

/// Translations shorter than this leave the essential matrix undefined.
pub const MIN_BASELINE: f64 = 1e-9;

/// Fundamental matrix for pixels `x_r` of frame `i` and `x_s` of frame `j`,
/// where `pose_ij` maps frame-`j` points into frame `i`.
pub fn fundamental(pose_ij: &Pose, k_i: &Intrinsics, k_j: &Intrinsics) -> Result<Matrix3<f64>> {
    if pose_ij.translation.norm() < MIN_BASELINE {
        return Err(Error::DegenerateGeometry("essential matrix needs a nonzero baseline"));
    }
    let e = skew(&pose_ij.translation) * pose_ij.rotation.matrix();
    Ok(k_i.inverse_matrix().transpose() * e * k_j.inverse_matrix())
}

fn sampson_with(f: &Matrix3<f64>, px_r: [f64; 2], px_s: [f64; 2]) -> f64 {
    let xr = Vector3::new(px_r[0], px_r[1], 1.0);
    let xs = Vector3::new(px_s[0], px_s[1], 1.0);
    let fx = f * xs;
    let ftx = f.transpose() * xr;
    let num = xr.dot(&fx);
    let den = fx.x * fx.x + fx.y * fx.y + ftx.x * ftx.x + ftx.y * ftx.y;
    if den <= 0.0 {
        return 0.0;
    }
    num * num / den
}

/// Sampson distance (squared pixels) of the pixel pair under the epipolar
/// geometry of `pose_ij`; zero for an exact correspondence.
pub fn sampson_error(
    px_r: [f64; 2],
    px_s: [f64; 2],
    pose_ij: &Pose,
    k_i: &Intrinsics,
    k_j: &Intrinsics,
) -> Result<f64> {
    Ok(sampson_with(&fundamental(pose_ij, k_i, k_j)?, px_r, px_s))
}

/// One candidate pair of a geometric-cost batch.
#[derive(Debug, Clone, Copy)]
pub struct GeometricCandidate {
    pub px_r: [f64; 2],
    pub px_s: [f64; 2],
    pub x_r: Option<Vector3<f64>>,
    pub x_s: Option<Vector3<f64>>,
}

/// Geometric costs of a batch scaled to `[0, 1]` by the batch maximum.
///
/// Uses the Sampson distance, or the 3D transfer error
/// `‖x_r − pose_ij(x_s)‖` when the baseline is too short for epipolar
/// geometry. Pairs without depth get the maximum cost in transfer mode.
pub fn sampson_cost(batch: &[GeometricCandidate], pose_ij: &Pose, k_i: &Intrinsics, k_j: &Intrinsics) -> Vec<f64> {
    let raw: Vec<f64> = match fundamental(pose_ij, k_i, k_j) {
        Ok(f) => batch.iter().map(|c| sampson_with(&f, c.px_r, c.px_s)).collect(),
        Err(_) => batch
            .iter()
            .map(|c| match (c.x_r, c.x_s) {
                (Some(a), Some(b)) => (a - pose_ij.transform_point(&b)).norm(),
                _ => f64::INFINITY,
            })
            .collect(),
    };
    let max = raw.iter().cloned().filter(|v| v.is_finite()).fold(0.0, f64::max);
    raw.iter()
        .map(|v| if v.is_finite() { v / (max + 1e-12) } else { 1.0 })
        .collect()
}
