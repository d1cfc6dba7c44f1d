//! Anchor refinement by reprojection-error minimization.

use nalgebra::{Matrix2x3, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::frames::Intrinsics;
use crate::matching::AnchorSet;
use crate::se3::Pose;

pub const GN_MAX_STEPS: usize = 10;
pub const GN_STEP_TOL: f64 = 1e-8;
pub const GN_MAX_HALVINGS: usize = 8;

/// Sum of squared pixel residuals of world point `x` and per-frame mean
/// residual norm; `None` if `x` is behind any camera.
fn reprojection(
    x: &Vector3<f64>,
    poses: &[Pose],
    intrinsics: &[Intrinsics],
    pixels: &[[f64; 2]],
) -> Option<(f64, f64)> {
    let mut sq = 0.0;
    let mut mean = 0.0;
    for ((pose, k), px) in poses.iter().zip(intrinsics).zip(pixels) {
        let p = pose.inverse().transform_point(x);
        let proj = k.project(&p)?;
        let (du, dv) = (proj[0] - px[0], proj[1] - px[1]);
        sq += du * du + dv * dv;
        mean += (du * du + dv * dv).sqrt();
    }
    Some((sq, mean / pixels.len() as f64))
}

/// Result of refining one world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedPoint {
    pub world: Vector3<f64>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub mean_error: f64,
}

/// Gauss–Newton with backtracking on the reprojection error of one world
/// point observed at `pixels[f]` in every frame. `None` if the start point
/// is behind a camera.
pub fn refine_point(
    start: Vector3<f64>,
    poses: &[Pose],
    intrinsics: &[Intrinsics],
    pixels: &[[f64; 2]],
) -> Option<RefinedPoint> {
    let (initial_cost, _) = reprojection(&start, poses, intrinsics, pixels)?;
    let mut x = start;
    let mut cost = initial_cost;
    for _ in 0..GN_MAX_STEPS {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for ((pose, k), px) in poses.iter().zip(intrinsics).zip(pixels) {
            let rt = pose.rotation.matrix().transpose();
            let p = rt * (x - pose.translation);
            let iz = 1.0 / p.z;
            let r = Vector3::new(k.fx * p.x * iz + k.cx - px[0], k.fy * p.y * iz + k.cy - px[1], 0.0);
            let dpi = Matrix2x3::new(
                k.fx * iz,
                0.0,
                -k.fx * p.x * iz * iz,
                0.0,
                k.fy * iz,
                -k.fy * p.y * iz * iz,
            );
            let j = dpi * rt;
            jtj += j.transpose() * j;
            jtr += j.transpose() * r.xy();
        }
        let Some(step) = jtj.try_inverse().map(|inv| -(inv * jtr)) else {
            break;
        };
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=GN_MAX_HALVINGS {
            let cand = x + step * alpha;
            if let Some((c, _)) = reprojection(&cand, poses, intrinsics, pixels) {
                if c < cost {
                    accepted = Some((cand, c));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((next, c)) = accepted else { break };
        let moved = (next - x).norm();
        x = next;
        cost = c;
        if moved < GN_STEP_TOL {
            break;
        }
    }
    let (final_cost, mean_error) = reprojection(&x, poses, intrinsics, pixels)?;
    Some(RefinedPoint {
        world: x,
        initial_cost,
        final_cost,
        mean_error,
    })
}

/// Re-estimates every anchor's world point from its pixels and the current
/// poses, reprojects it into each frame, and drops anchors whose mean
/// reprojection error exceeds `reproj_reject` pixels.
pub fn refine_anchors(
    anchors: &AnchorSet,
    poses: &[Pose],
    intrinsics: &[Intrinsics],
    reproj_reject: f64,
    min_anchors: usize,
) -> Result<AnchorSet> {
    let frames = anchors.frame_count();
    if poses.len() != frames || intrinsics.len() != frames {
        return Err(Error::DimensionMismatch {
            expected: frames,
            got: poses.len().min(intrinsics.len()),
        });
    }
    let mut pixels = vec![Vec::new(); frames];
    let mut points = vec![Vec::new(); frames];
    for k in 0..anchors.len() {
        let px: Vec<[f64; 2]> = (0..frames).map(|f| anchors.pixels[f][k]).collect();
        let start = (0..frames)
            .map(|f| poses[f].transform_point(&anchors.points[f][k]))
            .sum::<Vector3<f64>>()
            / frames as f64;
        let Some(r) = refine_point(start, poses, intrinsics, &px) else {
            continue;
        };
        if r.mean_error > reproj_reject {
            continue;
        }
        let mut new_px = Vec::with_capacity(frames);
        for f in 0..frames {
            let p = poses[f].inverse().transform_point(&r.world);
            match intrinsics[f].project(&p) {
                Some(q) => new_px.push((q, p)),
                None => break,
            }
        }
        if new_px.len() != frames {
            continue;
        }
        for (f, (q, p)) in new_px.into_iter().enumerate() {
            pixels[f].push(q);
            points[f].push(p);
        }
    }
    AnchorSet::new(pixels, points)?.require(min_anchors)
}
