//! Transformation synchronization.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::se3::{Pose, Rotation};

/// Measured `T_ij = T_i⁻¹ T_j` (maps frame-`j` points into frame `i`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    pub i: usize,
    pub j: usize,
    pub pose: Pose,
    pub weight: f64,
}

fn check_connected(frames: usize, edges: &[RelativePose]) -> Result<()> {
    let mut seen = vec![false; frames];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(f) = queue.pop_front() {
        for e in edges.iter().filter(|e| e.weight > 0.0) {
            let other = if e.i == f {
                e.j
            } else if e.j == f {
                e.i
            } else {
                continue;
            };
            if !seen[other] {
                seen[other] = true;
                queue.push_back(other);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(f) => Err(Error::DisconnectedGraph(f)),
        None => Ok(()),
    }
}

/// Poses chained along a maximum-weight spanning tree rooted at frame 0.
pub fn spanning_tree_poses(frames: usize, edges: &[RelativePose]) -> Result<Vec<Pose>> {
    check_connected(frames, edges)?;
    let mut poses: Vec<Option<Pose>> = vec![None; frames];
    poses[0] = Some(Pose::identity());
    for _ in 1..frames {
        let mut best: Option<(f64, usize, Pose)> = None;
        for e in edges.iter().filter(|e| e.weight > 0.0) {
            let cand = match (poses[e.i], poses[e.j]) {
                (Some(pi), None) => (e.j, pi.compose(&e.pose)),
                (None, Some(pj)) => (e.i, pj.compose(&e.pose.inverse())),
                _ => continue,
            };
            if best.as_ref().is_none_or(|(w, _, _)| e.weight > *w) {
                best = Some((e.weight, cand.0, cand.1));
            }
        }
        let (_, f, p) = best.expect("a connected graph always extends the tree");
        poses[f] = Some(p);
    }
    Ok(poses.into_iter().map(Option::unwrap).collect())
}

/// One weighted power-iteration sweep on the rotation block matrix,
/// `Y_i ← Σ_j w_ij R_ij Y_j` with `Y_i = R_iᵀ` (self term weighted by the
/// mean edge weight), followed by projection onto SO(3).
fn rotation_sweep(current: &[Rotation], edges: &[RelativePose]) -> Result<Vec<Rotation>> {
    let n = current.len();
    let active: Vec<&RelativePose> = edges.iter().filter(|e| e.weight > 0.0).collect();
    let self_weight = active.iter().map(|e| e.weight).sum::<f64>() / active.len().max(1) as f64;
    let mut acc: Vec<Matrix3<f64>> = current.iter().map(|r| r.matrix().transpose() * self_weight).collect();
    for e in &active {
        let rij = e.pose.rotation.matrix();
        acc[e.i] += rij * current[e.j].matrix().transpose() * e.weight;
        acc[e.j] += rij.transpose() * current[e.i].matrix().transpose() * e.weight;
    }
    (0..n).map(|i| Ok(Rotation::project(&acc[i])?.inverse())).collect()
}

/// Least-squares translations for fixed rotations:
/// minimizes `Σ w_ij ‖(t_j − t_i) − R_i t_ij‖²` with `t_0 = 0`.
fn solve_translations(rotations: &[Rotation], edges: &[RelativePose]) -> Result<Vec<Vector3<f64>>> {
    let n = rotations.len();
    let unknowns = 3 * (n - 1);
    let mut a = DMatrix::<f64>::zeros(unknowns, unknowns);
    let mut b = DVector::<f64>::zeros(unknowns);
    for e in edges.iter().filter(|e| e.weight > 0.0) {
        let m = rotations[e.i] * e.pose.translation;
        let w = e.weight;
        for (f, sign) in [(e.j, 1.0), (e.i, -1.0)] {
            if f == 0 {
                continue;
            }
            for k in 0..3 {
                b[3 * (f - 1) + k] += sign * w * m[k];
            }
            for (g, sign_g) in [(e.j, 1.0), (e.i, -1.0)] {
                if g == 0 {
                    continue;
                }
                for k in 0..3 {
                    a[(3 * (f - 1) + k, 3 * (g - 1) + k)] += sign * sign_g * w;
                }
            }
        }
    }
    let x = a
        .cholesky()
        .ok_or_else(|| Error::Numerical("translation system is singular".into()))?
        .solve(&b);
    let mut out = vec![Vector3::zeros(); n];
    for f in 1..n {
        out[f] = Vector3::new(x[3 * (f - 1)], x[3 * (f - 1) + 1], x[3 * (f - 1) + 2]);
    }
    Ok(out)
}

/// Absolute (world-from-frame) poses from weighted relative poses.
///
/// Starts from `initial` (or a spanning-tree chaining), runs `sweeps`
/// rotation power-iteration sweeps, then solves translations in closed form.
/// The gauge is fixed by frame 0 = identity.
pub fn synchronize_poses(
    frames: usize,
    edges: &[RelativePose],
    initial: Option<&[Pose]>,
    sweeps: usize,
) -> Result<Vec<Pose>> {
    if frames == 0 {
        return Ok(Vec::new());
    }
    for e in edges {
        if e.i >= frames || e.j >= frames || e.i == e.j || !(e.weight >= 0.0) {
            return Err(Error::Config(format!(
                "invalid synchronization edge ({}, {})",
                e.i, e.j
            )));
        }
    }
    check_connected(frames, edges)?;
    let start = match initial {
        Some(p) if p.len() == frames => p.to_vec(),
        Some(p) => {
            return Err(Error::DimensionMismatch {
                expected: frames,
                got: p.len(),
            })
        }
        None => spanning_tree_poses(frames, edges)?,
    };
    let mut rotations: Vec<Rotation> = start.iter().map(|p| p.rotation).collect();
    for _ in 0..sweeps {
        rotations = rotation_sweep(&rotations, edges)?;
    }
    let r0 = rotations[0].inverse();
    let mut rotations: Vec<Rotation> = rotations.iter().map(|r| r0 * *r).collect();
    rotations[0] = Rotation::identity();
    let translations = if frames > 1 {
        solve_translations(&rotations, edges)?
    } else {
        vec![Vector3::zeros()]
    };
    Ok(rotations
        .into_iter()
        .zip(translations)
        .map(|(r, t)| Pose::new(r, t))
        .collect())
}

/// Runs sweeps until the largest rotation change drops below `tol` degrees
/// or `max_sweeps` is reached.
pub fn synchronize_poses_converged(
    frames: usize,
    edges: &[RelativePose],
    initial: Option<&[Pose]>,
    tol: f64,
    max_sweeps: usize,
) -> Result<Vec<Pose>> {
    let mut poses = synchronize_poses(frames, edges, initial, 0)?;
    for _ in 0..max_sweeps {
        let next = synchronize_poses(frames, edges, Some(&poses), 1)?;
        let change = next
            .iter()
            .zip(&poses)
            .map(|(a, b)| crate::se3::angular_error(&a.rotation, &b.rotation))
            .fold(0.0, f64::max);
        poses = next;
        if change < tol {
            break;
        }
    }
    Ok(poses)
}

/// Relative poses `T_i⁻¹ T_j` for all `i < j`.
pub fn relative_from_absolute(poses: &[Pose]) -> Vec<RelativePose> {
    let mut out = Vec::new();
    for i in 0..poses.len() {
        for j in i + 1..poses.len() {
            out.push(RelativePose {
                i,
                j,
                pose: poses[i].between(&poses[j]),
                weight: 1.0,
            });
        }
    }
    out
}
