//! The inner/outer registration loop over one clip.

use nalgebra::{DMatrix, Vector3};
use rayon::prelude::*;

use super::gru::{gru_step, GruState, GruWeights, GRU_INPUT_DIM};
use super::kabsch::{weighted_kabsch, WeightedCorrespondences3D};
use super::loss::{registration_loss, PairMatches3D};
use super::refine::refine_anchors;
use super::sync::{synchronize_poses, synchronize_poses_converged, RelativePose};
use crate::coherence::spatial::{coherence_from_profiles, distance_profile};
use crate::coherence::{anchor_attention, distance_embedding, sampson_cost, AttentionWeights, GeometricCandidate};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::frames::features::normalize_or_uniform;
use crate::frames::{backproject, crop_window, select_keypoints, subpixel_match, FeatureGrid, FeatureSet, Frame};
use crate::harness::bench::StageTimer;
use crate::matching::dump::PairDump;
use crate::matching::{
    descriptors, extract_anchors, score_matrix, sinkhorn, synchronize_matches, AnchorSet, ScoreMatrix, SoftMatch,
};
use crate::se3::{retract, Pose, PoseDelta6D};
use crate::weights::WeightFile;

/// A frame with its descriptors, selected coarse keypoints, and the 3D
/// point of every fine cell (when depth is valid).
#[derive(Debug, Clone)]
pub struct PreparedFrame {
    pub frame: Frame,
    pub features: FeatureSet,
    /// Cells of the fused (coarse-resolution) grid.
    pub keypoints: Vec<usize>,
    pub keypoint_points: Vec<Option<Vector3<f64>>>,
    pub fine_points: Vec<Option<Vector3<f64>>>,
}

impl PreparedFrame {
    pub fn new(frame: Frame, features: FeatureSet, keypoint_count: usize) -> Self {
        let keypoints = select_keypoints(&features.fused, &frame, keypoint_count);
        let keypoint_points = keypoints
            .iter()
            .map(|&c| backproject(&frame, features.fused.keypoints[c]).ok())
            .collect();
        let fine_points = features
            .fine
            .keypoints
            .iter()
            .map(|px| backproject(&frame, *px).ok())
            .collect();
        PreparedFrame {
            frame,
            features,
            keypoints,
            keypoint_points,
            fine_points,
        }
    }

    pub fn keypoint_pixels(&self) -> Vec<[f64; 2]> {
        self.keypoints
            .iter()
            .map(|&c| self.features.fused.keypoints[c])
            .collect()
    }
}

/// A fine correspondence between cell `r` of frame `i` and cell `s` of frame `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineMatch {
    pub r: usize,
    pub s: usize,
    pub confidence: f64,
    pub affinity: f64,
    /// Kabsch weight (softmax of the affinity over the pair's matches).
    pub weight: f64,
    pub x_r: Vector3<f64>,
    pub x_s: Vector3<f64>,
}

/// Per frame pair `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    pub i: usize,
    pub j: usize,
    /// `T_ij`, mapping frame-`j` points into frame `i`.
    pub pose: Pose,
    /// Synchronization weight: mean confidence of the hard matches, or 0
    /// when the pair failed this iteration.
    pub weight: f64,
    pub gru: GruState,
    /// Soft matches of every anchor window from the latest inner iteration.
    pub soft: Vec<SoftMatch>,
    pub matches: Vec<FineMatch>,
}

/// Everything the inner and outer iterations update.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipState {
    /// World-from-frame poses; frame 0 is the world.
    pub poses: Vec<Pose>,
    pub pairs: Vec<PairState>,
    pub anchors: Option<AnchorSet>,
    pub inner_iter: usize,
    pub outer_iter: usize,
    /// Registration loss at the end of each outer iteration.
    pub loss_history: Vec<f64>,
}

impl ClipState {
    pub fn new(frames: usize, gru_hidden: usize) -> Self {
        let mut pairs = Vec::new();
        for i in 0..frames {
            for j in i + 1..frames {
                pairs.push(PairState {
                    i,
                    j,
                    pose: Pose::identity(),
                    weight: 0.0,
                    gru: GruState::zeros(gru_hidden),
                    soft: Vec::new(),
                    matches: Vec::new(),
                });
            }
        }
        ClipState {
            poses: vec![Pose::identity(); frames],
            pairs,
            anchors: None,
            inner_iter: 0,
            outer_iter: 0,
            loss_history: Vec::new(),
        }
    }

    /// Resets every pairwise pose to `T_i⁻¹ T_j`.
    pub fn sync_pairs(&mut self) {
        for p in &mut self.pairs {
            p.pose = self.poses[p.i].between(&self.poses[p.j]);
        }
    }

    pub fn loss_terms(&self) -> Vec<PairMatches3D> {
        self.pairs
            .iter()
            .map(|p| PairMatches3D {
                i: p.i,
                j: p.j,
                x_r: p.matches.iter().map(|m| m.x_r).collect(),
                x_s: p.matches.iter().map(|m| m.x_s).collect(),
                weights: p.matches.iter().map(|m| m.weight).collect(),
            })
            .collect()
    }

    pub fn registration_loss(&self) -> f64 {
        registration_loss(&self.loss_terms(), &self.poses)
    }
}

/// Precomputed fine matching problem around one anchor.
#[derive(Debug, Clone)]
pub struct WindowProblem {
    pub cells_i: Vec<usize>,
    pub cells_j: Vec<usize>,
    /// Feature similarity plus coherence weight, `|cells_i| × |cells_j|`.
    pub base: DMatrix<f64>,
    /// Row-major over `(cells_i, cells_j)`.
    pub candidates: Vec<GeometricCandidate>,
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct Registration {
    pub state: ClipState,
    pub correspondences: Vec<PairDump>,
}

impl Registration {
    pub fn poses(&self) -> &[Pose] {
        &self.state.poses
    }
}

pub struct Pipeline<'a> {
    pub cfg: &'a PipelineConfig,
    pub frames: &'a [PreparedFrame],
    pub gru: GruWeights,
    pub attention: Option<AttentionWeights>,
}

fn softmax_weights(values: &[f64], temperature: f64) -> Vec<f64> {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = values.iter().map(|v| ((v - max) / temperature).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.iter().map(|v| v / sum).collect()
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a PipelineConfig, frames: &'a [PreparedFrame], weights: Option<&WeightFile>) -> Result<Self> {
        cfg.validate()?;
        if frames.len() < 2 {
            return Err(Error::Config("registration needs at least two frames".into()));
        }
        let gru = match weights.map(WeightFile::gru).transpose()?.flatten() {
            Some(g) if g.input_dim() != GRU_INPUT_DIM => {
                return Err(Error::DimensionMismatch {
                    expected: GRU_INPUT_DIM,
                    got: g.input_dim(),
                })
            }
            Some(g) => g,
            None => GruWeights::seeded(cfg.gru_hidden, GRU_INPUT_DIM, cfg.seed),
        };
        let attention = weights.map(WeightFile::attention).transpose()?.flatten();
        if let Some(a) = &attention {
            let dim = frames[0].features.fine.dim;
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.dim(),
                });
            }
        }
        Ok(Pipeline {
            cfg,
            frames,
            gru,
            attention,
        })
    }

    pub fn initial_state(&self) -> ClipState {
        ClipState::new(self.frames.len(), self.gru.hidden_dim())
    }

    /// Soft coarse matching of the keypoints of frames `i` and `j`. After the
    /// first outer iteration the scores also carry the coherence weight with
    /// respect to the current anchors and the geometric cost of the current
    /// poses.
    pub fn coarse_match(&self, state: &ClipState, i: usize, j: usize) -> Result<SoftMatch> {
        let (fi, fj) = (&self.frames[i], &self.frames[j]);
        let a = descriptors(&fi.features.fused, &fi.keypoints);
        let b = descriptors(&fj.features.fused, &fj.keypoints);
        let mut scores = score_matrix(&a, &b)?.values;
        if state.outer_iter > 0 {
            if let (true, Some(anchors)) = (self.cfg.use_spatial_coherence, &state.anchors) {
                let coh = self.cfg.coherence();
                let prof = |pts: &[Option<Vector3<f64>>], anchors: &[Vector3<f64>]| -> Vec<Option<Vec<f64>>> {
                    pts.iter().map(|p| p.map(|x| distance_profile(&x, anchors))).collect()
                };
                let pi = prof(&fi.keypoint_points, &anchors.points[i]);
                let pj = prof(&fj.keypoint_points, &anchors.points[j]);
                for (r, a) in pi.iter().enumerate() {
                    for (s, b) in pj.iter().enumerate() {
                        if let (Some(a), Some(b)) = (a, b) {
                            scores[(r, s)] += coherence_from_profiles(a, b, &coh);
                        }
                    }
                }
            }
            if self.cfg.use_geometric_cost {
                let pose = state.poses[i].between(&state.poses[j]);
                let (pxi, pxj) = (fi.keypoint_pixels(), fj.keypoint_pixels());
                let mut cands = Vec::with_capacity(pxi.len() * pxj.len());
                for (r, a) in pxi.iter().enumerate() {
                    for (s, b) in pxj.iter().enumerate() {
                        cands.push(GeometricCandidate {
                            px_r: *a,
                            px_s: *b,
                            x_r: fi.keypoint_points[r],
                            x_s: fj.keypoint_points[s],
                        });
                    }
                }
                let gamma = sampson_cost(&cands, &pose, &fi.frame.intrinsics, &fj.frame.intrinsics);
                let m = pxj.len();
                for (k, g) in gamma.iter().enumerate() {
                    scores[(k / m, k % m)] -= g;
                }
            }
        }
        let mut soft = sinkhorn(
            &ScoreMatrix::new(scores)?,
            self.cfg.sinkhorn_epsilon,
            self.cfg.sinkhorn_iters,
            self.cfg.slack_score,
        )?;
        soft.src_frame = i;
        soft.dst_frame = j;
        Ok(soft)
    }

    /// Cycle-consistent anchors from coarse matching of every pair.
    pub fn find_anchors(&self, state: &ClipState, timer: &mut StageTimer) -> Result<AnchorSet> {
        let soft: Vec<SoftMatch> = timer.time("coarse_matching", || {
            state
                .pairs
                .par_iter()
                .map(|p| self.coarse_match(state, p.i, p.j))
                .collect::<Result<_>>()
        })?;
        let sizes: Vec<usize> = self.frames.iter().map(|f| f.keypoints.len()).collect();
        let universe = self.cfg.keypoints.max(sizes.iter().copied().max().unwrap_or(0));
        let sync = timer.time("match_sync", || {
            synchronize_matches(&soft, &sizes, universe, self.cfg.rank_cap)
        })?;
        let pixels: Vec<Vec<[f64; 2]>> = self.frames.iter().map(PreparedFrame::keypoint_pixels).collect();
        timer.time("anchor_extraction", || {
            let frames: Vec<Frame> = self.frames.iter().map(|f| f.frame.clone()).collect();
            extract_anchors(&sync, &pixels, &frames, self.cfg.min_anchors)
        })
    }

    /// Poses from weighted Kabsch on the anchors of every pair, synchronized.
    pub fn anchor_poses(&self, anchors: &AnchorSet) -> Result<Vec<Pose>> {
        let n = self.frames.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let corr = WeightedCorrespondences3D {
                    target: anchors.points[i].clone(),
                    source: anchors.points[j].clone(),
                    weights: vec![1.0; anchors.len()],
                };
                let (pose, weight) = match weighted_kabsch(&corr) {
                    Ok(p) => (p, 1.0),
                    Err(_) => (Pose::identity(), 0.0),
                };
                edges.push(RelativePose { i, j, pose, weight });
            }
        }
        synchronize_poses_converged(n, &edges, None, 1e-10, 100)
    }

    /// Mean squared anchor misalignment under `poses`.
    pub fn anchor_residual(anchors: &AnchorSet, poses: &[Pose]) -> f64 {
        let n = poses.len();
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                let t = poses[i].between(&poses[j]);
                for k in 0..anchors.len() {
                    sum += (anchors.points[i][k] - t.transform_point(&anchors.points[j][k])).norm_squared();
                    count += 1;
                }
            }
        }
        sum / count.max(1) as f64
    }

    fn window_features(
        &self,
        grid: &FeatureGrid,
        cells: &[usize],
        points: &[Option<Vector3<f64>>],
        anchors: &[Vector3<f64>],
    ) -> Result<DMatrix<f64>> {
        let x = DMatrix::from_fn(cells.len(), grid.dim, |r, c| grid.descriptor(cells[r])[c]);
        let Some(w) = &self.attention else { return Ok(x) };
        let coh = self.cfg.coherence();
        let mut emb = DMatrix::zeros(cells.len(), grid.dim);
        for (r, &cell) in cells.iter().enumerate() {
            if let Some(p) = points[cell] {
                let e = distance_embedding(&p, anchors, &coh, grid.dim)?;
                emb.row_mut(r).iter_mut().zip(e).for_each(|(d, v)| *d = v);
            }
        }
        let mut z = anchor_attention(&x, &emb, w)?;
        for mut row in z.row_iter_mut() {
            let mut v: Vec<f64> = row.iter().copied().collect();
            normalize_or_uniform(&mut v);
            row.iter_mut().zip(v).for_each(|(d, s)| *d = s);
        }
        Ok(z)
    }

    /// Fine matching problems around every anchor for pair `(i, j)`.
    pub fn fine_setup(&self, anchors: &AnchorSet, i: usize, j: usize) -> Result<Vec<WindowProblem>> {
        let (fi, fj) = (&self.frames[i], &self.frames[j]);
        let coh = self.cfg.coherence();
        let (gi, gj) = (&fi.features.fine, &fj.features.fine);
        let mut out = Vec::with_capacity(anchors.len());
        for k in 0..anchors.len() {
            let wi = crop_window(gi, anchors.pixels[i][k], self.cfg.window);
            let wj = crop_window(gj, anchors.pixels[j][k], self.cfg.window);
            let zi = self.window_features(gi, &wi.cells, &fi.fine_points, &anchors.points[i])?;
            let zj = self.window_features(gj, &wj.cells, &fj.fine_points, &anchors.points[j])?;
            let mut base = &zi * zj.transpose();
            if self.cfg.use_spatial_coherence {
                let prof =
                    |cells: &[usize], pts: &[Option<Vector3<f64>>], a: &[Vector3<f64>]| -> Vec<Option<Vec<f64>>> {
                        cells.iter().map(|&c| pts[c].map(|x| distance_profile(&x, a))).collect()
                    };
                let pi = prof(&wi.cells, &fi.fine_points, &anchors.points[i]);
                let pj = prof(&wj.cells, &fj.fine_points, &anchors.points[j]);
                for (r, a) in pi.iter().enumerate() {
                    for (s, b) in pj.iter().enumerate() {
                        if let (Some(a), Some(b)) = (a, b) {
                            base[(r, s)] += coherence_from_profiles(a, b, &coh);
                        }
                    }
                }
            }
            let mut candidates = Vec::with_capacity(wi.len() * wj.len());
            for &r in &wi.cells {
                for &s in &wj.cells {
                    candidates.push(GeometricCandidate {
                        px_r: gi.keypoints[r],
                        px_s: gj.keypoints[s],
                        x_r: fi.fine_points[r],
                        x_s: fj.fine_points[s],
                    });
                }
            }
            out.push(WindowProblem {
                cells_i: wi.cells,
                cells_j: wj.cells,
                base,
                candidates,
            });
        }
        Ok(out)
    }

    /// Fine matching, weighted Kabsch, and the recurrent update for one pair.
    /// Any failure zeroes the pair's weight and keeps its pose.
    pub fn pair_update(&self, pair: &PairState, problems: &[WindowProblem]) -> PairState {
        match self.try_pair_update(pair, problems) {
            Ok(p) => p,
            Err(_) => PairState {
                weight: 0.0,
                ..pair.clone()
            },
        }
    }

    fn try_pair_update(&self, pair: &PairState, problems: &[WindowProblem]) -> Result<PairState> {
        let (fi, fj) = (&self.frames[pair.i], &self.frames[pair.j]);
        let cfg = self.cfg;
        let mut soft = Vec::with_capacity(problems.len());
        let mut cands: Vec<(f64, usize, usize, f64)> = Vec::new();
        for w in problems {
            let mut d = w.base.clone();
            if cfg.use_geometric_cost {
                let gamma = sampson_cost(&w.candidates, &pair.pose, &fi.frame.intrinsics, &fj.frame.intrinsics);
                let m = w.cells_j.len();
                for (k, g) in gamma.iter().enumerate() {
                    d[(k / m, k % m)] -= g;
                }
            }
            let mut sm = sinkhorn(
                &ScoreMatrix::new(d.clone())?,
                cfg.sinkhorn_epsilon,
                cfg.sinkhorn_iters,
                cfg.slack_score,
            )?;
            sm.src_frame = pair.i;
            sm.dst_frame = pair.j;
            for m in sm.hard_matches(cfg.match_threshold).matches {
                cands.push((m.confidence, w.cells_i[m.src], w.cells_j[m.dst], d[(m.src, m.dst)]));
            }
            soft.push(sm);
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used_r = std::collections::HashSet::new();
        let mut used_s = std::collections::HashSet::new();
        let mut picked = Vec::new();
        for (conf, r, s, aff) in cands {
            let (Some(x_r), Some(x_s)) = (fi.fine_points[r], fj.fine_points[s]) else {
                continue;
            };
            if used_r.contains(&r) || used_s.contains(&s) {
                continue;
            }
            used_r.insert(r);
            used_s.insert(s);
            picked.push((r, s, conf, aff, x_r, x_s));
        }
        picked.sort_by_key(|m| (m.0, m.1));
        let affinities: Vec<f64> = picked.iter().map(|m| m.3).collect();
        let weights = softmax_weights(&affinities, cfg.weight_temperature);
        let matches: Vec<FineMatch> = picked
            .iter()
            .zip(&weights)
            .map(|(m, w)| FineMatch {
                r: m.0,
                s: m.1,
                confidence: m.2,
                affinity: m.3,
                weight: *w,
                x_r: m.4,
                x_s: m.5,
            })
            .collect();
        let failed = |matches: Vec<FineMatch>, soft: Vec<SoftMatch>| PairState {
            weight: 0.0,
            soft,
            matches,
            ..pair.clone()
        };
        if matches.len() < 3 {
            return Ok(failed(matches, soft));
        }
        let corr = WeightedCorrespondences3D {
            target: matches.iter().map(|m| m.x_r).collect(),
            source: matches.iter().map(|m| m.x_s).collect(),
            weights: weights.clone(),
        };
        let Ok(kabsch) = weighted_kabsch(&corr) else {
            return Ok(failed(matches, soft));
        };

        let delta = PoseDelta6D::from_pose(&pair.pose.inverse().compose(&kabsch));
        let residuals: Vec<f64> = matches
            .iter()
            .map(|m| (m.x_r - kabsch.transform_point(&m.x_s)).norm())
            .collect();
        let mean_residual: f64 = residuals.iter().zip(&weights).map(|(r, w)| r * w).sum();
        let inliers = residuals.iter().filter(|r| **r < cfg.inlier_threshold).count() as f64 / matches.len() as f64;
        let confidence = matches.iter().map(|m| m.confidence).sum::<f64>() / matches.len() as f64;
        let mut input = Vec::with_capacity(GRU_INPUT_DIM);
        input.extend_from_slice(&delta.rot6d);
        input.extend_from_slice(&delta.trans);
        input.extend_from_slice(&[mean_residual, inliers, confidence]);
        let (gru, update) = gru_step(&self.gru, &pair.gru, &input)?;
        let pose = retract(&kabsch, &update)?;
        Ok(PairState {
            i: pair.i,
            j: pair.j,
            pose,
            weight: confidence,
            gru,
            soft,
            matches,
        })
    }

    /// One inner iteration: per-pair fine matching and pose updates (in
    /// parallel), then one synchronization sweep.
    pub fn inner_iteration(&self, state: &mut ClipState, setup: &[Vec<WindowProblem>]) -> Result<()> {
        let updated: Vec<PairState> = state
            .pairs
            .par_iter()
            .zip(setup.par_iter())
            .map(|(p, w)| self.pair_update(p, w))
            .collect();
        state.pairs = updated;
        let edges: Vec<RelativePose> = state
            .pairs
            .iter()
            .map(|p| RelativePose {
                i: p.i,
                j: p.j,
                pose: p.pose,
                weight: p.weight,
            })
            .collect();
        match synchronize_poses(self.frames.len(), &edges, Some(&state.poses), 1) {
            Ok(p) => state.poses = p,
            Err(Error::DisconnectedGraph(_)) => {}
            Err(e) => return Err(e),
        }
        state.sync_pairs();
        state.inner_iter += 1;
        Ok(())
    }

    /// Anchor matching, initial poses, `inner_iters` inner iterations, and
    /// anchor refinement.
    pub fn outer_iteration(&self, state: &mut ClipState, timer: &mut StageTimer) -> Result<()> {
        let anchors = self.find_anchors(state, timer)?;
        let poses = timer.time("initial_poses", || -> Result<Vec<Pose>> {
            let fresh = self.anchor_poses(&anchors)?;
            if state.outer_iter > 0
                && Self::anchor_residual(&anchors, &state.poses) <= Self::anchor_residual(&anchors, &fresh)
            {
                return Ok(state.poses.clone());
            }
            Ok(fresh)
        })?;
        state.poses = poses;
        state.sync_pairs();
        let setup: Vec<Vec<WindowProblem>> = timer.time("fine_setup", || {
            state
                .pairs
                .par_iter()
                .map(|p| self.fine_setup(&anchors, p.i, p.j))
                .collect::<Result<_>>()
        })?;
        state.anchors = Some(anchors);
        state.inner_iter = 0;
        for _ in 0..self.cfg.inner_iters {
            timer.time("inner_iterations", || self.inner_iteration(state, &setup))?;
        }
        let intrinsics: Vec<_> = self.frames.iter().map(|f| f.frame.intrinsics).collect();
        let refined = timer.time("refine_anchors", || {
            refine_anchors(
                state.anchors.as_ref().unwrap(),
                &state.poses,
                &intrinsics,
                self.cfg.reproj_reject,
                self.cfg.min_anchors,
            )
        })?;
        state.anchors = Some(refined);
        state.loss_history.push(state.registration_loss());
        state.outer_iter += 1;
        Ok(())
    }

    /// Output correspondences: every fine match with its target location
    /// refined to sub-pixel precision by the heat-map expectation.
    pub fn correspondences(&self, state: &ClipState) -> Vec<PairDump> {
        state
            .pairs
            .par_iter()
            .map(|p| {
                let (fi, fj) = (&self.frames[p.i], &self.frames[p.j]);
                let (gi, gj) = (&fi.features.fine, &fj.features.fine);
                let mut dump = PairDump {
                    src_frame: p.i,
                    dst_frame: p.j,
                    matches: Vec::new(),
                    src_px: Vec::new(),
                    dst_px: Vec::new(),
                };
                for m in &p.matches {
                    let win = crop_window(gj, gj.keypoints[m.s], self.cfg.subpixel_window);
                    let feats: Vec<&[f64]> = win.cells.iter().map(|&c| gj.descriptor(c)).collect();
                    let loc = subpixel_match(gi.descriptor(m.r), &feats, &win.coords, self.cfg.subpixel_temperature)
                        .map_or(gj.keypoints[m.s], |s| s.location);
                    dump.matches.push((m.r, m.s, m.confidence));
                    dump.src_px.push(gi.keypoints[m.r]);
                    dump.dst_px.push(loc);
                }
                dump
            })
            .collect()
    }

    pub fn run(&self, timer: &mut StageTimer) -> Result<Registration> {
        let mut state = self.initial_state();
        for _ in 0..self.cfg.outer_iters {
            self.outer_iteration(&mut state, timer)?;
        }
        let correspondences = timer.time("correspondences", || self.correspondences(&state));
        Ok(Registration { state, correspondences })
    }
}

/// Prepares frames and runs the full registration.
pub fn register(
    frames: Vec<Frame>,
    features: Vec<FeatureSet>,
    cfg: &PipelineConfig,
    weights: Option<&WeightFile>,
    timer: &mut StageTimer,
) -> Result<Registration> {
    if frames.len() != features.len() {
        return Err(Error::DimensionMismatch {
            expected: frames.len(),
            got: features.len(),
        });
    }
    let prepared: Vec<PreparedFrame> = timer.time("keypoints", || {
        frames
            .into_par_iter()
            .zip(features)
            .map(|(f, s)| PreparedFrame::new(f, s, cfg.keypoints))
            .collect()
    });
    Pipeline::new(cfg, &prepared, weights)?.run(timer)
}
