//! Pose and correspondence metrics.
//!
//! Pose errors are measured on every frame pair `i < j` between the
//! estimated and true relative transforms, so the gauge of either
//! trajectory does not matter. Correspondence metrics use the top
//! [`MAX_CORRESPONDENCES`] matches of each pair by confidence.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{backproject, Frame};
use crate::matching::dump::PairDump;
use crate::se3::{angular_error, translation_error, Pose};

pub const MAX_CORRESPONDENCES: usize = 500;
pub const ROTATION_THRESHOLDS_DEG: [f64; 2] = [5.0, 10.0];
pub const TRANSLATION_THRESHOLDS_CM: [f64; 2] = [5.0, 10.0];
pub const INLIER_3D_CM: [f64; 3] = [1.0, 5.0, 10.0];
pub const INLIER_2D_PX: [f64; 3] = [1.0, 2.0, 5.0];

pub const CSV_HEADER: &str =
    "clip,rot_acc5,rot_acc10,rot_mean,rot_med,tr_acc5,tr_acc10,tr_mean,tr_med,in3d_1,in3d_5,in3d_10,in2d_1,in2d_2,in2d_5";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEval {
    pub i: usize,
    pub j: usize,
    pub rot_err_deg: f64,
    pub tr_err_cm: f64,
    /// Correspondences evaluated (after the confidence cap).
    pub correspondences: usize,
    /// Percent inliers at 1/5/10 cm; `None` without correspondence input.
    pub in3d: Option<[f64; 3]>,
    /// Percent inliers at 1/2/5 px.
    pub in2d: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub clip: String,
    pub rot_acc5: f64,
    pub rot_acc10: f64,
    pub rot_mean: f64,
    pub rot_med: f64,
    pub tr_acc5: f64,
    pub tr_acc10: f64,
    pub tr_mean: f64,
    pub tr_med: f64,
    pub in3d_1: Option<f64>,
    pub in3d_5: Option<f64>,
    pub in3d_10: Option<f64>,
    pub in2d_1: Option<f64>,
    pub in2d_2: Option<f64>,
    pub in2d_5: Option<f64>,
    pub pairs: Vec<PairEval>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn percent_below(v: &[f64], threshold: f64) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    100.0 * v.iter().filter(|x| **x < threshold).count() as f64 / v.len() as f64
}

impl EvalReport {
    /// Aggregates per-pair results; inlier rates are averaged over pairs.
    pub fn from_pairs(clip: impl Into<String>, pairs: Vec<PairEval>) -> Self {
        let rot: Vec<f64> = pairs.iter().map(|p| p.rot_err_deg).collect();
        let tr: Vec<f64> = pairs.iter().map(|p| p.tr_err_cm).collect();
        let avg = |f: &dyn Fn(&PairEval) -> Option<f64>| -> Option<f64> {
            let v: Option<Vec<f64>> = pairs.iter().map(f).collect();
            v.filter(|v| !v.is_empty()).map(|v| mean(&v))
        };
        EvalReport {
            clip: clip.into(),
            rot_acc5: percent_below(&rot, ROTATION_THRESHOLDS_DEG[0]),
            rot_acc10: percent_below(&rot, ROTATION_THRESHOLDS_DEG[1]),
            rot_mean: mean(&rot),
            rot_med: median(&rot),
            tr_acc5: percent_below(&tr, TRANSLATION_THRESHOLDS_CM[0]),
            tr_acc10: percent_below(&tr, TRANSLATION_THRESHOLDS_CM[1]),
            tr_mean: mean(&tr),
            tr_med: median(&tr),
            in3d_1: avg(&|p| p.in3d.map(|v| v[0])),
            in3d_5: avg(&|p| p.in3d.map(|v| v[1])),
            in3d_10: avg(&|p| p.in3d.map(|v| v[2])),
            in2d_1: avg(&|p| p.in2d.map(|v| v[0])),
            in2d_2: avg(&|p| p.in2d.map(|v| v[1])),
            in2d_5: avg(&|p| p.in2d.map(|v| v[2])),
            pairs,
        }
    }

    /// One report over every pair of every clip.
    pub fn aggregate(reports: &[EvalReport]) -> Self {
        let pairs = reports.iter().flat_map(|r| r.pairs.iter().cloned()).collect();
        EvalReport::from_pairs("all", pairs)
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
        let mut s = self.clip.clone();
        for v in [
            self.rot_acc5,
            self.rot_acc10,
            self.rot_mean,
            self.rot_med,
            self.tr_acc5,
            self.tr_acc10,
            self.tr_mean,
            self.tr_med,
        ] {
            write!(s, ",{v:.4}").unwrap();
        }
        for v in [
            self.in3d_1,
            self.in3d_5,
            self.in3d_10,
            self.in2d_1,
            self.in2d_2,
            self.in2d_5,
        ] {
            write!(s, ",{}", opt(v)).unwrap();
        }
        s
    }
}

/// CSV with one row per report and a final aggregate row when there is
/// more than one report.
pub fn to_csv(reports: &[EvalReport]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    if reports.len() > 1 {
        out.push_str(&EvalReport::aggregate(reports).csv_row());
        out.push('\n');
    }
    out
}

pub fn write_reports(csv_path: &Path, json_path: &Path, reports: &[EvalReport]) -> Result<()> {
    std::fs::write(csv_path, to_csv(reports)).map_err(|e| Error::io(csv_path, e))?;
    let json = serde_json::to_string_pretty(reports)?;
    std::fs::write(json_path, json).map_err(|e| Error::io(json_path, e))
}

pub fn read_reports(json_path: &Path) -> Result<Vec<EvalReport>> {
    let text = std::fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Indices of the top `MAX_CORRESPONDENCES` matches by confidence, ties
/// broken by position in the dump.
pub fn top_matches(dump: &PairDump) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dump.matches.len()).collect();
    idx.sort_by(|&a, &b| dump.matches[b].2.total_cmp(&dump.matches[a].2).then(a.cmp(&b)));
    idx.truncate(MAX_CORRESPONDENCES);
    idx
}

/// Inlier percentages of one pair's correspondences. `px_r` lies in frame
/// `fr`, `px_s` in frame `fs`, and `gt_rs` maps frame-`fs` points into
/// frame `fr`. Matches whose source or target has no depth count as 3D
/// outliers; matches whose target has no depth count as 2D outliers.
pub fn correspondence_inliers(
    px_r: &[[f64; 2]],
    px_s: &[[f64; 2]],
    fr: &Frame,
    fs: &Frame,
    gt_rs: &Pose,
) -> ([f64; 3], [f64; 3]) {
    let n = px_r.len();
    if n == 0 {
        return ([0.0; 3], [0.0; 3]);
    }
    let mut c3 = [0usize; 3];
    let mut c2 = [0usize; 3];
    for (a, b) in px_r.iter().zip(px_s) {
        let Ok(xs) = backproject(fs, *b) else { continue };
        let moved = gt_rs.transform_point(&xs);
        if let Ok(xr) = backproject(fr, *a) {
            let d = (xr - moved).norm() * 100.0;
            for (c, t) in c3.iter_mut().zip(INLIER_3D_CM) {
                *c += (d < t) as usize;
            }
        }
        if let Some(p) = fr.intrinsics.project(&moved) {
            let d = ((p[0] - a[0]).powi(2) + (p[1] - a[1]).powi(2)).sqrt();
            for (c, t) in c2.iter_mut().zip(INLIER_2D_PX) {
                *c += (d < t) as usize;
            }
        }
    }
    let pct = |c: [usize; 3]| c.map(|k| 100.0 * k as f64 / n as f64);
    (pct(c3), pct(c2))
}

/// Evaluates estimated world-from-frame poses against ground truth and,
/// when `dumps` is non-empty, the correspondences against the frames'
/// depth. Pairs missing from the dumps score 0% inliers.
pub fn evaluate(
    clip: &str,
    est: &[Pose],
    gt: &[Option<Pose>],
    dumps: &[PairDump],
    frames: &[Frame],
) -> Result<EvalReport> {
    if est.len() != gt.len() {
        return Err(Error::DimensionMismatch {
            expected: gt.len(),
            got: est.len(),
        });
    }
    let gt: Vec<Pose> = gt
        .iter()
        .enumerate()
        .map(|(k, p)| p.ok_or_else(|| Error::MissingGroundTruth(format!("frame {k} of {clip}"))))
        .collect::<Result<_>>()?;
    if !dumps.is_empty() && frames.len() != est.len() {
        return Err(Error::DimensionMismatch {
            expected: est.len(),
            got: frames.len(),
        });
    }
    let mut pairs = Vec::new();
    for i in 0..est.len() {
        for j in i + 1..est.len() {
            let e = est[i].between(&est[j]);
            let g = gt[i].between(&gt[j]);
            let rot_err_deg = angular_error(&e.rotation, &g.rotation);
            let tr_err_cm = translation_error(&e, &g);
            let mut pe = PairEval {
                i,
                j,
                rot_err_deg,
                tr_err_cm,
                correspondences: 0,
                in3d: None,
                in2d: None,
            };
            if !dumps.is_empty() {
                let found = dumps
                    .iter()
                    .find(|d| (d.src_frame, d.dst_frame) == (i, j) || (d.src_frame, d.dst_frame) == (j, i));
                let (in3d, in2d) = match found {
                    Some(d) => {
                        let top = top_matches(d);
                        pe.correspondences = top.len();
                        let src: Vec<[f64; 2]> = top.iter().map(|&k| d.src_px[k]).collect();
                        let dst: Vec<[f64; 2]> = top.iter().map(|&k| d.dst_px[k]).collect();
                        let (fr, fs) = (&frames[d.src_frame], &frames[d.dst_frame]);
                        let gt_rs = gt[d.src_frame].between(&gt[d.dst_frame]);
                        correspondence_inliers(&src, &dst, fr, fs, &gt_rs)
                    }
                    None => ([0.0; 3], [0.0; 3]),
                };
                pe.in3d = Some(in3d);
                pe.in2d = Some(in2d);
            }
            pairs.push(pe);
        }
    }
    Ok(EvalReport::from_pairs(clip, pairs))
}

/// Evaluates against the ground-truth poses stored on the frames.
pub fn evaluate_frames(clip: &str, est: &[Pose], frames: &[Frame], dumps: &[PairDump]) -> Result<EvalReport> {
    let gt: Vec<Option<Pose>> = frames.iter().map(|f| f.gt_pose).collect();
    evaluate(clip, est, &gt, dumps, frames)
}
