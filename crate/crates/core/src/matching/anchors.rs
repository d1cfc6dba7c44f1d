use nalgebra::Vector3;

use super::sync::SyncedMatches;
use crate::error::{Error, Result};
use crate::frames::{backproject, Frame};

/// Anchor points of a clip: the same `K` scene points located in every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    /// `pixels[frame][k]`
    pub pixels: Vec<Vec<[f64; 2]>>,
    /// `points[frame][k]`, camera coordinates of that frame, meters.
    pub points: Vec<Vec<Vector3<f64>>>,
}

impl AnchorSet {
    pub fn new(pixels: Vec<Vec<[f64; 2]>>, points: Vec<Vec<Vector3<f64>>>) -> Result<Self> {
        let k = pixels.first().map_or(0, Vec::len);
        if pixels.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: pixels.len(),
                got: points.len(),
            });
        }
        for (px, pt) in pixels.iter().zip(&points) {
            if px.len() != k || pt.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: px.len().min(pt.len()),
                });
            }
            if pt.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
                return Err(Error::Numerical("anchor point is not finite".into()));
            }
        }
        Ok(AnchorSet { pixels, points })
    }

    pub fn len(&self) -> usize {
        self.pixels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame_count(&self) -> usize {
        self.pixels.len()
    }

    /// Keeps only the anchors listed in `keep` (in that order).
    pub fn select(&self, keep: &[usize]) -> AnchorSet {
        AnchorSet {
            pixels: self
                .pixels
                .iter()
                .map(|f| keep.iter().map(|&k| f[k]).collect())
                .collect(),
            points: self
                .points
                .iter()
                .map(|f| keep.iter().map(|&k| f[k]).collect())
                .collect(),
        }
    }

    pub fn require(self, min_anchors: usize) -> Result<Self> {
        if self.len() < min_anchors {
            return Err(Error::InsufficientAnchors {
                found: self.len(),
                required: min_anchors,
            });
        }
        Ok(self)
    }
}

/// Turns the groups present in every frame into anchors. `keypoints[f][a]`
/// is the pixel of keypoint `a` of frame `f`. Groups whose depth is invalid
/// in any frame are dropped.
pub fn extract_anchors(
    sync: &SyncedMatches,
    keypoints: &[Vec<[f64; 2]>],
    frames: &[Frame],
    min_anchors: usize,
) -> Result<AnchorSet> {
    let n = frames.len();
    if keypoints.len() != n || sync.frame_sizes.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: keypoints.len().min(sync.frame_sizes.len()),
        });
    }
    let mut pixels = vec![Vec::new(); n];
    let mut points = vec![Vec::new(); n];
    'groups: for c in sync.complete() {
        let mut px = Vec::with_capacity(n);
        let mut pt = Vec::with_capacity(n);
        for f in 0..n {
            let p = keypoints[f][c[f].unwrap()];
            match backproject(&frames[f], p) {
                Ok(x) => {
                    px.push(p);
                    pt.push(x);
                }
                Err(_) => continue 'groups,
            }
        }
        for f in 0..n {
            pixels[f].push(px[f]);
            points[f].push(pt[f]);
        }
    }
    AnchorSet::new(pixels, points)?.require(min_anchors)
}
