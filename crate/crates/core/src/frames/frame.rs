use nalgebra::Vector3;

use super::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::se3::Pose;

/// Relative depth spread above which the four pixels around a sub-pixel
/// location are treated as straddling a depth discontinuity.
const DEPTH_EDGE_RATIO: f64 = 1.05;

/// One RGB-D view. Depth is metric, 0 marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: usize,
    pub timestamp: f64,
    pub rgb: Vec<u8>,
    pub depth: Vec<f64>,
    pub intrinsics: Intrinsics,
    pub gt_pose: Option<Pose>,
}

impl Frame {
    pub fn new(id: usize, rgb: Vec<u8>, depth: Vec<f64>, intrinsics: Intrinsics) -> Result<Self> {
        let n = intrinsics.width * intrinsics.height;
        if rgb.len() != 3 * n {
            return Err(Error::DimensionMismatch {
                expected: 3 * n,
                got: rgb.len(),
            });
        }
        if depth.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: depth.len(),
            });
        }
        if depth.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::Config("depth must be finite and non-negative".into()));
        }
        Ok(Frame {
            id,
            timestamp: id as f64,
            rgb,
            depth,
            intrinsics,
            gt_pose: None,
        })
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn depth_px(&self, x: usize, y: usize) -> f64 {
        self.depth[y * self.width() + x]
    }

    /// Luma in [0, 1], row-major.
    pub fn gray(&self) -> Vec<f64> {
        self.rgb
            .chunks_exact(3)
            .map(|c| (0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64) / 255.0)
            .collect()
    }

    /// Metric depth at a continuous pixel location.
    ///
    /// Integer locations read the pixel. Elsewhere inverse depth is
    /// interpolated bilinearly over the four surrounding pixels, which is
    /// exact on planar surfaces; near discontinuities or invalid neighbours
    /// the nearest pixel is used instead.
    pub fn depth_at(&self, px: [f64; 2]) -> Option<f64> {
        if !self.intrinsics.contains(px) {
            return None;
        }
        let (w, h) = (self.width(), self.height());
        let nearest = || {
            let x = (px[0].round() as usize).min(w - 1);
            let y = (px[1].round() as usize).min(h - 1);
            let d = self.depth_px(x, y);
            (d > 0.0).then_some(d)
        };
        let x0 = px[0].floor();
        let y0 = px[1].floor();
        let fx = px[0] - x0;
        let fy = px[1] - y0;
        if fx.abs() < 1e-12 && fy.abs() < 1e-12 {
            return nearest();
        }
        if x0 < 0.0 || y0 < 0.0 || x0 as usize + 1 >= w || y0 as usize + 1 >= h {
            return nearest();
        }
        let (x0, y0) = (x0 as usize, y0 as usize);
        let d = [
            self.depth_px(x0, y0),
            self.depth_px(x0 + 1, y0),
            self.depth_px(x0, y0 + 1),
            self.depth_px(x0 + 1, y0 + 1),
        ];
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(0.0, f64::max);
        if !(lo > 0.0) || hi / lo > DEPTH_EDGE_RATIO {
            return nearest();
        }
        let inv = (1.0 - fx) * (1.0 - fy) / d[0] + fx * (1.0 - fy) / d[1] + (1.0 - fx) * fy / d[2] + fx * fy / d[3];
        Some(1.0 / inv)
    }
}

/// Camera-frame 3D point seen at pixel `px`.
pub fn backproject(frame: &Frame, px: [f64; 2]) -> Result<Vector3<f64>> {
    match frame.depth_at(px) {
        Some(d) => Ok(frame.intrinsics.unproject(px, d)),
        None => Err(Error::InvalidDepth { u: px[0], v: px[1] }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_frame(depth: f64) -> Frame {
        let k = Intrinsics::new(100.0, 100.0, 31.5, 23.5, 64, 48).unwrap();
        Frame::new(0, vec![0; 64 * 48 * 3], vec![depth; 64 * 48], k).unwrap()
    }

    #[test]
    fn principal_ray_and_unit_tangent() {
        let mut f = flat_frame(2.0);
        let p = backproject(&f, [f.intrinsics.cx, f.intrinsics.cy]).unwrap();
        assert!((p - Vector3::new(0.0, 0.0, 2.0)).norm() < 1e-12);

        f.intrinsics = Intrinsics::new(100.0, 100.0, 10.0, 20.0, 256, 48).unwrap();
        f.rgb = vec![0; 256 * 48 * 3];
        f.depth = vec![1.0; 256 * 48];
        let p = backproject(&f, [110.0, 20.0]).unwrap();
        assert!((p - Vector3::new(1.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn invalid_depth_is_reported() {
        let mut f = flat_frame(1.0);
        f.depth[5 * 64 + 7] = 0.0;
        assert!(matches!(backproject(&f, [7.0, 5.0]), Err(Error::InvalidDepth { .. })));
        assert!(backproject(&f, [-3.0, 5.0]).is_err());
    }

    #[test]
    fn project_backproject_round_trip() {
        let f = flat_frame(1.7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let px = [rng.random_range(0.0..63.0), rng.random_range(0.0..47.0)];
            let p = backproject(&f, px).unwrap();
            let q = f.intrinsics.project(&p).unwrap();
            assert!((q[0] - px[0]).abs() < 1e-9 && (q[1] - px[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn plane_depth_interpolation_is_exact() {
        // Slanted plane n·x = 1 with n = (0.1, -0.2, 0.5).
        let k = Intrinsics::new(80.0, 80.0, 15.5, 15.5, 32, 32).unwrap();
        let n = Vector3::new(0.1, -0.2, 0.5);
        let depth: Vec<f64> = (0..32 * 32)
            .map(|i| {
                let ray = k.unproject([(i % 32) as f64, (i / 32) as f64], 1.0);
                1.0 / n.dot(&ray)
            })
            .collect();
        let f = Frame::new(0, vec![0; 32 * 32 * 3], depth, k).unwrap();
        let p = backproject(&f, [10.37, 20.81]).unwrap();
        assert!((n.dot(&p) - 1.0).abs() < 1e-12);
    }
}
