use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole intrinsics. Pixel centers sit at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Config("focal lengths must be positive".into()));
        }
        let inside = (0.0..=(self.width as f64 - 1.0)).contains(&self.cx)
            && (0.0..=(self.height as f64 - 1.0)).contains(&self.cy);
        if !inside {
            return Err(Error::Config("principal point outside image".into()));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Camera-frame point to pixel. `None` behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<[f64; 2]> {
        if !(p.z > 0.0) {
            return None;
        }
        Some([self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy])
    }

    /// Pixel and metric depth to a camera-frame point.
    pub fn unproject(&self, px: [f64; 2], depth: f64) -> Vector3<f64> {
        Vector3::new((px[0] - self.cx) / self.fx, (px[1] - self.cy) / self.fy, 1.0) * depth
    }

    /// Whether a continuous pixel coordinate falls inside the image.
    pub fn contains(&self, px: [f64; 2]) -> bool {
        px[0] >= -0.5 && px[1] >= -0.5 && px[0] < self.width as f64 - 0.5 && px[1] < self.height as f64 - 0.5
    }

    /// Intrinsics after resampling the image to `width × height`.
    pub fn resized(&self, width: usize, height: usize) -> Intrinsics {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Intrinsics {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: (self.cx + 0.5) * sx - 0.5,
            cy: (self.cy + 0.5) * sy - 0.5,
            width,
            height,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resize_keeps_rays() {
        let k = Intrinsics::new(500.0, 500.0, 319.5, 239.5, 640, 480).unwrap();
        let r = k.resized(256, 256);
        let p = Vector3::new(0.2, -0.1, 2.0);
        let a = k.project(&p).unwrap();
        let b = r.project(&p).unwrap();
        assert!(((a[0] + 0.5) * 256.0 / 640.0 - 0.5 - b[0]).abs() < 1e-9);
        assert!(((a[1] + 0.5) * 256.0 / 480.0 - 0.5 - b[1]).abs() < 1e-9);
    }

    #[test]
    fn invalid_intrinsics() {
        assert!(Intrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 9.0, 1.0, 4, 4).is_err());
    }
}
