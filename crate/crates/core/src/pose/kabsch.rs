use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::se3::{Pose, Rotation};

/// Paired 3D points: `target[k] ≈ T(source[k])`, weighted by `weights[k]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedCorrespondences3D {
    pub target: Vec<Vector3<f64>>,
    pub source: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
}

impl WeightedCorrespondences3D {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn push(&mut self, target: Vector3<f64>, source: Vector3<f64>, weight: f64) {
        self.target.push(target);
        self.source.push(source);
        self.weights.push(weight);
    }

    /// `Σ w ‖target − pose(source)‖²`.
    pub fn objective(&self, pose: &Pose) -> f64 {
        self.target
            .iter()
            .zip(&self.source)
            .zip(&self.weights)
            .map(|((t, s), w)| w * (t - pose.transform_point(s)).norm_squared())
            .sum()
    }
}

const RANK_TOL: f64 = 1e-12;

/// Closed-form minimizer of `Σ w ‖target − (R source + t)‖²`.
pub fn weighted_kabsch(c: &WeightedCorrespondences3D) -> Result<Pose> {
    if c.source.len() != c.target.len() || c.weights.len() != c.target.len() {
        return Err(Error::DimensionMismatch {
            expected: c.target.len(),
            got: c.source.len().min(c.weights.len()),
        });
    }
    if c.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Numerical(
            "kabsch weights must be finite and non-negative".into(),
        ));
    }
    let total: f64 = c.weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllZeroWeights);
    }
    let mut cs = Vector3::zeros();
    let mut ct = Vector3::zeros();
    for ((t, s), w) in c.target.iter().zip(&c.source).zip(&c.weights) {
        cs += s * *w;
        ct += t * *w;
    }
    cs /= total;
    ct /= total;

    let mut h = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    for ((t, s), w) in c.target.iter().zip(&c.source).zip(&c.weights) {
        let ds = s - cs;
        h += (ds * (t - ct).transpose()) * *w;
        scatter += (ds * ds.transpose()) * *w;
    }
    let mut ev = scatter.symmetric_eigenvalues().as_slice().to_vec();
    ev.sort_by(|a, b| b.total_cmp(a));
    if ev[0] <= 0.0 || ev[1] <= RANK_TOL * ev[0] {
        return Err(Error::DegenerateConfiguration("points span fewer than two dimensions"));
    }

    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let t = ct - r * cs;
    Ok(Pose::new(Rotation::from_matrix_unchecked(r), t))
}
