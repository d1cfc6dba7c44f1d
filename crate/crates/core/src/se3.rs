//! Rigid-body geometry: rotations stored as full 3x3 matrices, poses, the 6D
//! rotation encoding used by the pose-update head, and pose error metrics.

use std::ops::Mul;

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm below which a 6D column is treated as degenerate.
pub const DECODE_EPS: f64 = 1e-12;

/// Round-off tolerated outside [-1, 1] in the arccos argument before it is
/// reported as a numerical failure.
pub const ACOS_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps a matrix without checking orthonormality.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle_rad: f64) -> Self {
        let axis = Unit::new_normalize(*axis);
        Rotation(*nalgebra::Rotation3::from_axis_angle(&axis, angle_rad).matrix())
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>) -> Self {
        Rotation(*q.to_rotation_matrix().matrix())
    }

    /// Nearest rotation in the Frobenius sense (SVD projection with
    /// reflection correction).
    pub fn project(m: &Matrix3<f64>) -> Result<Self> {
        let svd = m.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(Error::Numerical("SVD failed in SO(3) projection".into())),
        };
        let d = (u * v_t).determinant().signum();
        let r = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t;
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite SO(3) projection".into()));
        }
        Ok(Rotation(r))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn to_quaternion(&self) -> UnitQuaternion<f64> {
        let r = nalgebra::Rotation3::from_matrix_unchecked(self.0);
        let q = UnitQuaternion::from_rotation_matrix(&r);
        if q.w < 0.0 {
            UnitQuaternion::new_unchecked(-q.into_inner())
        } else {
            q
        }
    }

    /// First two columns, the encoding consumed by [`decode_6d`].
    pub fn to_6d(&self) -> [f64; 6] {
        let m = &self.0;
        [m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(0, 1)], m[(1, 1)], m[(2, 1)]]
    }

    /// Max deviation of `RᵀR` from identity and of `det R` from one.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = (self.0.transpose() * self.0 - Matrix3::identity()).abs().max();
        gram.max((self.0.determinant() - 1.0).abs())
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Rigid transform `x ↦ R x + t` with translation in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Pose { rotation, translation }
    }

    pub fn identity() -> Self {
        Pose::new(Rotation::identity(), Vector3::zeros())
    }

    pub fn inverse(&self) -> Self {
        let r_inv = self.rotation.inverse();
        Pose::new(r_inv, -(r_inv * self.translation))
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * *p + self.translation
    }

    /// Relative transform `self⁻¹ · other`: maps points of `other`'s frame
    /// into `self`'s frame when both are world-from-frame poses.
    pub fn between(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

/// Pose update predicted in the 6D rotation encoding plus a translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseDelta6D {
    pub rot6d: [f64; 6],
    pub trans: [f64; 3],
}

impl PoseDelta6D {
    /// Encoding of the identity update.
    pub fn identity() -> Self {
        PoseDelta6D {
            rot6d: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            trans: [0.0; 3],
        }
    }

    pub fn from_pose(pose: &Pose) -> Self {
        let t = pose.translation;
        PoseDelta6D {
            rot6d: pose.rotation.to_6d(),
            trans: [t.x, t.y, t.z],
        }
    }

    /// The rigid motion this update stands for.
    pub fn exp(&self) -> Result<Pose> {
        Ok(Pose::new(
            decode_6d(&self.rot6d)?,
            Vector3::from_column_slice(&self.trans),
        ))
    }
}

/// Gram–Schmidt decoding of two 3-vectors into a rotation; the third column
/// is the cross product of the first two.
pub fn decode_6d(rot6d: &[f64; 6]) -> Result<Rotation> {
    let a1 = Vector3::new(rot6d[0], rot6d[1], rot6d[2]);
    let a2 = Vector3::new(rot6d[3], rot6d[4], rot6d[5]);
    let n1 = a1.norm();
    if !(n1 > DECODE_EPS) {
        return Err(Error::DegenerateInput("first 6D column has zero norm"));
    }
    let b1 = a1 / n1;
    let ortho = a2 - b1 * b1.dot(&a2);
    let n2 = ortho.norm();
    if !(n2 > DECODE_EPS) {
        return Err(Error::DegenerateInput("6D columns are parallel"));
    }
    let b2 = ortho / n2;
    let b3 = b1.cross(&b2);
    Ok(Rotation(Matrix3::from_columns(&[b1, b2, b3])))
}

/// `pose · Exp(delta)`.
pub fn retract(pose: &Pose, delta: &PoseDelta6D) -> Result<Pose> {
    Ok(pose.compose(&delta.exp()?))
}

fn cos_of_relative(a: &Rotation, b: &Rotation) -> f64 {
    ((a.matrix().transpose() * b.matrix()).trace() - 1.0) / 2.0
}

/// Geodesic angle between two rotations in degrees, in [0, 180].
///
/// Equal to `acos((tr(aᵀb) - 1) / 2)` with the argument clamped to [-1, 1];
/// evaluated through `atan2` so that angles near zero keep full precision.
pub fn angular_error(a: &Rotation, b: &Rotation) -> f64 {
    let m = a.matrix().transpose() * b.matrix();
    let sin = 0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm();
    let cos = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    sin.atan2(cos).to_degrees()
}

/// Like [`angular_error`] but fails when the arccos argument leaves
/// [-1, 1] by more than [`ACOS_SLACK`], which only happens for inputs that
/// are not rotations.
pub fn checked_angular_error(a: &Rotation, b: &Rotation) -> Result<f64> {
    let c = cos_of_relative(a, b);
    if !c.is_finite() || c.abs() > 1.0 + ACOS_SLACK {
        return Err(Error::Numerical(format!("rotation trace out of range (cos = {c})")));
    }
    Ok(angular_error(a, b))
}

/// Euclidean distance between translations, in centimeters.
pub fn translation_error(a: &Pose, b: &Pose) -> f64 {
    (a.translation - b.translation).norm() * 100.0
}

/// Skew-symmetric cross-product matrix.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rot_z(deg: f64) -> Rotation {
        Rotation::from_axis_angle(&Vector3::z(), deg.to_radians())
    }

    #[test]
    fn decode_identity_columns() {
        let r = decode_6d(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(*r.matrix(), Matrix3::identity());
    }

    #[test]
    fn decode_is_scale_invariant() {
        let r = rot_z(30.0);
        let six = r.to_6d().map(|x| 2.0 * x);
        let back = decode_6d(&six).unwrap();
        assert!((back.matrix() - r.matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn decode_removes_parallel_part() {
        let r = decode_6d(&[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!((r.matrix() - Matrix3::identity()).abs().max() < 1e-15);
    }

    #[test]
    fn decode_rejects_degenerate() {
        assert!(matches!(decode_6d(&[0.0; 6]), Err(Error::DegenerateInput(_))));
        assert!(matches!(
            decode_6d(&[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn retract_identity_and_definition() {
        let p = Pose::new(rot_z(12.0), Vector3::new(0.1, -0.2, 0.3));
        let q = retract(&p, &PoseDelta6D::identity()).unwrap();
        assert!((q.rotation.matrix() - p.rotation.matrix()).abs().max() < 1e-12);
        assert!((q.translation - p.translation).norm() < 1e-12);

        let target = Pose::new(rot_z(-40.0), Vector3::new(1.0, 2.0, 3.0));
        let r = retract(&Pose::identity(), &PoseDelta6D::from_pose(&target)).unwrap();
        assert!((r.rotation.matrix() - target.rotation.matrix()).abs().max() < 1e-12);
        assert!((r.translation - target.translation).norm() < 1e-12);
    }

    #[test]
    fn angular_error_cases() {
        let r = rot_z(33.0);
        assert!(angular_error(&r, &r) < 1e-12);
        assert!((angular_error(&Rotation::identity(), &rot_z(10.0)) - 10.0).abs() < 1e-9);
        let flip = Rotation::from_axis_angle(&Vector3::x(), std::f64::consts::PI);
        assert!((angular_error(&Rotation::identity(), &flip) - 180.0).abs() < 1e-9);
    }

    #[test]
    fn checked_angular_error_flags_non_rotations() {
        let bad = Rotation::from_matrix_unchecked(Matrix3::identity() * 3.0);
        assert!(checked_angular_error(&Rotation::identity(), &bad).is_err());
        assert!(checked_angular_error(&Rotation::identity(), &rot_z(5.0)).is_ok());
    }

    #[test]
    fn translation_error_cases() {
        let a = Pose::identity();
        let b = Pose::new(Rotation::identity(), Vector3::new(0.03, 0.04, 0.0));
        assert_eq!(translation_error(&a, &a), 0.0);
        assert!((translation_error(&a, &b) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn projection_recovers_rotation() {
        let r = rot_z(77.0);
        let noisy = r.matrix() * 1.5;
        let p = Rotation::project(&noisy).unwrap();
        assert!((p.matrix() - r.matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn quaternion_round_trip() {
        let r = Rotation::from_axis_angle(&Vector3::new(1.0, -2.0, 0.5), 2.5);
        let q = r.to_quaternion();
        assert!(q.w >= 0.0);
        let back = Rotation::from_quaternion(&q);
        assert!((back.matrix() - r.matrix()).abs().max() < 1e-12);
    }

    fn arb_vec3() -> impl Strategy<Value = Vector3<f64>> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    fn arb_rotation() -> impl Strategy<Value = Rotation> {
        (arb_vec3(), 0.0..std::f64::consts::PI).prop_filter_map("axis", |(a, ang)| {
            (a.norm() > 1e-3).then(|| Rotation::from_axis_angle(&a, ang))
        })
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (arb_rotation(), arb_vec3()).prop_map(|(r, t)| Pose::new(r, t))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn decode_always_valid(v in proptest::array::uniform6(-10.0..10.0f64)) {
            if let Ok(r) = decode_6d(&v) {
                prop_assert!(r.orthonormality_error() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn decode_round_trip(r in arb_rotation()) {
            let back = decode_6d(&r.to_6d()).unwrap();
            prop_assert!((back.matrix() - r.matrix()).abs().max() < 1e-12);
        }

        #[test]
        fn pose_inverse_and_associativity(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let id = a.compose(&a.inverse());
            prop_assert!((id.rotation.matrix() - Matrix3::identity()).abs().max() < 1e-9);
            prop_assert!(id.translation.norm() < 1e-9);
            let l = (a * b) * c;
            let r = a * (b * c);
            prop_assert!((l.rotation.matrix() - r.rotation.matrix()).abs().max() < 1e-9);
            prop_assert!((l.translation - r.translation).norm() < 1e-9);
        }

        #[test]
        fn retract_composes(p in arb_pose(), d1 in arb_pose(), d2 in arb_pose()) {
            let e1 = PoseDelta6D::from_pose(&d1);
            let e2 = PoseDelta6D::from_pose(&d2);
            let stepped = retract(&retract(&p, &e1).unwrap(), &e2).unwrap();
            let direct = p * e1.exp().unwrap() * e2.exp().unwrap();
            prop_assert!((stepped.rotation.matrix() - direct.rotation.matrix()).abs().max() < 1e-10);
            prop_assert!((stepped.translation - direct.translation).norm() < 1e-10);
        }

        #[test]
        fn angular_error_metric(a in arb_rotation(), b in arb_rotation(), c in arb_rotation()) {
            let ab = angular_error(&a, &b);
            prop_assert!((ab - angular_error(&b, &a)).abs() < 1e-9);
            prop_assert!(ab <= angular_error(&a, &c) + angular_error(&c, &b) + 1e-9);
        }
    }
}
