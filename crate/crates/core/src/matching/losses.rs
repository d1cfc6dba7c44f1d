use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Orthogonality and bijectivity losses of a soft assignment `s_ij`
/// (`n × m`, slack removed) and its reverse `s_ji` (`m × n`):
///
/// `l_orth = ‖S Sᵀ − I‖ + ‖Sᵀ S − I‖`,
/// `l_bij = ‖S_ij S_ji − I‖ + ‖S_ji S_ij − I‖` (Frobenius norms).
pub fn cycle_losses(s_ij: &DMatrix<f64>, s_ji: &DMatrix<f64>) -> Result<(f64, f64)> {
    let (n, m) = s_ij.shape();
    if s_ji.shape() != (m, n) {
        return Err(Error::DimensionMismatch {
            expected: m * n,
            got: s_ji.len(),
        });
    }
    let eye_n = DMatrix::<f64>::identity(n, n);
    let eye_m = DMatrix::<f64>::identity(m, m);
    let l_orth = (s_ij * s_ij.transpose() - &eye_n).norm() + (s_ij.transpose() * s_ij - &eye_m).norm();
    let l_bij = (s_ij * s_ji - &eye_n).norm() + (s_ji * s_ij - &eye_m).norm();
    Ok((l_orth, l_bij))
}
