use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frames::FeatureGrid;

/// Pairwise descriptor affinities (higher = more similar).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub values: DMatrix<f64>,
}

impl ScoreMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("score matrix has non-finite entries".into()));
        }
        Ok(ScoreMatrix { values })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    /// Adds `value` to every entry.
    pub fn shifted(&self, value: f64) -> ScoreMatrix {
        ScoreMatrix {
            values: self.values.add_scalar(value),
        }
    }
}

/// Dot products between every descriptor of `a` and every descriptor of `b`.
pub fn score_matrix(a: &[&[f64]], b: &[&[f64]]) -> Result<ScoreMatrix> {
    let dim = a.first().or(b.first()).map_or(0, |d| d.len());
    for d in a.iter().chain(b) {
        if d.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: d.len(),
            });
        }
    }
    let values = DMatrix::from_fn(a.len(), b.len(), |r, s| a[r].iter().zip(b[s]).map(|(x, y)| x * y).sum());
    ScoreMatrix::new(values)
}

/// Descriptors of the listed cells of a grid.
pub fn descriptors<'a>(grid: &'a FeatureGrid, cells: &[usize]) -> Vec<&'a [f64]> {
    cells.iter().map(|&c| grid.descriptor(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    #[test]
    fn identical_orthonormal_sets_give_identity() {
        let a = basis(4);
        let r: Vec<&[f64]> = a.iter().map(|v| v.as_slice()).collect();
        let s = score_matrix(&r, &r).unwrap();
        assert_eq!(s.values, DMatrix::identity(4, 4));
    }

    #[test]
    fn permuted_set_moves_the_argmax() {
        let a = basis(5);
        let perm = [3, 0, 4, 1, 2];
        let ra: Vec<&[f64]> = a.iter().map(|v| v.as_slice()).collect();
        let rb: Vec<&[f64]> = perm.iter().map(|&p| a[p].as_slice()).collect();
        let s = score_matrix(&ra, &rb).unwrap();
        for r in 0..5 {
            let arg = (0..5)
                .max_by(|&x, &y| s.values[(r, x)].total_cmp(&s.values[(r, y)]))
                .unwrap();
            assert_eq!(perm[arg], r);
        }
    }

    #[test]
    fn zero_descriptors_and_mismatch() {
        let z = vec![0.0; 3];
        let s = score_matrix(&[&z, &z], &[&z]).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
        let short = vec![1.0; 2];
        assert!(matches!(
            score_matrix(&[&z], &[&short]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }
}
