use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::stream;

/// Projection matrices of the anchor-aware self-attention block.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub w_q: DMatrix<f64>,
    pub w_k: DMatrix<f64>,
    pub w_v: DMatrix<f64>,
    pub w_r: DMatrix<f64>,
}

impl AttentionWeights {
    pub fn dim(&self) -> usize {
        self.w_q.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for m in [&self.w_q, &self.w_k, &self.w_v, &self.w_r] {
            if m.shape() != (d, d) {
                return Err(Error::DimensionMismatch {
                    expected: d * d,
                    got: m.len(),
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("attention weight is not finite".into()));
            }
        }
        Ok(())
    }

    /// Gaussian weights with variance `1 / d`.
    pub fn random(dim: usize, seed: u64) -> Self {
        let mut rng = stream(&[seed, 61]);
        let scale = 1.0 / (dim as f64).sqrt();
        let mut draw = || DMatrix::from_fn(dim, dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        AttentionWeights {
            w_q: draw(),
            w_k: draw(),
            w_v: draw(),
            w_r: draw(),
        }
    }
}

fn check(m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            got: m.len(),
        });
    }
    Ok(())
}

/// Row-softmax attention matrix `a` of features `x` (N × d) with distance
/// embeddings `r` (N × d):
/// `e_pq = (x_p W_Q + r_p W_R) · (x_q W_K + r_q W_R) / sqrt(d)`.
pub fn attention_matrix(x: &DMatrix<f64>, r: &DMatrix<f64>, w: &AttentionWeights) -> Result<DMatrix<f64>> {
    let (n, d) = x.shape();
    w.validate()?;
    check(r, n, d)?;
    check(&w.w_q, d, d)?;
    let q = x * &w.w_q + r * &w.w_r;
    let k = x * &w.w_k + r * &w.w_r;
    let mut e = q * k.transpose() / (d as f64).sqrt();
    for mut row in e.row_iter_mut() {
        let max = row.max();
        row.iter_mut().for_each(|v| *v = (*v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    Ok(e)
}

/// Anchor-aware self-attention: output row `p` is `Σ_q a_pq x_q W_V`.
pub fn anchor_attention(x: &DMatrix<f64>, r: &DMatrix<f64>, w: &AttentionWeights) -> Result<DMatrix<f64>> {
    let a = attention_matrix(x, r, w)?;
    Ok(a * x * &w.w_v)
}
