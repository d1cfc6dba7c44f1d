//! Recurrent pose-update head.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::se3::PoseDelta6D;

/// Size of the per-pair summary fed to the GRU: relative Kabsch update
/// (6D rotation + translation), weighted mean residual, inlier fraction and
/// mean match confidence.
pub const GRU_INPUT_DIM: usize = 12;
pub const GRU_OUTPUT_DIM: usize = 9;
/// Added to the head output so a zero head decodes to the identity update.
pub const IDENTITY_BIAS: [f64; 9] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];

/// Gate matrices act on `[h; x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights {
    pub w_z: DMatrix<f64>,
    pub b_z: DVector<f64>,
    pub w_r: DMatrix<f64>,
    pub b_r: DVector<f64>,
    pub w_h: DMatrix<f64>,
    pub b_h: DVector<f64>,
    /// `9 × hidden`
    pub head: DMatrix<f64>,
    pub head_bias: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruState {
    pub hidden: DVector<f64>,
}

impl GruState {
    pub fn zeros(hidden: usize) -> Self {
        GruState {
            hidden: DVector::zeros(hidden),
        }
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl GruWeights {
    pub fn hidden_dim(&self) -> usize {
        self.b_z.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.ncols() - self.hidden_dim()
    }

    /// All-zero gates and head.
    pub fn zeros(hidden: usize, input: usize) -> Self {
        GruWeights {
            w_z: DMatrix::zeros(hidden, hidden + input),
            b_z: DVector::zeros(hidden),
            w_r: DMatrix::zeros(hidden, hidden + input),
            b_r: DVector::zeros(hidden),
            w_h: DMatrix::zeros(hidden, hidden + input),
            b_h: DVector::zeros(hidden),
            head: DMatrix::zeros(GRU_OUTPUT_DIM, hidden),
            head_bias: DVector::zeros(GRU_OUTPUT_DIM),
        }
    }

    /// Seeded Gaussian gates (variance `1 / fan_in`) with a zero output head,
    /// so the cell runs but the pose update is the identity.
    pub fn seeded(hidden: usize, input: usize, seed: u64) -> Self {
        let mut rng = stream(&[seed, 71]);
        let scale = 1.0 / ((hidden + input) as f64).sqrt();
        let mut draw = || {
            DMatrix::from_fn(hidden, hidden + input, |_, _| {
                scale * rng.sample::<f64, _>(StandardNormal)
            })
        };
        let (w_z, w_r, w_h) = (draw(), draw(), draw());
        GruWeights {
            w_z,
            w_r,
            w_h,
            ..GruWeights::zeros(hidden, input)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden_dim();
        let cols = self.w_z.ncols();
        let shapes = [
            (self.w_r.shape(), (h, cols)),
            (self.w_h.shape(), (h, cols)),
            (self.w_z.shape(), (h, cols)),
            ((self.b_r.len(), 1), (h, 1)),
            ((self.b_h.len(), 1), (h, 1)),
            (self.head.shape(), (GRU_OUTPUT_DIM, h)),
            ((self.head_bias.len(), 1), (GRU_OUTPUT_DIM, 1)),
        ];
        for (got, want) in shapes {
            if got != want || cols < h {
                return Err(Error::DimensionMismatch {
                    expected: want.0 * want.1,
                    got: got.0 * got.1,
                });
            }
        }
        let finite = |m: &[f64]| m.iter().all(|v| v.is_finite());
        if ![
            self.w_z.as_slice(),
            self.w_r.as_slice(),
            self.w_h.as_slice(),
            self.b_z.as_slice(),
            self.b_r.as_slice(),
            self.b_h.as_slice(),
            self.head.as_slice(),
            self.head_bias.as_slice(),
        ]
        .iter()
        .all(|m| finite(m))
        {
            return Err(Error::Numerical("GRU weight is not finite".into()));
        }
        Ok(())
    }
}

/// One GRU update followed by the output head:
///
/// ```text
/// z = σ(W_z [h; x] + b_z)        r = σ(W_r [h; x] + b_r)
/// h̃ = tanh(W_h [r ⊙ h; x] + b_h)
/// h' = z ⊙ h + (1 − z) ⊙ h̃
/// δ = head h' + head_bias + (1,0,0, 0,1,0, 0,0,0)
/// ```
pub fn gru_step(weights: &GruWeights, state: &GruState, input: &[f64]) -> Result<(GruState, PoseDelta6D)> {
    let h = weights.hidden_dim();
    if state.hidden.len() != h {
        return Err(Error::DimensionMismatch {
            expected: h,
            got: state.hidden.len(),
        });
    }
    if input.len() != weights.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: weights.input_dim(),
            got: input.len(),
        });
    }
    let hx = DVector::from_iterator(h + input.len(), state.hidden.iter().chain(input).copied());
    let z = (&weights.w_z * &hx + &weights.b_z).map(sigmoid);
    let r = (&weights.w_r * &hx + &weights.b_r).map(sigmoid);
    let gated = DVector::from_iterator(
        h + input.len(),
        r.component_mul(&state.hidden).iter().chain(input).copied(),
    );
    let cand = (&weights.w_h * gated + &weights.b_h).map(f64::tanh);
    let hidden = DVector::from_fn(h, |k, _| z[k] * state.hidden[k] + (1.0 - z[k]) * cand[k]);
    let out = &weights.head * &hidden + &weights.head_bias;
    let mut rot6d = [0.0; 6];
    let mut trans = [0.0; 3];
    for k in 0..6 {
        rot6d[k] = out[k] + IDENTITY_BIAS[k];
    }
    for k in 0..3 {
        trans[k] = out[6 + k] + IDENTITY_BIAS[6 + k];
    }
    Ok((GruState { hidden }, PoseDelta6D { rot6d, trans }))
}
