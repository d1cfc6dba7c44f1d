//! Weight files for the attention block and the GRU update head.
//!
//! JSON object; every section is optional. Matrices are arrays of rows.
//!
//! ```text
//! {
//!   "dims": {"attention": d, "gru_hidden": h, "gru_input": 12},
//!   "W_Q": [[...], ...], "W_K": ..., "W_V": ..., "W_R": ...,      // d × d
//!   "gru": {
//!     "W_z": ..., "W_r": ..., "W_h": ...,   // h × (h + gru_input), acting on [hidden; input]
//!     "b_z": [...], "b_r": [...], "b_h": [...],                      // h
//!     "head": ...,                                                   // 9 × h
//!     "head_bias": [...]                                             // 9
//!   }
//! }
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coherence::AttentionWeights;
use crate::error::{Error, Result};
use crate::pose::gru::GruWeights;

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attention: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gru_hidden: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gru_input: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruSection {
    #[serde(rename = "W_z")]
    pub w_z: Rows,
    #[serde(rename = "W_r")]
    pub w_r: Rows,
    #[serde(rename = "W_h")]
    pub w_h: Rows,
    pub b_z: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_h: Vec<f64>,
    pub head: Rows,
    pub head_bias: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightFile {
    #[serde(default)]
    pub dims: Dims,
    #[serde(rename = "W_Q", skip_serializing_if = "Option::is_none")]
    pub w_q: Option<Rows>,
    #[serde(rename = "W_K", skip_serializing_if = "Option::is_none")]
    pub w_k: Option<Rows>,
    #[serde(rename = "W_V", skip_serializing_if = "Option::is_none")]
    pub w_v: Option<Rows>,
    #[serde(rename = "W_R", skip_serializing_if = "Option::is_none")]
    pub w_r: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gru: Option<GruSection>,
}

fn to_matrix(rows: &Rows, what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config(format!("{what}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl WeightFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn attention(&self) -> Result<Option<AttentionWeights>> {
        let (Some(q), Some(k), Some(v), Some(r)) = (&self.w_q, &self.w_k, &self.w_v, &self.w_r) else {
            if self.w_q.is_some() || self.w_k.is_some() || self.w_v.is_some() || self.w_r.is_some() {
                return Err(Error::Config("attention needs all of W_Q, W_K, W_V, W_R".into()));
            }
            return Ok(None);
        };
        let w = AttentionWeights {
            w_q: to_matrix(q, "W_Q")?,
            w_k: to_matrix(k, "W_K")?,
            w_v: to_matrix(v, "W_V")?,
            w_r: to_matrix(r, "W_R")?,
        };
        w.validate()?;
        if let Some(d) = self.dims.attention {
            if d != w.dim() {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: w.dim(),
                });
            }
        }
        Ok(Some(w))
    }

    pub fn gru(&self) -> Result<Option<GruWeights>> {
        let Some(g) = &self.gru else { return Ok(None) };
        let w = GruWeights {
            w_z: to_matrix(&g.w_z, "W_z")?,
            b_z: DVector::from_vec(g.b_z.clone()),
            w_r: to_matrix(&g.w_r, "W_r")?,
            b_r: DVector::from_vec(g.b_r.clone()),
            w_h: to_matrix(&g.w_h, "W_h")?,
            b_h: DVector::from_vec(g.b_h.clone()),
            head: to_matrix(&g.head, "head")?,
            head_bias: DVector::from_vec(g.head_bias.clone()),
        };
        w.validate()?;
        if let Some(h) = self.dims.gru_hidden {
            if h != w.hidden_dim() {
                return Err(Error::DimensionMismatch {
                    expected: h,
                    got: w.hidden_dim(),
                });
            }
        }
        Ok(Some(w))
    }

    pub fn from_parts(attention: Option<&AttentionWeights>, gru: Option<&GruWeights>) -> Self {
        let mut f = WeightFile::default();
        if let Some(a) = attention {
            f.dims.attention = Some(a.dim());
            f.w_q = Some(to_rows(&a.w_q));
            f.w_k = Some(to_rows(&a.w_k));
            f.w_v = Some(to_rows(&a.w_v));
            f.w_r = Some(to_rows(&a.w_r));
        }
        if let Some(g) = gru {
            f.dims.gru_hidden = Some(g.hidden_dim());
            f.dims.gru_input = Some(g.input_dim());
            f.gru = Some(GruSection {
                w_z: to_rows(&g.w_z),
                w_r: to_rows(&g.w_r),
                w_h: to_rows(&g.w_h),
                b_z: g.b_z.iter().copied().collect(),
                b_r: g.b_r.iter().copied().collect(),
                b_h: g.b_h.iter().copied().collect(),
                head: to_rows(&g.head),
                head_bias: g.head_bias.iter().copied().collect(),
            });
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        let a = AttentionWeights::random(4, 2);
        let g = GruWeights::seeded(3, 12, 5);
        WeightFile::from_parts(Some(&a), Some(&g)).save(&path).unwrap();
        let back = WeightFile::load(&path).unwrap();
        assert_eq!(back.attention().unwrap().unwrap(), a);
        assert_eq!(back.gru().unwrap().unwrap(), g);
    }

    #[test]
    fn partial_attention_is_rejected() {
        let f = WeightFile {
            w_q: Some(vec![vec![1.0]]),
            ..WeightFile::default()
        };
        assert!(f.attention().is_err());
        assert!(WeightFile::default().attention().unwrap().is_none());
    }
}
