//! Correspondence dumps.
//!
//! JSON array with one object per ordered frame pair, sorted by
//! `(src_frame, dst_frame)`, matches sorted by source index:
//!
//! ```text
//! [{"src_frame": 0, "dst_frame": 1,
//!   "matches": [[r, s, confidence], ...],
//!   "src_px": [[u, v], ...], "dst_px": [[u, v], ...]}]
//! ```
//!
//! `r` and `s` index fine grid cells; `src_px[k]` and `dst_px[k]` are the
//! matched pixel locations of `matches[k]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDump {
    pub src_frame: usize,
    pub dst_frame: usize,
    pub matches: Vec<(usize, usize, f64)>,
    pub src_px: Vec<[f64; 2]>,
    pub dst_px: Vec<[f64; 2]>,
}

impl PairDump {
    /// Sorts matches by source index, keeping pixel arrays aligned.
    pub fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.matches.len()).collect();
        idx.sort_by_key(|&k| (self.matches[k].0, self.matches[k].1));
        self.matches = idx.iter().map(|&k| self.matches[k]).collect();
        self.src_px = idx.iter().map(|&k| self.src_px[k]).collect();
        self.dst_px = idx.iter().map(|&k| self.dst_px[k]).collect();
    }
}

pub fn write_dump(path: &Path, pairs: &[PairDump]) -> Result<()> {
    let mut sorted = pairs.to_vec();
    sorted.sort_by_key(|p| (p.src_frame, p.dst_frame));
    for p in &mut sorted {
        p.sort();
    }
    let text = serde_json::to_string(&sorted)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_dump(path: &Path) -> Result<Vec<PairDump>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let pairs: Vec<PairDump> = serde_json::from_str(&text)?;
    for p in &pairs {
        if p.src_px.len() != p.matches.len() || p.dst_px.len() != p.matches.len() {
            return Err(Error::parse(path, "pixel arrays must align with matches"));
        }
    }
    Ok(pairs)
}
