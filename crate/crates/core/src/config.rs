//! Pipeline configuration.
//!
//! The on-disk format is a flat TOML table of `key = value` lines; every key
//! is optional and falls back to the default below. Unknown keys are
//! rejected so typos do not silently run with defaults.
//!
//! ```text
//! # anchorreg.toml
//! inner_iters = 20
//! outer_iters = 3
//! sinkhorn_epsilon = 0.1
//! sigma_rs = 0.3
//! window = 7
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coherence::CoherenceConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed for every random choice the pipeline makes (GRU init, tie noise).
    pub seed: u64,
    /// Coarse keypoints selected per frame; also the synchronization universe.
    pub keypoints: usize,
    /// Upper bound on the factorization rank used by match synchronization.
    pub rank_cap: usize,
    pub sinkhorn_epsilon: f64,
    pub sinkhorn_iters: usize,
    pub slack_score: f64,
    /// Mutual-max probability a soft match must reach to become a hard match.
    pub match_threshold: f64,
    pub min_anchors: usize,
    /// Distance-embedding sensitivity, meters.
    pub sigma_d: f64,
    /// Spatial-coherence bandwidth, meters.
    pub sigma_rs: f64,
    /// Fine matching window side, in fine grid cells. Must be odd.
    pub window: usize,
    pub inner_iters: usize,
    pub outer_iters: usize,
    /// Mean reprojection error (pixels) above which an anchor is dropped.
    pub reproj_reject: f64,
    pub gru_hidden: usize,
    /// Temperature of the softmax turning fine affinities into Kabsch weights.
    pub weight_temperature: f64,
    /// Residual (meters) under which a fine match counts as an inlier in the
    /// pose-update summary.
    pub inlier_threshold: f64,
    /// Softmax temperature of the sub-pixel heat-map used for the output
    /// correspondences.
    pub subpixel_temperature: f64,
    /// Side (fine cells) of the window searched for sub-pixel refinement.
    pub subpixel_window: usize,
    pub use_spatial_coherence: bool,
    pub use_geometric_cost: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            keypoints: 64,
            rank_cap: 128,
            sinkhorn_epsilon: 0.1,
            sinkhorn_iters: 30,
            slack_score: 0.0,
            match_threshold: 0.5,
            min_anchors: 8,
            sigma_d: 0.6,
            sigma_rs: 0.3,
            window: 7,
            inner_iters: 20,
            outer_iters: 3,
            reproj_reject: 4.0,
            gru_hidden: 16,
            weight_temperature: 0.1,
            inlier_threshold: 0.05,
            subpixel_temperature: 1.0,
            subpixel_window: 5,
            use_spatial_coherence: true,
            use_geometric_cost: true,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::parse(path, msg),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.window == 0 || self.window % 2 == 0 {
            return fail("window must be a positive odd count");
        }
        if !(self.sinkhorn_epsilon > 0.0) {
            return fail("sinkhorn_epsilon must be positive");
        }
        if self.sinkhorn_iters == 0 {
            return fail("sinkhorn_iters must be at least 1");
        }
        if !(self.sigma_d > 0.0 && self.sigma_rs > 0.0) {
            return fail("sigma_d and sigma_rs must be positive");
        }
        if !(self.weight_temperature > 0.0 && self.subpixel_temperature > 0.0) {
            return fail("temperatures must be positive");
        }
        if self.subpixel_window == 0 || self.subpixel_window % 2 == 0 {
            return fail("subpixel_window must be a positive odd count");
        }
        if self.keypoints == 0 || self.rank_cap == 0 {
            return fail("keypoints and rank_cap must be positive");
        }
        if self.gru_hidden == 0 {
            return fail("gru_hidden must be positive");
        }
        if !(0.0..=1.0).contains(&self.match_threshold) {
            return fail("match_threshold must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn coherence(&self) -> CoherenceConfig {
        CoherenceConfig {
            sigma_d: self.sigma_d,
            sigma_rs: self.sigma_rs,
            window: self.window,
        }
    }
}
