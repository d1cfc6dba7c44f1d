use std::path::PathBuf;

use thiserror::Error;

/// Every failure the registration engine can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("synchronization did not converge (residual {residual:.3e})")]
    ConvergenceFailure { residual: f64 },
    #[error("insufficient anchors: {found} survived, {required} required")]
    InsufficientAnchors { found: usize, required: usize },
    #[error("anchor set is empty")]
    EmptyAnchors,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("all correspondence weights are zero")]
    AllZeroWeights,
    #[error("pose graph is disconnected: frame {0} unreachable from frame 0")]
    DisconnectedGraph(usize),
    #[error("invalid depth at pixel ({u:.2}, {v:.2})")]
    InvalidDepth { u: f64, v: f64 },
    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),
    #[error("missing ground truth: {0}")]
    MissingGroundTruth(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
