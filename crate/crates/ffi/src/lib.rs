//! C ABI for the registration engine.
//!
//! Every fallible function returns an [`ArStatus`]; on failure the message
//! is available from [`ar_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Poses are
//! written as row-major 4×4 world-from-frame matrices.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use anchorreg::cli::{features, DescriptorKind, DUMP_FILE, TRAJECTORY_FILE};
use anchorreg::frames::{load_clip, ClipOptions};
use anchorreg::harness::bench::StageTimer;
use anchorreg::matching::dump::write_dump;
use anchorreg::matching::{sinkhorn, ScoreMatrix};
use anchorreg::pose::{register, weighted_kabsch, Registration, WeightedCorrespondences3D};
use anchorreg::trajectory::{write_tum, StampedPose};
use anchorreg::{Error, PipelineConfig, Pose};
use nalgebra::{DMatrix, Vector3};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Degenerate = 5,
    Numerical = 6,
    InsufficientAnchors = 7,
    MissingGroundTruth = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArDescriptor {
    Patch = 0,
    Oracle = 1,
}

/// Opaque pipeline configuration.
pub struct ArConfig {
    inner: PipelineConfig,
}

/// Opaque result of a registration run.
pub struct ArRegistration {
    inner: Registration,
    timestamps: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> ArStatus {
    match err {
        Error::Config(_) | Error::Parse { .. } => ArStatus::Config,
        Error::Io { .. } | Error::Image { .. } | Error::Json(_) => ArStatus::Io,
        Error::DimensionMismatch { .. } => ArStatus::InvalidArgument,
        Error::DegenerateInput(_)
        | Error::DegenerateGeometry(_)
        | Error::DegenerateConfiguration(_)
        | Error::AllZeroWeights
        | Error::DisconnectedGraph(_)
        | Error::InvalidDepth { .. }
        | Error::InfeasibleGeometry(_) => ArStatus::Degenerate,
        Error::Numerical(_) | Error::ConvergenceFailure { .. } => ArStatus::Numerical,
        Error::InsufficientAnchors { .. } | Error::EmptyAnchors => ArStatus::InsufficientAnchors,
        Error::MissingGroundTruth(_) => ArStatus::MissingGroundTruth,
    }
}

/// Runs `f`, turning errors and panics into a status plus last-error message.
fn guard(f: impl FnOnce() -> Result<(), (ArStatus, String)>) -> ArStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ArStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ArStatus::Panic
        }
    }
}

fn engine(err: Error) -> (ArStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (ArStatus, String) {
    (ArStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, (ArStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (ArStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

fn write_pose(pose: &Pose, out: &mut [f64]) {
    let r = pose.rotation.matrix();
    for row in 0..3 {
        for col in 0..3 {
            out[row * 4 + col] = r[(row, col)];
        }
        out[row * 4 + 3] = pose.translation[row];
    }
    out[12..16].copy_from_slice(&[0.0, 0.0, 0.0, 1.0]);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ar_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ar_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// New configuration with default values.
#[no_mangle]
pub extern "C" fn ar_config_new() -> *mut ArConfig {
    Box::into_raw(Box::new(ArConfig {
        inner: PipelineConfig::default(),
    }))
}

/// Loads a TOML configuration file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ar_config_load(path: *const c_char, out: *mut *mut ArConfig) -> ArStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path, "path")?;
        let inner = PipelineConfig::load(&path).map_err(engine)?;
        *out = Box::into_raw(Box::new(ArConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ar_config_set_seed(cfg: *mut ArConfig, seed: u64) -> ArStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.inner.seed = seed;
        Ok(())
    })
}

/// Sets the inner and outer iteration counts.
///
/// # Safety
/// `cfg` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ar_config_set_iterations(cfg: *mut ArConfig, inner: usize, outer: usize) -> ArStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.inner.inner_iters = inner;
        cfg.inner.outer_iters = outer;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ar_config_free(cfg: *mut ArConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Registers `frames` frames of the clip directory (`start`, `start +
/// stride`, …) and stores the result in `*out`. `descriptor` is an
/// `ArDescriptor` value; `cfg` may be null for defaults.
///
/// # Safety
/// `clip` must be a NUL-terminated string, `cfg` null or from this
/// library, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ar_register_clip(
    clip: *const c_char,
    cfg: *const ArConfig,
    descriptor: u32,
    frames: usize,
    stride: usize,
    start: usize,
    out: *mut *mut ArRegistration,
) -> ArStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let clip = path_arg(clip, "clip")?;
        let default = PipelineConfig::default();
        let cfg = cfg.as_ref().map_or(&default, |c| &c.inner);
        let kind = match descriptor {
            d if d == ArDescriptor::Patch as u32 => DescriptorKind::Patch,
            d if d == ArDescriptor::Oracle as u32 => DescriptorKind::Oracle,
            d => return Err((ArStatus::InvalidArgument, format!("unknown descriptor kind {d}"))),
        };
        let opts = ClipOptions {
            count: frames,
            stride,
            start,
            ..ClipOptions::default()
        };
        let loaded = load_clip(&clip, &opts).map_err(engine)?;
        let timestamps = loaded.iter().map(|f| f.timestamp).collect();
        let feats = features(kind, &clip, &loaded).map_err(engine)?;
        let inner = register(loaded, feats, cfg, None, &mut StageTimer::new()).map_err(engine)?;
        *out = Box::into_raw(Box::new(ArRegistration { inner, timestamps }));
        Ok(())
    })
}

/// # Safety
/// `reg` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ar_registration_frame_count(reg: *const ArRegistration) -> usize {
    reg.as_ref().map_or(0, |r| r.inner.poses().len())
}

/// Writes the pose of `frame` to `out16`.
///
/// # Safety
/// `reg` must come from this library; `out16` must hold 16 doubles.
#[no_mangle]
pub unsafe extern "C" fn ar_registration_pose(reg: *const ArRegistration, frame: usize, out16: *mut f64) -> ArStatus {
    guard(|| {
        let reg = reg.as_ref().ok_or_else(|| null("reg"))?;
        if out16.is_null() {
            return Err(null("out16"));
        }
        let pose = reg
            .inner
            .poses()
            .get(frame)
            .ok_or_else(|| (ArStatus::InvalidArgument, format!("frame {frame} out of range")))?;
        write_pose(pose, std::slice::from_raw_parts_mut(out16, 16));
        Ok(())
    })
}

/// Total number of output correspondences over all frame pairs.
///
/// # Safety
/// `reg` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ar_registration_correspondence_count(reg: *const ArRegistration) -> usize {
    reg.as_ref()
        .map_or(0, |r| r.inner.correspondences.iter().map(|d| d.matches.len()).sum())
}

/// Writes the TUM trajectory and the correspondence dump into `dir`.
///
/// # Safety
/// `reg` must come from this library; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ar_registration_write(reg: *const ArRegistration, dir: *const c_char) -> ArStatus {
    guard(|| {
        let reg = reg.as_ref().ok_or_else(|| null("reg"))?;
        let dir = path_arg(dir, "dir")?;
        std::fs::create_dir_all(&dir).map_err(|e| (ArStatus::Io, format!("{}: {e}", dir.display())))?;
        let traj: Vec<StampedPose> = reg
            .timestamps
            .iter()
            .zip(reg.inner.poses())
            .map(|(t, p)| StampedPose {
                timestamp: *t,
                pose: *p,
            })
            .collect();
        write_tum(&dir.join(TRAJECTORY_FILE), &traj).map_err(engine)?;
        write_dump(&Path::new(&dir).join(DUMP_FILE), &reg.inner.correspondences).map_err(engine)
    })
}

/// # Safety
/// `reg` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ar_registration_free(reg: *mut ArRegistration) {
    if !reg.is_null() {
        drop(Box::from_raw(reg));
    }
}

/// Weighted rigid alignment `target ≈ R · source + t` of `n` point pairs
/// (`target` and `source` are `n × 3` row-major). Writes the 4×4 transform
/// to `out16`.
///
/// # Safety
/// `target`, `source` must hold `3n` doubles, `weights` `n`, `out16` 16.
#[no_mangle]
pub unsafe extern "C" fn ar_weighted_kabsch(
    target: *const f64,
    source: *const f64,
    weights: *const f64,
    n: usize,
    out16: *mut f64,
) -> ArStatus {
    guard(|| {
        if target.is_null() || source.is_null() || weights.is_null() || out16.is_null() {
            return Err(null("argument"));
        }
        let t = std::slice::from_raw_parts(target, 3 * n);
        let s = std::slice::from_raw_parts(source, 3 * n);
        let pts = |v: &[f64]| v.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect();
        let corr = WeightedCorrespondences3D {
            target: pts(t),
            source: pts(s),
            weights: std::slice::from_raw_parts(weights, n).to_vec(),
        };
        let pose = weighted_kabsch(&corr).map_err(engine)?;
        write_pose(&pose, std::slice::from_raw_parts_mut(out16, 16));
        Ok(())
    })
}

/// Slack-augmented Sinkhorn on a `rows × cols` row-major score matrix.
/// Writes the `(rows + 1) × (cols + 1)` row-major transport plan to `out`;
/// the last row and column are the slack bins.
///
/// # Safety
/// `scores` must hold `rows · cols` doubles and `out` `(rows + 1)(cols + 1)`.
#[no_mangle]
pub unsafe extern "C" fn ar_sinkhorn(
    scores: *const f64,
    rows: usize,
    cols: usize,
    epsilon: f64,
    iters: usize,
    slack_score: f64,
    out: *mut f64,
) -> ArStatus {
    guard(|| {
        if scores.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let s = std::slice::from_raw_parts(scores, rows * cols);
        let m = ScoreMatrix::new(DMatrix::from_row_slice(rows, cols, s)).map_err(engine)?;
        let plan = sinkhorn(&m, epsilon, iters, slack_score).map_err(engine)?;
        let out = std::slice::from_raw_parts_mut(out, (rows + 1) * (cols + 1));
        for r in 0..=rows {
            for c in 0..=cols {
                out[r * (cols + 1) + c] = plan.matrix[(r, c)];
            }
        }
        Ok(())
    })
}
