//! Command-line interface.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::frames::{load_clip, oracle_descriptor, patch_descriptor, ClipOptions, FeatureSet, Frame};
use crate::harness::bench::StageTimer;
use crate::harness::eval::{evaluate, evaluate_frames, to_csv, write_reports};
use crate::harness::synth::{generate_scene, SceneNoise, SceneParams, SyntheticScene};
use crate::matching::dump::{read_dump, write_dump};
use crate::pose::{register, Registration};
use crate::trajectory::{read_tum, write_tum, StampedPose};
use crate::weights::WeightFile;

pub const TRAJECTORY_FILE: &str = "trajectory.txt";
pub const DUMP_FILE: &str = "correspondences.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";

#[derive(Debug, Parser)]
#[command(
    name = "anchorreg",
    version,
    about = "Multi-view RGB-D registration with anchor points"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic clip with ground truth.
    Synth(SynthArgs),
    /// Register the frames of a clip.
    Register(RegisterArgs),
    /// Compare an estimated trajectory (and optionally correspondences) to ground truth.
    Eval(EvalArgs),
    /// Register a clip and print wall-clock time per pipeline stage.
    Bench(RegisterArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output clip directory.
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub frames: usize,
    #[arg(long, default_value_t = 600)]
    pub landmarks: usize,
    /// Depth noise standard deviation, meters.
    #[arg(long, default_value_t = 0.0)]
    pub depth_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub descriptor_sigma: f64,
    /// Fraction of observations whose descriptor copies a neighbouring landmark.
    #[arg(long, default_value_t = 0.0)]
    pub outliers: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DescriptorKind {
    /// Multi-scale patch descriptor computed from the images.
    Patch,
    /// Landmark identities read from the clip's synthetic scene file.
    Oracle,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    pub clip: PathBuf,
    /// Output directory (default: the clip directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pipeline configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = DescriptorKind::Patch)]
    pub descriptor: DescriptorKind,
    /// Attention and GRU weights (JSON).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    pub frames: usize,
    #[arg(long, default_value_t = 20)]
    pub stride: usize,
    #[arg(long, default_value_t = 0)]
    pub start: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Estimated trajectory (TUM).
    pub est: PathBuf,
    /// Ground-truth trajectory (TUM).
    pub gt: PathBuf,
    /// Correspondence dump to score; needs `--clip` for depth.
    #[arg(long, requires = "clip")]
    pub dump: Option<PathBuf>,
    #[arg(long)]
    pub clip: Option<PathBuf>,
    /// Write `metrics.csv` and `metrics.json` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Register(a) => register_clip(&a, false).map(|_| ()),
        Command::Eval(a) => eval(&a),
        Command::Bench(a) => register_clip(&a, true).map(|_| ()),
    })
}

fn synth(a: &SynthArgs) -> Result<()> {
    let params = SceneParams {
        seed: a.seed,
        frames: a.frames,
        landmarks: a.landmarks,
        noise: SceneNoise {
            depth_sigma: a.depth_sigma,
            descriptor_sigma: a.descriptor_sigma,
            outlier_fraction: a.outliers,
        },
        ..SceneParams::default()
    };
    let scene = generate_scene(&params)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    scene.write(&a.out)?;
    println!("wrote {} frames to {}", scene.frame_count(), a.out.display());
    Ok(())
}

/// Oracle features for frames loaded from a synthetic clip directory.
pub fn oracle_features(clip: &Path, frames: &[Frame]) -> Result<Vec<FeatureSet>> {
    let scene = SyntheticScene::load(clip)?;
    let spacing = scene.params.frame_spacing as f64;
    frames
        .iter()
        .map(|f| {
            let k = (f.timestamp / spacing).round() as usize;
            if k >= scene.frame_count() || (k as f64 * spacing - f.timestamp).abs() > 1e-9 {
                return Err(Error::Config(format!("frame {} is not a scene frame", f.timestamp)));
            }
            if (f.width(), f.height()) != (scene.params.width, scene.params.height) {
                return Err(Error::Config(
                    "oracle descriptors need the scene's native resolution".into(),
                ));
            }
            Ok(oracle_descriptor(&scene, k).set)
        })
        .collect()
}

pub fn features(kind: DescriptorKind, clip: &Path, frames: &[Frame]) -> Result<Vec<FeatureSet>> {
    match kind {
        DescriptorKind::Patch => {
            use rayon::prelude::*;
            Ok(frames.par_iter().map(patch_descriptor).collect())
        }
        DescriptorKind::Oracle => oracle_features(clip, frames),
    }
}

fn load_config(a: &RegisterArgs) -> Result<PipelineConfig> {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads, registers, and writes the trajectory, correspondence dump, and
/// metrics (when ground truth is available). With `bench`, prints the stage
/// table instead of the metrics.
pub fn register_clip(a: &RegisterArgs, bench: bool) -> Result<Registration> {
    let wall = Instant::now();
    let cfg = load_config(a)?;
    let weights = a.weights.as_deref().map(WeightFile::load).transpose()?;
    let mut timer = StageTimer::new();
    let opts = ClipOptions {
        count: a.frames,
        stride: a.stride,
        start: a.start,
        ..ClipOptions::default()
    };
    let frames = timer.time("load", || load_clip(&a.clip, &opts))?;
    let feats = timer.time("descriptors", || features(a.descriptor, &a.clip, &frames))?;
    let reg = register(frames.clone(), feats, &cfg, weights.as_ref(), &mut timer)?;

    let out = a.out.clone().unwrap_or_else(|| a.clip.clone());
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let traj: Vec<StampedPose> = frames
        .iter()
        .zip(reg.poses())
        .map(|(f, p)| StampedPose {
            timestamp: f.timestamp,
            pose: *p,
        })
        .collect();
    write_tum(&out.join(TRAJECTORY_FILE), &traj)?;
    write_dump(&out.join(DUMP_FILE), &reg.correspondences)?;

    let name = a
        .clip
        .file_name()
        .map_or("clip".into(), |s| s.to_string_lossy().into_owned());
    let report = if frames.iter().all(|f| f.gt_pose.is_some()) {
        let r = evaluate_frames(&name, reg.poses(), &frames, &reg.correspondences)?;
        write_reports(
            &out.join(METRICS_CSV),
            &out.join(METRICS_JSON),
            std::slice::from_ref(&r),
        )?;
        Some(r)
    } else {
        None
    };
    if bench {
        print!("{}", timer.table(wall.elapsed()));
    } else if let Some(r) = report {
        print!("{}", to_csv(&[r]));
    } else {
        println!("wrote {}", out.join(TRAJECTORY_FILE).display());
    }
    Ok(reg)
}

fn eval(a: &EvalArgs) -> Result<()> {
    let est = read_tum(&a.est)?;
    let gt = read_tum(&a.gt)?;
    let gt_for = |t: f64| gt.iter().find(|g| (g.timestamp - t).abs() < 1e-6).map(|g| g.pose);
    let est_poses: Vec<_> = est.iter().map(|e| e.pose).collect();
    let gt_poses: Vec<_> = est.iter().map(|e| gt_for(e.timestamp)).collect();
    let name = a
        .est
        .file_stem()
        .map_or("est".into(), |s| s.to_string_lossy().into_owned());
    let report = match (&a.dump, &a.clip) {
        (Some(dump), Some(clip)) => {
            let dumps = read_dump(dump)?;
            let frames = load_frames_at(clip, &est)?;
            evaluate(&name, &est_poses, &gt_poses, &dumps, &frames)?
        }
        _ => evaluate(&name, &est_poses, &gt_poses, &[], &[])?,
    };
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write_reports(
            &out.join(METRICS_CSV),
            &out.join(METRICS_JSON),
            std::slice::from_ref(&report),
        )?;
    }
    print!("{}", to_csv(&[report]));
    Ok(())
}

/// Loads the clip frames whose numbers are the trajectory timestamps.
fn load_frames_at(clip: &Path, traj: &[StampedPose]) -> Result<Vec<Frame>> {
    traj.iter()
        .enumerate()
        .map(|(slot, sp)| {
            let opts = ClipOptions {
                count: 1,
                stride: 1,
                start: sp.timestamp.round() as usize,
                ..ClipOptions::default()
            };
            let mut f = load_clip(clip, &opts)?.remove(0);
            f.id = slot;
            Ok(f)
        })
        .collect()
}
