//! Clip directories on disk.
//!
//! ```text
//! clip/
//!   color/NNNNNN.png     8-bit RGB
//!   depth/NNNNNN.png     16-bit, value / depth_scale = meters, 0 = invalid
//!   intrinsics.txt       fx fy cx cy width height depth_scale
//!   groundtruth.txt      optional TUM trajectory; timestamps are frame numbers
//! ```

use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb};

use super::camera::Intrinsics;
use super::frame::Frame;
use crate::error::{Error, Result};
use crate::trajectory::{read_tum, write_tum, StampedPose};

/// Which frames of a sequence form a clip, and the working resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipOptions {
    pub count: usize,
    pub stride: usize,
    pub start: usize,
    pub target_size: Option<(usize, usize)>,
}

impl Default for ClipOptions {
    fn default() -> Self {
        ClipOptions {
            count: 6,
            stride: 20,
            start: 0,
            target_size: Some((256, 256)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipIntrinsics {
    pub intrinsics: Intrinsics,
    pub depth_scale: f64,
}

pub fn read_intrinsics(path: &Path) -> Result<ClipIntrinsics> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(path, format!("{e}")))?;
    if vals.len() != 7 {
        return Err(Error::parse(path, "expected: fx fy cx cy width height depth_scale"));
    }
    if !(vals[6] > 0.0) {
        return Err(Error::parse(path, "depth_scale must be positive"));
    }
    let intrinsics = Intrinsics::new(vals[0], vals[1], vals[2], vals[3], vals[4] as usize, vals[5] as usize)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    Ok(ClipIntrinsics {
        intrinsics,
        depth_scale: vals[6],
    })
}

pub fn write_intrinsics(path: &Path, k: &ClipIntrinsics) -> Result<()> {
    let i = &k.intrinsics;
    let text = format!(
        "{} {} {} {} {} {} {}\n",
        i.fx, i.fy, i.cx, i.cy, i.width, i.height, k.depth_scale
    );
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn frame_numbers(dir: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let color = dir.join("color");
    let entries = std::fs::read_dir(&color).map_err(|e| Error::io(&color, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&color, e))?.path();
        if path.extension().and_then(|s| s.to_str()) != Some("png") {
            continue;
        }
        if let Some(n) = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<usize>().ok())
        {
            out.push((n, path));
        }
    }
    out.sort();
    Ok(out)
}

fn resize_depth_nearest(depth: &[f64], w: usize, h: usize, tw: usize, th: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(tw * th);
    for y in 0..th {
        let sy = (((y as f64 + 0.5) * h as f64 / th as f64) as usize).min(h - 1);
        for x in 0..tw {
            let sx = (((x as f64 + 0.5) * w as f64 / tw as f64) as usize).min(w - 1);
            out.push(depth[sy * w + sx]);
        }
    }
    out
}

/// Loads the frames numbered `start, start + stride, …` (`count` of them).
/// Frames are resampled to `target_size` when it differs from the stored
/// size: bilinear for color, nearest neighbour for depth.
pub fn load_clip(dir: &Path, opts: &ClipOptions) -> Result<Vec<Frame>> {
    let k = read_intrinsics(&dir.join("intrinsics.txt"))?;
    let numbers = frame_numbers(dir)?;
    let wanted: Vec<usize> = (0..opts.count).map(|i| opts.start + i * opts.stride).collect();
    let gt_path = dir.join("groundtruth.txt");
    let gt = if gt_path.exists() {
        Some(read_tum(&gt_path)?)
    } else {
        None
    };

    let mut frames = Vec::with_capacity(wanted.len());
    for (slot, number) in wanted.iter().enumerate() {
        let color_path = numbers
            .iter()
            .find(|(n, _)| n == number)
            .map(|(_, p)| p.clone())
            .ok_or_else(|| Error::parse(dir, format!("frame {number:06} not found")))?;
        let depth_path = dir.join("depth").join(format!("{number:06}.png"));

        let rgb = image::open(&color_path)
            .map_err(|e| Error::Image {
                path: color_path.clone(),
                source: e,
            })?
            .to_rgb8();
        let depth_img = image::open(&depth_path)
            .map_err(|e| Error::Image {
                path: depth_path.clone(),
                source: e,
            })?
            .to_luma16();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        if (depth_img.width() as usize, depth_img.height() as usize) != (w, h) {
            return Err(Error::parse(&depth_path, "depth and color sizes differ"));
        }
        let mut depth: Vec<f64> = depth_img.as_raw().iter().map(|v| *v as f64 / k.depth_scale).collect();
        let mut intrinsics = k.intrinsics;
        if (intrinsics.width, intrinsics.height) != (w, h) {
            intrinsics = intrinsics.resized(w, h);
        }
        let mut rgb_raw = rgb.clone().into_raw();
        if let Some((tw, th)) = opts.target_size {
            if (tw, th) != (w, h) {
                let resized =
                    image::imageops::resize(&rgb, tw as u32, th as u32, image::imageops::FilterType::Triangle);
                rgb_raw = resized.into_raw();
                depth = resize_depth_nearest(&depth, w, h, tw, th);
                intrinsics = intrinsics.resized(tw, th);
            }
        }
        let mut frame = Frame::new(slot, rgb_raw, depth, intrinsics)?;
        frame.timestamp = *number as f64;
        if let Some(gt) = &gt {
            frame.gt_pose = gt
                .iter()
                .find(|sp| (sp.timestamp - *number as f64).abs() < 1e-6)
                .map(|sp| sp.pose);
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Writes frames in the clip layout. Frame `i` is stored under number
/// `frame.timestamp` (rounded), depth quantized with `depth_scale`.
pub fn write_clip(dir: &Path, frames: &[Frame], depth_scale: f64) -> Result<()> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Config("cannot write an empty clip".into()))?;
    for sub in ["color", "depth"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    write_intrinsics(
        &dir.join("intrinsics.txt"),
        &ClipIntrinsics {
            intrinsics: first.intrinsics,
            depth_scale,
        },
    )?;
    let mut gt = Vec::new();
    for f in frames {
        let number = f.timestamp.round() as usize;
        let (w, h) = (f.width() as u32, f.height() as u32);
        let color_path = dir.join("color").join(format!("{number:06}.png"));
        let img: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_raw(w, h, f.rgb.clone())
            .ok_or_else(|| Error::Config("rgb buffer size mismatch".into()))?;
        img.save(&color_path).map_err(|e| Error::Image {
            path: color_path.clone(),
            source: e,
        })?;
        let quantized: Vec<u16> = f
            .depth
            .iter()
            .map(|d| (d * depth_scale).round().clamp(0.0, u16::MAX as f64) as u16)
            .collect();
        let depth_path = dir.join("depth").join(format!("{number:06}.png"));
        let dimg: ImageBuffer<Luma<u16>, _> =
            ImageBuffer::from_raw(w, h, quantized).ok_or_else(|| Error::Config("depth buffer size mismatch".into()))?;
        dimg.save(&depth_path).map_err(|e| Error::Image {
            path: depth_path.clone(),
            source: e,
        })?;
        if let Some(p) = f.gt_pose {
            gt.push(StampedPose {
                timestamp: number as f64,
                pose: p,
            });
        }
    }
    if gt.len() == frames.len() {
        write_tum(&dir.join("groundtruth.txt"), &gt)?;
    }
    Ok(())
}
