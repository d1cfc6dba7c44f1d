//! TUM trajectory files: `timestamp tx ty tz qx qy qz qw`, one line per frame.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::se3::{Pose, Rotation};

#[derive(Debug, Clone, PartialEq)]
pub struct StampedPose {
    pub timestamp: f64,
    pub pose: Pose,
}

/// Formats `x` with 9 significant digits in plain decimal notation.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can bump the magnitude (9.9999999995 -> 10.00000000).
    let digits = s.chars().filter(|c| c.is_ascii_digit()).count();
    let leading_zeros = s
        .trim_start_matches('-')
        .chars()
        .take_while(|c| *c == '0' || *c == '.')
        .filter(|c| *c == '0')
        .count();
    if digits - leading_zeros > 9 && decimals > 0 {
        let decimals = decimals - 1;
        return format!("{x:.decimals$}");
    }
    s
}

pub fn format_tum(traj: &[StampedPose]) -> String {
    let mut out = String::new();
    for sp in traj {
        let t = sp.pose.translation;
        let q = sp.pose.rotation.to_quaternion();
        let fields = [sp.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w];
        let line: Vec<String> = fields.iter().map(|v| format_sig9(*v)).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn parse_tum(text: &str, origin: &Path) -> Result<Vec<StampedPose>> {
    let mut traj = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(origin, format!("line {}: {e}", lineno + 1)))?;
        if vals.len() != 8 {
            return Err(Error::parse(
                origin,
                format!("line {}: expected 8 fields, got {}", lineno + 1, vals.len()),
            ));
        }
        let q = Quaternion::new(vals[7], vals[4], vals[5], vals[6]);
        if q.norm() < 1e-12 {
            return Err(Error::parse(origin, format!("line {}: zero quaternion", lineno + 1)));
        }
        let q = UnitQuaternion::from_quaternion(q);
        traj.push(StampedPose {
            timestamp: vals[0],
            pose: Pose::new(Rotation::from_quaternion(&q), Vector3::new(vals[1], vals[2], vals[3])),
        });
    }
    Ok(traj)
}

pub fn write_tum(path: &Path, traj: &[StampedPose]) -> Result<()> {
    std::fs::write(path, format_tum(traj)).map_err(|e| Error::io(path, e))
}

pub fn read_tum(path: &Path) -> Result<Vec<StampedPose>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tum(&text, path)
}
