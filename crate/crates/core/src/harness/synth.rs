//! Synthetic RGB-D clips with planted landmarks and exact ground truth.
//!
//! The scene is the inside of a box-shaped room (five textured planes).
//! Landmarks are points on those planes; each frame renders color and
//! metric depth by ray casting, so every quantity the pipeline estimates has
//! a closed-form reference.

use std::path::Path;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{write_clip, Frame, Intrinsics};
use crate::rng::{derive_seed, stream};
use crate::se3::{Pose, Rotation};

pub const SCENE_FILE: &str = "scene.json";

/// Pixels kept clear of the border when sampling and observing landmarks.
const BORDER: f64 = 6.0;
/// Minimum 3D spacing between landmarks, meters.
const MIN_SPACING: f64 = 0.02;
/// Splat radius of a landmark in the color image, pixels.
const SPLAT_RADIUS: f64 = 1.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneNoise {
    /// Per-pixel Gaussian depth noise, meters.
    pub depth_sigma: f64,
    /// Gaussian noise added to oracle descriptors (total norm, roughly).
    pub descriptor_sigma: f64,
    /// Fraction of landmark observations whose oracle descriptor is replaced
    /// by the descriptor of the nearest other landmark in the same image.
    pub outlier_fraction: f64,
}

impl SceneNoise {
    pub fn none() -> Self {
        SceneNoise {
            depth_sigma: 0.0,
            descriptor_sigma: 0.0,
            outlier_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub seed: u64,
    pub frames: usize,
    pub landmarks: usize,
    pub noise: SceneNoise,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    /// Frame-number spacing used when the clip is written to disk.
    pub frame_spacing: usize,
    pub descriptor_dim: usize,
    /// Landmarks every frame must observe.
    pub min_visible: usize,
    /// Upper bound of the per-frame rotation step, degrees.
    pub max_step_rotation_deg: f64,
    /// Upper bound of the per-frame translation step, meters.
    pub max_step_translation: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            seed: 0,
            frames: 6,
            landmarks: 600,
            noise: SceneNoise::none(),
            width: 256,
            height: 256,
            focal: 220.0,
            frame_spacing: 20,
            descriptor_dim: 128,
            min_visible: 8,
            max_step_rotation_deg: 4.0,
            max_step_translation: 0.1,
        }
    }
}

/// Points `x` with `normal · x = offset`; the normal faces the room interior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: usize,
    pub position: Vector3<f64>,
    pub plane: usize,
    pub saliency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub params: SceneParams,
    pub intrinsics: Intrinsics,
    pub planes: Vec<Plane>,
    pub landmarks: Vec<Landmark>,
    /// World-from-camera pose per frame; frame 0 is the identity.
    pub poses: Vec<Pose>,
}

fn room() -> Vec<Plane> {
    vec![
        Plane {
            normal: Vector3::new(0.0, 0.0, -1.0),
            offset: -4.5,
        },
        Plane {
            normal: Vector3::new(0.0, -1.0, 0.0),
            offset: -1.3,
        },
        Plane {
            normal: Vector3::new(0.0, 1.0, 0.0),
            offset: -1.6,
        },
        Plane {
            normal: Vector3::new(1.0, 0.0, 0.0),
            offset: -2.2,
        },
        Plane {
            normal: Vector3::new(-1.0, 0.0, 0.0),
            offset: -2.2,
        },
    ]
}

fn inside_room(p: &Vector3<f64>, planes: &[Plane], margin: f64) -> bool {
    planes.iter().all(|pl| pl.normal.dot(p) - pl.offset > margin)
}

fn random_step(rng: &mut impl Rng, max_rot_deg: f64, max_trans: f64) -> Pose {
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let angle = rng.random_range(0.5..1.0) * max_rot_deg.to_radians();
    let dir: [f64; 3] = UnitSphere.sample(rng);
    let len = rng.random_range(0.5..1.0) * max_trans;
    Pose::new(
        Rotation::from_axis_angle(&Vector3::from(axis), angle),
        Vector3::from(dir) * len,
    )
}

/// Hash-lattice value noise in [0, 1] with smooth interpolation.
fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let lattice = |i: i64, j: i64| (derive_seed(&[seed, i as u64, j as u64]) >> 11) as f64 / (1u64 << 53) as f64;
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (sx, sy) = (fx * fx * (3.0 - 2.0 * fx), fy * fy * (3.0 - 2.0 * fy));
    let (i, j) = (x0 as i64, y0 as i64);
    let a = lattice(i, j) * (1.0 - sx) + lattice(i + 1, j) * sx;
    let b = lattice(i, j + 1) * (1.0 - sx) + lattice(i + 1, j + 1) * sx;
    a * (1.0 - sy) + b * sy
}

/// Surface hit of a camera ray.
#[derive(Debug, Clone, Copy)]
pub struct Hit {
    pub world: Vector3<f64>,
    pub plane: usize,
    /// Camera-frame z of the hit.
    pub depth: f64,
}

impl SyntheticScene {
    pub fn frame_count(&self) -> usize {
        self.poses.len()
    }

    /// Casts the ray through pixel `px` of frame `frame`.
    pub fn cast(&self, frame: usize, px: [f64; 2]) -> Option<Hit> {
        let pose = &self.poses[frame];
        let dir_cam = self.intrinsics.unproject(px, 1.0);
        let dir = pose.rotation * dir_cam;
        let origin = pose.translation;
        let mut best: Option<(f64, usize)> = None;
        for (k, pl) in self.planes.iter().enumerate() {
            let denom = pl.normal.dot(&dir);
            if denom.abs() < 1e-12 {
                continue;
            }
            let t = (pl.offset - pl.normal.dot(&origin)) / denom;
            if t > 1e-9 && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, k));
            }
        }
        best.map(|(t, k)| Hit {
            world: origin + dir * t,
            plane: k,
            depth: t,
        })
    }

    /// Exact pixel of landmark `id` in frame `frame`, if it is visible, in
    /// front of the camera, unoccluded, and its four surrounding pixels lie
    /// on the landmark's plane.
    pub fn observe(&self, frame: usize, id: usize) -> Option<[f64; 2]> {
        let lm = &self.landmarks[id];
        let cam = self.poses[frame].inverse().transform_point(&lm.position);
        let px = self.intrinsics.project(&cam)?;
        let (w, h) = (self.intrinsics.width as f64, self.intrinsics.height as f64);
        if px[0] < BORDER || px[1] < BORDER || px[0] > w - 1.0 - BORDER || px[1] > h - 1.0 - BORDER {
            return None;
        }
        let hit = self.cast(frame, px)?;
        if hit.plane != lm.plane || (hit.depth - cam.z).abs() > 1e-6 * cam.z {
            return None;
        }
        let (x0, y0) = (px[0].floor(), px[1].floor());
        for (dx, dy) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            if self.cast(frame, [x0 + dx, y0 + dy])?.plane != lm.plane {
                return None;
            }
        }
        Some(px)
    }

    /// All landmarks visible in `frame` with their exact pixels.
    pub fn observations(&self, frame: usize) -> Vec<(usize, [f64; 2])> {
        (0..self.landmarks.len())
            .filter_map(|id| self.observe(frame, id).map(|px| (id, px)))
            .collect()
    }

    /// Landmarks visible in every frame.
    pub fn all_view_landmarks(&self) -> Vec<usize> {
        (0..self.landmarks.len())
            .filter(|&id| (0..self.frame_count()).all(|f| self.observe(f, id).is_some()))
            .collect()
    }

    fn texture(&self, plane: usize, p: &Vector3<f64>) -> [f64; 3] {
        let n = self.planes[plane].normal;
        let a = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let u_axis = n.cross(&a).normalize();
        let v_axis = n.cross(&u_axis);
        let (u, v) = (p.dot(&u_axis), p.dot(&v_axis));
        let s = derive_seed(&[self.params.seed, 77, plane as u64]);
        let t = 0.5 * value_noise(s, u * 6.0, v * 6.0)
            + 0.3 * value_noise(s ^ 1, u * 19.0, v * 19.0)
            + 0.2 * value_noise(s ^ 2, u * 47.0, v * 47.0);
        let base = [
            [0.9, 0.8, 0.7],
            [0.6, 0.7, 0.9],
            [0.8, 0.6, 0.5],
            [0.7, 0.9, 0.6],
            [0.9, 0.7, 0.9],
        ][plane % 5];
        base.map(|b| b * (0.25 + 0.75 * t))
    }

    /// Renders frame `frame`: color, depth with the configured noise, and
    /// the ground-truth pose.
    pub fn render(&self, frame: usize) -> Frame {
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        let mut rgb = vec![0u8; w * h * 3];
        let mut depth = vec![0.0; w * h];
        let mut noise_rng = stream(&[self.params.seed, 11, frame as u64]);
        let normal = Normal::new(0.0, self.params.noise.depth_sigma.max(0.0)).unwrap();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if let Some(hit) = self.cast(frame, [x as f64, y as f64]) {
                    let c = self.texture(hit.plane, &hit.world);
                    for k in 0..3 {
                        rgb[3 * i + k] = (c[k] * 255.0).round().clamp(0.0, 255.0) as u8;
                    }
                    let noise = if self.params.noise.depth_sigma > 0.0 {
                        normal.sample(&mut noise_rng)
                    } else {
                        0.0
                    };
                    depth[i] = (hit.depth + noise).max(0.0);
                }
            }
        }
        for (id, px) in self.observations(frame) {
            let mut crng = stream(&[self.params.seed, 13, id as u64]);
            let color: [u8; 3] = [crng.random(), crng.random(), crng.random()];
            let r = SPLAT_RADIUS.ceil() as isize;
            let (cx, cy) = (px[0].round() as isize, px[1].round() as isize);
            for dy in -r..=r {
                for dx in -r..=r {
                    let (x, y) = (cx + dx, cy + dy);
                    if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                        continue;
                    }
                    let d2 = (x as f64 - px[0]).powi(2) + (y as f64 - px[1]).powi(2);
                    if d2 <= SPLAT_RADIUS * SPLAT_RADIUS {
                        let i = (y as usize * w + x as usize) * 3;
                        rgb[i..i + 3].copy_from_slice(&color);
                    }
                }
            }
        }
        let mut f = Frame::new(frame, rgb, depth, self.intrinsics).expect("rendered frame is valid");
        f.timestamp = (frame * self.params.frame_spacing) as f64;
        f.gt_pose = Some(self.poses[frame]);
        f
    }

    pub fn render_all(&self) -> Vec<Frame> {
        (0..self.frame_count()).map(|f| self.render(f)).collect()
    }

    /// Writes the clip directory plus `scene.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_clip(dir, &self.render_all(), 1000.0)?;
        let path = dir.join(SCENE_FILE);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SCENE_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Builds a deterministic scene for `params.seed`.
pub fn generate_scene(params: &SceneParams) -> Result<SyntheticScene> {
    if params.landmarks < params.min_visible * 3 {
        return Err(Error::InfeasibleGeometry(format!(
            "{} landmarks requested, at least {} needed",
            params.landmarks,
            params.min_visible * 3
        )));
    }
    if params.frames < 2 {
        return Err(Error::InfeasibleGeometry("a clip needs at least two frames".into()));
    }
    let intrinsics = Intrinsics::new(
        params.focal,
        params.focal,
        (params.width as f64 - 1.0) / 2.0,
        (params.height as f64 - 1.0) / 2.0,
        params.width,
        params.height,
    )?;
    let planes = room();
    let mut rng = stream(&[params.seed, 1]);

    let mut poses = vec![Pose::identity()];
    while poses.len() < params.frames {
        let step = random_step(&mut rng, params.max_step_rotation_deg, params.max_step_translation);
        let next = poses.last().unwrap().compose(&step);
        if inside_room(&next.translation, &planes, 0.5) {
            poses.push(next);
        }
    }

    let mut scene = SyntheticScene {
        params: params.clone(),
        intrinsics,
        planes,
        landmarks: Vec::new(),
        poses,
    };
    let max_attempts = params.landmarks * 200;
    let mut attempts = 0;
    while scene.landmarks.len() < params.landmarks && attempts < max_attempts {
        attempts += 1;
        let frame = rng.random_range(0..params.frames);
        let px = [
            rng.random_range(BORDER..params.width as f64 - 1.0 - BORDER),
            rng.random_range(BORDER..params.height as f64 - 1.0 - BORDER),
        ];
        let saliency = rng.random_range(0.2..1.0);
        let Some(hit) = scene.cast(frame, px) else { continue };
        if scene
            .landmarks
            .iter()
            .any(|l| (l.position - hit.world).norm() < MIN_SPACING)
        {
            continue;
        }
        let id = scene.landmarks.len();
        scene.landmarks.push(Landmark {
            id,
            position: hit.world,
            plane: hit.plane,
            saliency,
        });
        let seen = (0..params.frames).filter(|&f| scene.observe(f, id).is_some()).count();
        if seen < 2 {
            scene.landmarks.pop();
        }
    }
    if scene.landmarks.len() < params.landmarks {
        return Err(Error::InfeasibleGeometry(format!(
            "placed {} of {} landmarks in {max_attempts} attempts",
            scene.landmarks.len(),
            params.landmarks
        )));
    }
    for f in 0..params.frames {
        let n = scene.observations(f).len();
        if n < params.min_visible {
            return Err(Error::InfeasibleGeometry(format!(
                "frame {f} observes {n} landmarks, {} required",
                params.min_visible
            )));
        }
    }
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::backproject;

    fn small() -> SceneParams {
        SceneParams {
            landmarks: 60,
            width: 96,
            height: 96,
            focal: 85.0,
            ..SceneParams::default()
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = generate_scene(&small()).unwrap();
        let b = generate_scene(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.render(3), b.render(3));
        let c = generate_scene(&SceneParams { seed: 9, ..small() }).unwrap();
        assert_ne!(a.poses, c.poses);
    }

    #[test]
    fn observed_landmarks_backproject_exactly() {
        let s = generate_scene(&small()).unwrap();
        for f in 0..s.frame_count() {
            let frame = s.render(f);
            let inv = s.poses[f].inverse();
            for (id, px) in s.observations(f) {
                let p = backproject(&frame, px).unwrap();
                let truth = inv.transform_point(&s.landmarks[id].position);
                assert!((p - truth).norm() < 1e-9, "frame {f} landmark {id}");
            }
        }
    }

    #[test]
    fn too_few_landmarks_is_infeasible() {
        let p = SceneParams {
            landmarks: 10,
            ..small()
        };
        assert!(matches!(generate_scene(&p), Err(Error::InfeasibleGeometry(_))));
    }

    #[test]
    fn every_frame_sees_enough() {
        let s = generate_scene(&small()).unwrap();
        for f in 0..s.frame_count() {
            assert!(s.observations(f).len() >= s.params.min_visible);
        }
        assert!(!s.all_view_landmarks().is_empty());
    }
}
