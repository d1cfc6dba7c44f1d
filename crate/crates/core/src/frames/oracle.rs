//! Descriptor provider that reads landmark identities off a synthetic scene.
//!
//! A cell holding a landmark observation gets the landmark's embedding (plus
//! noise) and the landmark's exact pixel as its keypoint. Every other cell
//! gets an independent random unit vector and zero saliency, so it has no
//! partner in any other frame.

use rand::Rng;
use rand_distr::StandardNormal;

use super::features::{fuse, normalize_or_uniform, FeatureGrid, FeatureSet, COARSE_STRIDE, FINE_STRIDE};
use crate::harness::synth::SyntheticScene;
use crate::rng::{derive_seed, stream};

/// Oracle grids plus the landmark planted in each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleFeatures {
    pub set: FeatureSet,
    pub coarse_landmark: Vec<Option<usize>>,
    pub fine_landmark: Vec<Option<usize>>,
}

fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    normalize_or_uniform(&mut v);
    v
}

/// Noise-free embedding of a landmark id.
pub fn landmark_embedding(seed: u64, id: usize, dim: usize) -> Vec<f64> {
    random_unit(&mut stream(&[seed, 31, id as u64]), dim)
}

fn plant(
    scene: &SyntheticScene,
    frame: usize,
    stride: usize,
    grid_tag: u64,
    obs: &[(usize, [f64; 2])],
    identity: &[usize],
) -> (FeatureGrid, Vec<Option<usize>>) {
    let p = &scene.params;
    let dim = p.descriptor_dim;
    let mut grid = FeatureGrid::new(stride, p.height / stride, p.width / stride, dim);
    let mut owner: Vec<Option<usize>> = vec![None; grid.len()];
    for &(id, px) in obs {
        let Some(cell) = grid.containing_cell(px) else { continue };
        let better = match owner[cell] {
            None => true,
            Some(o) => {
                let (a, b) = (scene.landmarks[id].saliency, scene.landmarks[o].saliency);
                a > b || (a == b && id < o)
            }
        };
        if better {
            owner[cell] = Some(id);
        }
    }
    let seed = p.seed;
    for cell in 0..grid.len() {
        let desc = match owner[cell] {
            Some(id) => {
                let slot = obs.iter().position(|(o, _)| *o == id).unwrap();
                grid.keypoints[cell] = obs[slot].1;
                grid.saliency[cell] = scene.landmarks[id].saliency;
                let mut e = landmark_embedding(seed, identity[slot], dim);
                if p.noise.descriptor_sigma > 0.0 {
                    let mut rng = stream(&[seed, 41, grid_tag, frame as u64, id as u64]);
                    let scale = p.noise.descriptor_sigma / (dim as f64).sqrt();
                    for x in e.iter_mut() {
                        *x += scale * rng.sample::<f64, _>(StandardNormal);
                    }
                    normalize_or_uniform(&mut e);
                }
                e
            }
            None => random_unit(&mut stream(&[seed, 43, grid_tag, frame as u64, cell as u64]), dim),
        };
        grid.descriptor_mut(cell).copy_from_slice(&desc);
    }
    (grid, owner)
}

/// Oracle feature grids for frame `frame` of `scene`.
///
/// With probability `outlier_fraction`, a landmark observation carries the
/// identity of the nearest other landmark visible in the same frame, which
/// plants locally ambiguous, repetitive-looking structure.
pub fn oracle_descriptor(scene: &SyntheticScene, frame: usize) -> OracleFeatures {
    let obs = scene.observations(frame);
    let seed = scene.params.seed;
    let identity: Vec<usize> = obs
        .iter()
        .map(|&(id, px)| {
            let u = (derive_seed(&[seed, 47, frame as u64, id as u64]) >> 11) as f64 / (1u64 << 53) as f64;
            if u >= scene.params.noise.outlier_fraction {
                return id;
            }
            obs.iter()
                .filter(|(o, _)| *o != id)
                .min_by(|a, b| {
                    let da = (a.1[0] - px[0]).powi(2) + (a.1[1] - px[1]).powi(2);
                    let db = (b.1[0] - px[0]).powi(2) + (b.1[1] - px[1]).powi(2);
                    da.total_cmp(&db).then(a.0.cmp(&b.0))
                })
                .map_or(id, |(o, _)| *o)
        })
        .collect();
    let (coarse, coarse_landmark) = plant(scene, frame, COARSE_STRIDE, 0, &obs, &identity);
    let (fine, fine_landmark) = plant(scene, frame, FINE_STRIDE, 1, &obs, &identity);
    let fused = fuse(&coarse, &fine);
    OracleFeatures {
        set: FeatureSet { coarse, fine, fused },
        coarse_landmark,
        fine_landmark,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synth::{generate_scene, SceneParams};

    fn scene(sigma: f64, outliers: f64) -> SyntheticScene {
        let mut p = SceneParams {
            landmarks: 80,
            width: 96,
            height: 96,
            focal: 85.0,
            descriptor_dim: 64,
            ..SceneParams::default()
        };
        p.noise.descriptor_sigma = sigma;
        p.noise.outlier_fraction = outliers;
        generate_scene(&p).unwrap()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn planted_cells_carry_exact_keypoints_and_shared_embeddings() {
        let s = scene(0.0, 0.0);
        let a = oracle_descriptor(&s, 0);
        let b = oracle_descriptor(&s, 1);
        let mut shared = 0;
        for (ca, la) in a.coarse_landmark.iter().enumerate() {
            let Some(id) = la else { continue };
            assert_eq!(Some(a.set.coarse.keypoints[ca]), s.observe(0, *id));
            if let Some(cb) = b.coarse_landmark.iter().position(|l| l == la) {
                let d = dot(a.set.coarse.descriptor(ca), b.set.coarse.descriptor(cb));
                assert!((d - 1.0).abs() < 1e-12);
                shared += 1;
            }
        }
        assert!(shared > 5);
    }

    #[test]
    fn deterministic_and_unit_norm() {
        let s = scene(0.1, 0.2);
        let a = oracle_descriptor(&s, 2);
        assert_eq!(a, oracle_descriptor(&s, 2));
        for g in [&a.set.coarse, &a.set.fine, &a.set.fused] {
            for c in 0..g.len() {
                assert!((dot(g.descriptor(c), g.descriptor(c)) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn outliers_copy_a_neighbour_identity() {
        let s = scene(0.0, 1.0);
        let a = oracle_descriptor(&s, 0);
        for (c, l) in a.coarse_landmark.iter().enumerate() {
            if let Some(id) = l {
                let own = landmark_embedding(s.params.seed, *id, s.params.descriptor_dim);
                assert!(dot(&own, a.set.coarse.descriptor(c)) < 0.9);
            }
        }
    }
}
