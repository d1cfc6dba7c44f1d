//! Cycle-consistent synchronization of pairwise soft matchings.

use nalgebra::DMatrix;

use super::sinkhorn::SoftMatch;
use crate::error::{Error, Result};

/// Score on the factor product above which two keypoints may be merged.
pub const MERGE_THRESHOLD: f64 = 0.5;
/// Smallest pairwise soft-match mass that counts as direct evidence for a merge.
pub const DIRECT_EVIDENCE: f64 = 0.1;
const EIGEN_RESIDUAL: f64 = 1e-6;

/// A universe point: at most one keypoint per frame.
pub type Cluster = Vec<Option<usize>>;

/// Output of match synchronization.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncedMatches {
    /// Keypoint count of each frame.
    pub frame_sizes: Vec<usize>,
    /// Every merged group, ordered by its first member (frame, keypoint).
    pub clusters: Vec<Cluster>,
}

impl SyncedMatches {
    /// Groups with a member in every frame.
    pub fn complete(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(|c| c.iter().all(Option::is_some))
    }

    /// Hard assignment between frames `i` and `j` as sorted `(a, b)` keypoint
    /// pairs, taken from the complete groups. Composition over any third
    /// frame reproduces it exactly.
    pub fn matching(&self, i: usize, j: usize) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self.complete().map(|c| (c[i].unwrap(), c[j].unwrap())).collect();
        out.sort_unstable();
        out
    }

    /// The same assignment as a boolean matrix.
    pub fn matching_matrix(&self, i: usize, j: usize) -> DMatrix<u8> {
        let mut m = DMatrix::zeros(self.frame_sizes[i], self.frame_sizes[j]);
        for (a, b) in self.matching(i, j) {
            m[(a, b)] = 1;
        }
        m
    }
}

fn pair_block(pairwise: &[SoftMatch], i: usize, j: usize, ni: usize, nj: usize) -> Result<Option<DMatrix<f64>>> {
    let mut acc: Option<DMatrix<f64>> = None;
    let mut count = 0.0;
    for p in pairwise {
        let block = if (p.src_frame, p.dst_frame) == (i, j) {
            p.core()
        } else if (p.src_frame, p.dst_frame) == (j, i) {
            p.core().transpose()
        } else {
            continue;
        };
        if block.shape() != (ni, nj) {
            return Err(Error::DimensionMismatch {
                expected: ni * nj,
                got: block.len(),
            });
        }
        acc = Some(match acc {
            Some(a) => a + block,
            None => block,
        });
        count += 1.0;
    }
    Ok(acc.map(|a| a / count))
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Synchronizes soft matchings between the frames of a clip.
///
/// The pairwise plans (slack removed, `(i, j)` and transposed `(j, i)`
/// averaged) fill the off-diagonal blocks of a symmetric block matrix whose
/// diagonal blocks are identities. Its leading `min(universe_size,
/// rank_cap)` eigenpairs give a low-rank factor product in which consistent
/// matches reinforce each other and isolated errors fade. Keypoints are
/// then merged greedily by descending factor score into groups holding at
/// most one keypoint per frame; a merge also needs some direct pairwise
/// mass. The groups define the hard matchings, which are cycle-consistent
/// by construction.
pub fn synchronize_matches(
    pairwise: &[SoftMatch],
    frame_sizes: &[usize],
    universe_size: usize,
    rank_cap: usize,
) -> Result<SyncedMatches> {
    let frames = frame_sizes.len();
    if let Some(&max) = frame_sizes.iter().max() {
        if universe_size < max {
            return Err(Error::Config(format!(
                "universe size {universe_size} is below the largest frame ({max} keypoints)"
            )));
        }
    }
    let offsets: Vec<usize> = frame_sizes
        .iter()
        .scan(0, |acc, n| {
            let o = *acc;
            *acc += n;
            Some(o)
        })
        .collect();
    let total: usize = frame_sizes.iter().sum();
    let mut w = DMatrix::<f64>::identity(total, total);
    for i in 0..frames {
        for j in i + 1..frames {
            if let Some(block) = pair_block(pairwise, i, j, frame_sizes[i], frame_sizes[j])? {
                w.view_mut((offsets[i], offsets[j]), block.shape()).copy_from(&block);
                w.view_mut((offsets[j], offsets[i]), (block.ncols(), block.nrows()))
                    .copy_from(&block.transpose());
            }
        }
    }

    let rank = universe_size.min(rank_cap).min(total);
    let eig = w
        .clone()
        .try_symmetric_eigen(1e-13, 10_000)
        .ok_or(Error::ConvergenceFailure {
            residual: f64::INFINITY,
        })?;
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let scale = w.amax().max(1.0);
    let mut factor = DMatrix::<f64>::zeros(total, rank);
    for (k, &idx) in order.iter().take(rank).enumerate() {
        let lambda = eig.eigenvalues[idx];
        let vec = eig.eigenvectors.column(idx);
        let residual = (&w * vec - vec * lambda).norm();
        if residual > EIGEN_RESIDUAL * scale * total as f64 {
            return Err(Error::ConvergenceFailure { residual });
        }
        factor.set_column(k, &(vec * lambda.max(0.0).sqrt()));
    }
    let product = &factor * factor.transpose();

    let frame_of: Vec<usize> = (0..frames)
        .flat_map(|f| std::iter::repeat_n(f, frame_sizes[f]))
        .collect();
    let mut candidates = Vec::new();
    for a in 0..total {
        for b in a + 1..total {
            if frame_of[a] != frame_of[b] && product[(a, b)] > MERGE_THRESHOLD && w[(a, b)] >= DIRECT_EVIDENCE {
                candidates.push((product[(a, b)], a, b));
            }
        }
    }
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut parent: Vec<usize> = (0..total).collect();
    let mut mask: Vec<u128> = frame_of.iter().map(|&f| 1u128 << (f % 128)).collect();
    let mut members: Vec<Vec<usize>> = (0..total).map(|a| vec![a]).collect();
    for (_, a, b) in candidates {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb || mask[ra] & mask[rb] != 0 {
            continue;
        }
        let (keep, gone) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[gone] = keep;
        mask[keep] |= mask[gone];
        let moved = std::mem::take(&mut members[gone]);
        members[keep].extend(moved);
    }

    let mut clusters = Vec::new();
    for root in 0..total {
        if find(&mut parent, root) != root || members[root].len() < 2 {
            continue;
        }
        let mut c: Cluster = vec![None; frames];
        for &g in &members[root] {
            c[frame_of[g]] = Some(g - offsets[frame_of[g]]);
        }
        clusters.push(c);
    }
    Ok(SyncedMatches {
        frame_sizes: frame_sizes.to_vec(),
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn perm_match(src: usize, dst: usize, perm: &[usize]) -> SoftMatch {
        let n = perm.len();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        for (r, &s) in perm.iter().enumerate() {
            m[(r, s)] = 1.0;
        }
        SoftMatch {
            src_frame: src,
            dst_frame: dst,
            matrix: m,
        }
    }

    fn compose(a: &[usize], b: &[usize]) -> Vec<usize> {
        a.iter().map(|&x| b[x]).collect()
    }

    fn bool_product(a: &DMatrix<u8>, b: &DMatrix<u8>) -> DMatrix<u8> {
        DMatrix::from_fn(a.nrows(), b.ncols(), |r, c| {
            (0..a.ncols()).any(|k| a[(r, k)] == 1 && b[(k, c)] == 1) as u8
        })
    }

    #[test]
    fn consistent_permutations_are_a_fixed_point() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = 6;
        let abs: Vec<Vec<usize>> = (0..3)
            .map(|_| {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect();
        let inv = |p: &[usize]| {
            let mut q = vec![0; p.len()];
            for (i, &x) in p.iter().enumerate() {
                q[x] = i;
            }
            q
        };
        let mut pairs = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    pairs.push(perm_match(i, j, &compose(&abs[i], &inv(&abs[j]))));
                }
            }
        }
        let out = synchronize_matches(&pairs, &[n, n, n], n, 128).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let p = compose(&abs[i], &inv(&abs[j]));
                let expect: Vec<(usize, usize)> = (0..n).map(|r| (r, p[r])).collect();
                assert_eq!(out.matching(i, j), expect);
            }
        }
    }

    #[test]
    fn single_pair_projects_the_soft_match() {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 1)] = 0.9;
        m[(1, 0)] = 0.8;
        m[(2, 2)] = 0.3;
        m[(2, 0)] = 0.05;
        let p = SoftMatch {
            src_frame: 0,
            dst_frame: 1,
            matrix: m,
        };
        let out = synchronize_matches(&[p], &[3, 3], 3, 128).unwrap();
        assert_eq!(out.matching(0, 1), vec![(0, 1), (1, 0), (2, 2)]);
    }

    #[test]
    fn planted_inconsistency_still_gives_cycles() {
        let id: Vec<usize> = (0..4).collect();
        let bad = vec![1, 0, 2, 3];
        let pairs = vec![perm_match(0, 1, &id), perm_match(1, 2, &id), perm_match(0, 2, &bad)];
        let out = synchronize_matches(&pairs, &[4, 4, 4], 4, 128).unwrap();
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1), (0, 2, 1)] {
            let lhs = out.matching_matrix(i, k);
            let rhs = bool_product(&out.matching_matrix(i, j), &out.matching_matrix(j, k));
            assert_eq!(lhs, rhs);
        }
        let m02 = out.matching(0, 2);
        assert!(m02.contains(&(2, 2)) && m02.contains(&(3, 3)));
    }

    #[test]
    fn universe_must_cover_frames() {
        assert!(synchronize_matches(&[], &[5, 3], 4, 128).is_err());
    }
}
