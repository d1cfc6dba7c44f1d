//! Dense descriptor grids and the deterministic multi-scale patch descriptor.

use super::frame::Frame;

pub const COARSE_STRIDE: usize = 4;
pub const FINE_STRIDE: usize = 2;

/// Descriptors laid out on a regular grid of `stride`-pixel cells.
///
/// Each cell carries an L2-normalized descriptor, a keypoint location (the
/// cell center unless a provider knows better) and a saliency score used to
/// pick coarse keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub stride: usize,
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub data: Vec<f64>,
    pub keypoints: Vec<[f64; 2]>,
    pub saliency: Vec<f64>,
}

impl FeatureGrid {
    /// A grid with zeroed descriptors and cell-center keypoints.
    pub fn new(stride: usize, rows: usize, cols: usize, dim: usize) -> Self {
        let keypoints = (0..rows * cols)
            .map(|i| cell_center(stride, i / cols, i % cols))
            .collect();
        FeatureGrid {
            stride,
            rows,
            cols,
            dim,
            data: vec![0.0; rows * cols * dim],
            keypoints,
            saliency: vec![0.0; rows * cols],
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn descriptor(&self, cell: usize) -> &[f64] {
        &self.data[cell * self.dim..(cell + 1) * self.dim]
    }

    pub fn descriptor_mut(&mut self, cell: usize) -> &mut [f64] {
        &mut self.data[cell * self.dim..(cell + 1) * self.dim]
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn row_col(&self, cell: usize) -> (usize, usize) {
        (cell / self.cols, cell % self.cols)
    }

    pub fn center(&self, cell: usize) -> [f64; 2] {
        let (r, c) = self.row_col(cell);
        cell_center(self.stride, r, c)
    }

    /// Cell whose center is nearest to `px`, clamped to the grid.
    pub fn nearest_cell(&self, px: [f64; 2]) -> (usize, usize) {
        let off = (self.stride as f64 - 1.0) / 2.0;
        let to_idx = |v: f64, n: usize| (((v - off) / self.stride as f64).round().max(0.0) as usize).min(n - 1);
        (to_idx(px[1], self.rows), to_idx(px[0], self.cols))
    }

    /// Cell that contains the pixel `px`, if inside the grid.
    pub fn containing_cell(&self, px: [f64; 2]) -> Option<usize> {
        let x = (px[0] + 0.5).floor();
        let y = (px[1] + 0.5).floor();
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let (c, r) = (x as usize / self.stride, y as usize / self.stride);
        (r < self.rows && c < self.cols).then(|| self.index(r, c))
    }

    pub fn normalize_all(&mut self) {
        let dim = self.dim;
        for d in self.data.chunks_exact_mut(dim) {
            normalize_or_uniform(d);
        }
    }
}

/// Pixel coordinates of a cell center.
pub fn cell_center(stride: usize, row: usize, col: usize) -> [f64; 2] {
    let off = (stride as f64 - 1.0) / 2.0;
    [(col * stride) as f64 + off, (row * stride) as f64 + off]
}

/// L2-normalizes in place; a zero vector becomes the uniform unit vector so
/// every descriptor stays on the unit sphere.
pub fn normalize_or_uniform(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 1e-12 {
        v.iter_mut().for_each(|x| *x /= n);
    } else {
        let u = 1.0 / (v.len() as f64).sqrt();
        v.iter_mut().for_each(|x| *x = u);
    }
}

/// Coarse, fine and fused grids of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub coarse: FeatureGrid,
    pub fine: FeatureGrid,
    pub fused: FeatureGrid,
}

/// Average-pools a grid by an integer `factor`; returns raw (unnormalized)
/// pooled descriptors for a `rows/factor × cols/factor` grid.
pub fn avg_pool(grid: &FeatureGrid, factor: usize) -> Vec<f64> {
    let rows = grid.rows / factor;
    let cols = grid.cols / factor;
    let mut out = vec![0.0; rows * cols * grid.dim];
    let scale = 1.0 / (factor * factor) as f64;
    for r in 0..rows {
        for c in 0..cols {
            let dst = &mut out[(r * cols + c) * grid.dim..(r * cols + c + 1) * grid.dim];
            for dr in 0..factor {
                for dc in 0..factor {
                    let src = grid.descriptor(grid.index(r * factor + dr, c * factor + dc));
                    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
                }
            }
            dst.iter_mut().for_each(|d| *d *= scale);
        }
    }
    out
}

/// Pools the fine grid down to the coarse resolution and concatenates it
/// with the coarse descriptors along the channel axis.
pub fn fuse(coarse: &FeatureGrid, fine: &FeatureGrid) -> FeatureGrid {
    let factor = coarse.stride / fine.stride;
    let pooled = avg_pool(fine, factor);
    let prow = fine.rows / factor;
    let pcol = fine.cols / factor;
    let dim = coarse.dim + fine.dim;
    let mut fused = FeatureGrid::new(coarse.stride, coarse.rows, coarse.cols, dim);
    fused.keypoints.clone_from(&coarse.keypoints);
    fused.saliency.clone_from(&coarse.saliency);
    for cell in 0..coarse.len() {
        let (r, c) = coarse.row_col(cell);
        let d = fused.descriptor_mut(cell);
        d[..coarse.dim].copy_from_slice(coarse.descriptor(cell));
        if r < prow && c < pcol {
            let p = (r * pcol + c) * fine.dim;
            d[coarse.dim..].copy_from_slice(&pooled[p..p + fine.dim]);
        }
    }
    fused.normalize_all();
    fused
}

const ORIENT_BINS: usize = 8;
const CHROMA_WEIGHT: f64 = 4.0;
/// Corner response below which a cell keeps its center as keypoint.
const CORNER_FLOOR: f64 = 1e-6;

/// Separable Gaussian blur (σ = 1 pixel, radius 2) with clamped borders.
fn blur(img: &[f64], w: usize, h: usize) -> Vec<f64> {
    const K: [f64; 5] = [
        0.054_488_685,
        0.244_201_342,
        0.402_619_947,
        0.244_201_342,
        0.054_488_685,
    ];
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (0..5)
                .map(|k| K[k] * img[y * w + (x as isize + k as isize - 2).clamp(0, w as isize - 1) as usize])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (0..5)
                .map(|k| K[k] * tmp[(y as isize + k as isize - 2).clamp(0, h as isize - 1) as usize * w + x])
                .sum();
        }
    }
    out
}

/// Opponent chroma channels `r − g` and `(r + g)/2 − b`, in [−1, 1].
fn chroma(frame: &Frame) -> [Vec<f64>; 2] {
    let px = frame.rgb.chunks_exact(3);
    let rg = px.clone().map(|c| (c[0] as f64 - c[1] as f64) / 255.0).collect();
    let yb = px
        .map(|c| ((c[0] as f64 + c[1] as f64) / 2.0 - c[2] as f64) / 255.0)
        .collect();
    [rg, yb]
}

struct PatchSampler<'a> {
    gray: &'a [f64],
    chroma: &'a [Vec<f64>; 2],
    frame: &'a Frame,
    w: usize,
    h: usize,
}

impl PatchSampler<'_> {
    fn at(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.gray[y * self.w + x]
    }

    fn chroma_at(&self, ch: usize, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.chroma[ch][y * self.w + x]
    }

    fn depth(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.frame.depth_px(x, y)
    }

    /// Descriptor of the `size × size` patch with top-left pixel (x0, y0):
    /// `blocks²` normalized intensity means, an orientation histogram and
    /// four relative-depth quadrant means and the mean chroma of the central
    /// 3×3 pixels. Returns the descriptor and a
    /// Shi–Tomasi corner response.
    fn describe(&self, x0: isize, y0: isize, size: usize, blocks: usize) -> (Vec<f64>, f64) {
        let bs = size / blocks;
        let mut intensity = vec![0.0; blocks * blocks];
        for by in 0..blocks {
            for bx in 0..blocks {
                let mut s = 0.0;
                for dy in 0..bs {
                    for dx in 0..bs {
                        s += self.at(x0 + (bx * bs + dx) as isize, y0 + (by * bs + dy) as isize);
                    }
                }
                intensity[by * blocks + bx] = s / (bs * bs) as f64;
            }
        }
        let mean = intensity.iter().sum::<f64>() / intensity.len() as f64;
        let var = intensity.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / intensity.len() as f64;
        let std = var.sqrt();
        let contrast = if std > 1e-3 { std } else { f64::INFINITY };
        intensity.iter_mut().for_each(|v| *v = (*v - mean) / contrast);

        let mut hist = vec![0.0; ORIENT_BINS];
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for dy in 0..size as isize {
            for dx in 0..size as isize {
                let (x, y) = (x0 + dx, y0 + dy);
                let gx = 0.5 * (self.at(x + 1, y) - self.at(x - 1, y));
                let gy = 0.5 * (self.at(x, y + 1) - self.at(x, y - 1));
                sxx += gx * gx;
                syy += gy * gy;
                sxy += gx * gy;
                let mag = (gx * gx + gy * gy).sqrt();
                if mag > 1e-6 {
                    let ang = gy.atan2(gx) + std::f64::consts::PI;
                    let bin = ((ang / std::f64::consts::TAU) * ORIENT_BINS as f64) as usize;
                    hist[bin.min(ORIENT_BINS - 1)] += mag;
                }
            }
        }
        let hsum = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
        if hsum > 1e-9 {
            hist.iter_mut().for_each(|v| *v /= hsum);
        }
        let tr = sxx + syy;
        let det = sxx * syy - sxy * sxy;
        let min_eig = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());

        let half = size / 2;
        let mut quads = [0.0; 4];
        let mut counts = [0usize; 4];
        for dy in 0..size {
            for dx in 0..size {
                let d = self.depth(x0 + dx as isize, y0 + dy as isize);
                if d > 0.0 {
                    let q = (dy / half).min(1) * 2 + (dx / half).min(1);
                    quads[q] += d;
                    counts[q] += 1;
                }
            }
        }
        let valid: Vec<f64> = quads
            .iter()
            .zip(&counts)
            .filter(|(_, n)| **n > 0)
            .map(|(s, n)| s / *n as f64)
            .collect();
        let dmean = if valid.is_empty() {
            0.0
        } else {
            valid.iter().sum::<f64>() / valid.len() as f64
        };
        let mut depth_feat = [0.0; 4];
        for q in 0..4 {
            if counts[q] > 0 && dmean > 0.0 {
                let rel = quads[q] / counts[q] as f64 / dmean - 1.0;
                depth_feat[q] = (10.0 * rel).clamp(-1.0, 1.0) * 0.5;
            }
        }

        let mut color = [0.0; 2];
        let (lo, hi) = (size / 2 - 1, size / 2 + 2);
        for (ch, out) in color.iter_mut().enumerate() {
            let mut sum = 0.0;
            for dy in lo..hi {
                for dx in lo..hi {
                    sum += self.chroma_at(ch, x0 + dx as isize, y0 + dy as isize);
                }
            }
            *out = CHROMA_WEIGHT * sum / ((hi - lo) * (hi - lo)) as f64;
        }

        let mut desc = intensity;
        desc.extend_from_slice(&hist);
        desc.extend_from_slice(&depth_feat);
        desc.extend_from_slice(&color);
        (desc, min_eig)
    }
}

/// Coarse patch: 12×12 pixels in 4×4 blocks. Fine patch: 6×6 pixels in 3×3 blocks.
pub const COARSE_DIM: usize = 16 + ORIENT_BINS + 6;
pub const FINE_DIM: usize = 9 + ORIENT_BINS + 6;
const COARSE_PATCH: usize = 12;

/// Per-pixel Shi–Tomasi response over a 3×3 structure-tensor window.
fn corner_response(gray: &[f64], w: usize, h: usize) -> Vec<f64> {
    let at = |x: isize, y: isize| gray[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize];
    let mut gxx = vec![0.0; w * h];
    let mut gyy = vec![0.0; w * h];
    let mut gxy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = 0.5 * (at(x + 1, y) - at(x - 1, y));
            let gy = 0.5 * (at(x, y + 1) - at(x, y - 1));
            let i = y as usize * w + x as usize;
            gxx[i] = gx * gx;
            gyy[i] = gy * gy;
            gxy[i] = gx * gy;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for yy in y.saturating_sub(1)..(y + 2).min(h) {
                for xx in x.saturating_sub(1)..(x + 2).min(w) {
                    let i = yy * w + xx;
                    a += gxx[i];
                    b += gyy[i];
                    c += gxy[i];
                }
            }
            let tr = a + b;
            out[y * w + x] = 0.5 * (tr - ((a - b) * (a - b) + 4.0 * c * c).sqrt());
        }
    }
    out
}

/// Describes every cell. With `response`, each cell's keypoint moves to its
/// strongest corner pixel and the patch is centered there, so the same
/// scene point gets the same patch regardless of where the grid falls.
fn describe_grid(
    frame: &Frame,
    gray: &[f64],
    chroma: &[Vec<f64>; 2],
    stride: usize,
    size: usize,
    blocks: usize,
    response: Option<&[f64]>,
) -> FeatureGrid {
    let (w, h) = (frame.width(), frame.height());
    let rows = h / stride;
    let cols = w / stride;
    let dim = blocks * blocks + ORIENT_BINS + 6;
    let sampler = PatchSampler {
        gray,
        chroma,
        frame,
        w,
        h,
    };
    let mut grid = FeatureGrid::new(stride, rows, cols, dim);
    let pad = (size - stride) as isize / 2;
    for cell in 0..rows * cols {
        let (r, c) = grid.row_col(cell);
        let mut x0 = (c * stride) as isize - pad;
        let mut y0 = (r * stride) as isize - pad;
        if let Some(resp) = response {
            let mut best = (0.0, 0, 0);
            for y in r * stride..(r + 1) * stride {
                for x in c * stride..(c + 1) * stride {
                    if resp[y * w + x] > best.0 {
                        best = (resp[y * w + x], x, y);
                    }
                }
            }
            if best.0 > CORNER_FLOOR {
                grid.keypoints[cell] = [best.1 as f64, best.2 as f64];
                x0 = best.1 as isize - (size / 2) as isize;
                y0 = best.2 as isize - (size / 2) as isize;
            }
        }
        let (desc, score) = sampler.describe(x0, y0, size, blocks);
        grid.descriptor_mut(cell).copy_from_slice(&desc);
        grid.saliency[cell] = score;
    }
    grid.normalize_all();
    grid
}

/// Deterministic two-resolution descriptor of a frame: coarse cells at
/// stride 4 (keypoints snapped to the strongest corner in each cell), fine
/// cells at stride 2, and the fused grid made by pooling the fine grid to
/// stride 4 and concatenating it to the coarse channels.
pub fn patch_descriptor(frame: &Frame) -> FeatureSet {
    let (w, h) = (frame.width(), frame.height());
    let gray = blur(&frame.gray(), w, h);
    let [rg, yb] = chroma(frame);
    let chroma = [blur(&rg, w, h), blur(&yb, w, h)];
    let response = corner_response(&gray, w, h);
    let coarse = describe_grid(frame, &gray, &chroma, COARSE_STRIDE, COARSE_PATCH, 4, Some(&response));
    let fine = describe_grid(frame, &gray, &chroma, FINE_STRIDE, 6, 3, None);
    let fused = fuse(&coarse, &fine);
    FeatureSet { coarse, fine, fused }
}

/// Picks up to `k` coarse keypoints: highest saliency first (ties broken by
/// cell index), skipping border cells, cells without valid depth, and cells
/// adjacent to an already selected one.
pub fn select_keypoints(grid: &FeatureGrid, frame: &Frame, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..grid.len())
        .filter(|&cell| {
            let (r, c) = grid.row_col(cell);
            r > 0 && c > 0 && r + 1 < grid.rows && c + 1 < grid.cols && grid.saliency[cell] > 0.0
        })
        .filter(|&cell| frame.depth_at(grid.keypoints[cell]).is_some())
        .collect();
    order.sort_by(|&a, &b| {
        grid.saliency[b]
            .partial_cmp(&grid.saliency[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut taken = vec![false; grid.len()];
    let mut out = Vec::with_capacity(k);
    for cell in order {
        if out.len() == k {
            break;
        }
        let (r, c) = grid.row_col(cell);
        let blocked = (r - 1..=r + 1).any(|rr| (c - 1..=c + 1).any(|cc| taken[grid.index(rr, cc)]));
        if !blocked {
            taken[cell] = true;
            out.push(cell);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::camera::Intrinsics;

    fn textured_frame() -> Frame {
        let (w, h) = (64, 48);
        let k = Intrinsics::new(60.0, 60.0, 31.5, 23.5, w, h).unwrap();
        let mut rgb = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                let v = 127.0
                    + 60.0 * ((x as f64 * 0.7).sin() * (y as f64 * 0.45).cos())
                    + 40.0 * ((x * 7 + y * 13) % 11) as f64 / 11.0;
                let v = v.clamp(0.0, 255.0) as u8;
                rgb.extend_from_slice(&[v, v / 2, 255 - v]);
            }
        }
        let depth = (0..w * h).map(|i| 1.5 + 0.002 * (i % w) as f64).collect();
        Frame::new(0, rgb, depth, k).unwrap()
    }

    #[test]
    fn grids_have_expected_shape_and_unit_norms() {
        let f = textured_frame();
        let set = patch_descriptor(&f);
        assert_eq!((set.coarse.rows, set.coarse.cols), (12, 16));
        assert_eq!((set.fine.rows, set.fine.cols), (24, 32));
        assert_eq!(set.coarse.dim, COARSE_DIM);
        assert_eq!(set.fine.dim, FINE_DIM);
        assert_eq!(set.fused.dim, COARSE_DIM + FINE_DIM);
        for g in [&set.coarse, &set.fine, &set.fused] {
            for cell in 0..g.len() {
                let n: f64 = g.descriptor(cell).iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn descriptor_is_deterministic() {
        let f = textured_frame();
        let a = patch_descriptor(&f);
        let b = patch_descriptor(&f);
        assert!(a
            .fused
            .data
            .iter()
            .zip(&b.fused.data)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn constant_image_gives_identical_descriptors() {
        let k = Intrinsics::new(60.0, 60.0, 15.5, 15.5, 32, 32).unwrap();
        let f = Frame::new(0, vec![90; 32 * 32 * 3], vec![2.0; 32 * 32], k).unwrap();
        let set = patch_descriptor(&f);
        let first = set.fused.descriptor(0).to_vec();
        for cell in 1..set.fused.len() {
            assert_eq!(set.fused.descriptor(cell), &first[..]);
        }
    }

    #[test]
    fn pooled_block_is_mean_of_children() {
        let f = textured_frame();
        let set = patch_descriptor(&f);
        let pooled = avg_pool(&set.fine, 2);
        let cols = set.fine.cols / 2;
        for (r, c) in [(0, 0), (3, 5), (11, 15)] {
            let p = &pooled[(r * cols + c) * set.fine.dim..(r * cols + c + 1) * set.fine.dim];
            for k in 0..set.fine.dim {
                let mean = (0..4)
                    .map(|i| set.fine.descriptor(set.fine.index(2 * r + i / 2, 2 * c + i % 2))[k])
                    .sum::<f64>()
                    / 4.0;
                assert!((p[k] - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cell_geometry() {
        let g = FeatureGrid::new(2, 4, 4, 1);
        assert_eq!(g.center(g.index(1, 2)), [4.5, 2.5]);
        assert_eq!(g.nearest_cell([4.6, 2.4]), (1, 2));
        assert_eq!(g.containing_cell([5.0, 3.0]), Some(g.index(1, 2)));
        assert_eq!(g.containing_cell([-1.0, 3.0]), None);
    }

    #[test]
    fn keypoints_are_spread_and_bounded() {
        let f = textured_frame();
        let set = patch_descriptor(&f);
        let kp = select_keypoints(&set.fused, &f, 20);
        assert!(kp.len() <= 20 && !kp.is_empty());
        for (i, a) in kp.iter().enumerate() {
            for b in &kp[i + 1..] {
                let (ra, ca) = set.fused.row_col(*a);
                let (rb, cb) = set.fused.row_col(*b);
                assert!(ra.abs_diff(rb) > 1 || ca.abs_diff(cb) > 1);
            }
        }
    }
}
