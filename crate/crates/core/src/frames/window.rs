//! Local windows on the fine grid and expectation-based sub-pixel matching.

use super::features::FeatureGrid;

/// A `w × w` block of fine cells (clipped at the image border).
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Grid cell indices, row-major within the window.
    pub cells: Vec<usize>,
    /// Keypoint pixel coordinates of those cells.
    pub coords: Vec<[f64; 2]>,
    /// Cell nearest to the requested center.
    pub center_cell: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Crops the window of side `w` (odd) centered on the cell nearest to `center`.
/// Cells falling outside the grid are dropped, never padded.
pub fn crop_window(grid: &FeatureGrid, center: [f64; 2], w: usize) -> Window {
    debug_assert!(w % 2 == 1, "window side must be odd");
    let (r0, c0) = grid.nearest_cell(center);
    let half = (w / 2) as isize;
    let mut cells = Vec::with_capacity(w * w);
    for dr in -half..=half {
        for dc in -half..=half {
            let r = r0 as isize + dr;
            let c = c0 as isize + dc;
            if r >= 0 && c >= 0 && (r as usize) < grid.rows && (c as usize) < grid.cols {
                cells.push(grid.index(r as usize, c as usize));
            }
        }
    }
    let coords = cells.iter().map(|&i| grid.keypoints[i]).collect();
    Window {
        cells,
        coords,
        center_cell: grid.index(r0, c0),
    }
}

/// Result of correlating one feature against a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubpixelMatch {
    pub location: [f64; 2],
    pub confidence: f64,
}

/// Correlates `center_feature` with every feature of the window, turns the
/// correlations into a heat-map with a softmax at `temperature`, and returns
/// the expected location under that heat-map together with its peak
/// probability.
pub fn subpixel_match(
    center_feature: &[f64],
    window_features: &[&[f64]],
    coords: &[[f64; 2]],
    temperature: f64,
) -> Option<SubpixelMatch> {
    if window_features.is_empty() || window_features.len() != coords.len() {
        return None;
    }
    let logits: Vec<f64> = window_features
        .iter()
        .map(|f| f.iter().zip(center_feature).map(|(a, b)| a * b).sum::<f64>() / temperature)
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut loc = [0.0, 0.0];
    let mut peak: f64 = 0.0;
    for (w, c) in weights.iter().zip(coords) {
        let p = w / total;
        loc[0] += p * c[0];
        loc[1] += p * c[1];
        peak = peak.max(p);
    }
    Some(SubpixelMatch {
        location: loc,
        confidence: peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_and_corner_windows() {
        let g = FeatureGrid::new(2, 20, 20, 1);
        let win = crop_window(&g, g.center(g.index(10, 10)), 5);
        assert_eq!(win.len(), 25);
        let corner = crop_window(&g, [0.0, 0.0], 5);
        assert_eq!(corner.len(), 9);
        for (cell, xy) in win.cells.iter().zip(&win.coords) {
            assert_eq!(g.containing_cell(*xy), Some(*cell));
            let (r, c) = g.nearest_cell(*xy);
            assert_eq!(g.index(r, c), *cell);
        }
    }

    #[test]
    fn one_hot_heat_map_is_exact() {
        let coords: Vec<[f64; 2]> = (0..9).map(|i| [(i % 3) as f64, (i / 3) as f64]).collect();
        let feats: Vec<Vec<f64>> = (0..9)
            .map(|i| (0..9).map(|k| if k == i { 1.0 } else { 0.0 }).collect())
            .collect();
        let refs: Vec<&[f64]> = feats.iter().map(|f| f.as_slice()).collect();
        let m = subpixel_match(&feats[4], &refs, &coords, 0.01).unwrap();
        assert!((m.location[0] - 1.0).abs() < 1e-9 && (m.location[1] - 1.0).abs() < 1e-9);
        assert!(m.confidence > 0.999);
    }

    #[test]
    fn bimodal_heat_map_gives_midpoint() {
        let coords = [[0.0, 0.0], [4.0, 2.0], [9.0, 9.0]];
        let feats = [vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let refs: Vec<&[f64]> = feats.iter().map(|f| f.as_slice()).collect();
        let m = subpixel_match(&[1.0, 0.0], &refs, &coords, 0.01).unwrap();
        assert!((m.location[0] - 2.0).abs() < 1e-9 && (m.location[1] - 1.0).abs() < 1e-9);
        assert!((m.confidence - 0.5).abs() < 1e-6);
    }

    #[test]
    fn empty_window() {
        assert!(subpixel_match(&[1.0], &[], &[], 0.1).is_none());
    }
}
