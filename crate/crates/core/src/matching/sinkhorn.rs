use nalgebra::DMatrix;

use super::score::ScoreMatrix;
use crate::error::{Error, Result};

/// Transport plan with one slack row and one slack column appended.
///
/// Core rows and columns each carry unit mass; whatever a row (column)
/// does not send to a real partner sits in the slack column (row).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMatch {
    pub src_frame: usize,
    pub dst_frame: usize,
    /// `(n + 1) × (m + 1)`; the last row and column are slack.
    pub matrix: DMatrix<f64>,
}

/// One hard correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub src: usize,
    pub dst: usize,
    pub confidence: f64,
}

/// One-to-one hard correspondences between two index sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet {
    pub matches: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn mean_confidence(&self) -> f64 {
        if self.matches.is_empty() {
            return 0.0;
        }
        self.matches.iter().map(|m| m.confidence).sum::<f64>() / self.matches.len() as f64
    }
}

impl SoftMatch {
    pub fn rows(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols() - 1
    }

    /// The plan without its slack row and column.
    pub fn core(&self) -> DMatrix<f64> {
        self.matrix.view((0, 0), (self.rows(), self.cols())).into_owned()
    }

    /// Entries that are the maximum of both their row and column (among
    /// real partners) and reach `threshold`.
    pub fn hard_matches(&self, threshold: f64) -> CorrespondenceSet {
        let (n, m) = (self.rows(), self.cols());
        let mut col_best = vec![(0usize, f64::NEG_INFINITY); m];
        for s in 0..m {
            for r in 0..n {
                if self.matrix[(r, s)] > col_best[s].1 {
                    col_best[s] = (r, self.matrix[(r, s)]);
                }
            }
        }
        let mut matches = Vec::new();
        for r in 0..n {
            let mut best = (0usize, f64::NEG_INFINITY);
            for s in 0..m {
                if self.matrix[(r, s)] > best.1 {
                    best = (s, self.matrix[(r, s)]);
                }
            }
            let (s, p) = best;
            if m > 0 && p >= threshold && col_best[s].0 == r {
                matches.push(Correspondence {
                    src: r,
                    dst: s,
                    confidence: p,
                });
            }
        }
        CorrespondenceSet { matches }
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Multiplicative scaling on `exp(kernel − max)`. Returns `None` when a
/// scaling factor under- or overflows, so the caller can retry in log space.
fn scaled_plan(kernel: &DMatrix<f64>, log_a: &[f64], log_b: &[f64], iters: usize) -> Option<DMatrix<f64>> {
    let (rows, cols) = kernel.shape();
    let max = kernel.max();
    // Row-major copies of the kernel and its transpose, so both scaling
    // passes are contiguous axpy loops.
    let mut k = vec![0.0; rows * cols];
    let mut kt = vec![0.0; rows * cols];
    for r in 0..rows {
        for s in 0..cols {
            let e = (kernel[(r, s)] - max).exp();
            k[r * cols + s] = e;
            kt[s * rows + r] = e;
        }
    }
    let a: Vec<f64> = log_a.iter().map(|x| x.exp()).collect();
    let b: Vec<f64> = log_b.iter().map(|x| x.exp()).collect();
    let mut u = vec![1.0; rows];
    let mut v = vec![1.0; cols];
    let mut col_acc = vec![0.0; cols];
    let mut row_acc = vec![0.0; rows];
    let ok = |x: f64| x.is_finite() && x > 1e-250 && x < 1e250;
    for _ in 0..iters {
        col_acc.iter_mut().for_each(|x| *x = 0.0);
        for (row, uu) in k.chunks_exact(cols).zip(&u) {
            for (d, kk) in col_acc.iter_mut().zip(row) {
                *d += kk * uu;
            }
        }
        for ((vs, bs), d) in v.iter_mut().zip(&b).zip(&col_acc) {
            *vs = bs / d;
        }
        if !v.iter().all(|x| ok(*x)) {
            return None;
        }
        row_acc.iter_mut().for_each(|x| *x = 0.0);
        for (col, vv) in kt.chunks_exact(rows).zip(&v) {
            for (d, kk) in row_acc.iter_mut().zip(col) {
                *d += kk * vv;
            }
        }
        for ((ur, ar), d) in u.iter_mut().zip(&a).zip(&row_acc) {
            *ur = ar / d;
        }
        if !u.iter().all(|x| ok(*x)) {
            return None;
        }
    }
    Some(DMatrix::from_fn(rows, cols, |r, s| u[r] * k[r * cols + s] * v[s]))
}

fn log_plan(kernel: &DMatrix<f64>, log_a: &[f64], log_b: &[f64], iters: usize) -> DMatrix<f64> {
    let (rows, cols) = kernel.shape();
    let mut u = vec![0.0; rows];
    let mut v = vec![0.0; cols];
    for _ in 0..iters {
        for s in 0..cols {
            v[s] = log_b[s] - log_sum_exp((0..rows).map(|r| kernel[(r, s)] + u[r]));
        }
        for r in 0..rows {
            u[r] = log_a[r] - log_sum_exp((0..cols).map(|s| kernel[(r, s)] + v[s]));
        }
    }
    DMatrix::from_fn(rows, cols, |r, s| (kernel[(r, s)] + u[r] + v[s]).exp())
}

/// Entropic optimal transport between the rows and columns of `scores`
/// with a slack bin on each side, solved by log-domain Sinkhorn scaling.
///
/// Real rows and columns carry mass 1; the slack column carries `n` and the
/// slack row `m`, so every real element may go unmatched. The kernel is
/// `exp(score / epsilon)` with slack entries `exp(slack_score / epsilon)`.
/// Each iteration scales columns then rows, multiplicatively on the
/// max-shifted kernel, or with log-domain potentials if that under- or
/// overflows. The returned plan is finally projected so the real row and
/// column sums are exactly one.
pub fn sinkhorn(scores: &ScoreMatrix, epsilon: f64, iters: usize, slack_score: f64) -> Result<SoftMatch> {
    if !(epsilon > 0.0) || iters == 0 {
        return Err(Error::Config(
            "sinkhorn needs epsilon > 0 and at least one iteration".into(),
        ));
    }
    if !slack_score.is_finite() || scores.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite sinkhorn input".into()));
    }
    let (n, m) = (scores.rows(), scores.cols());
    let slack = slack_score / epsilon;
    let kernel = DMatrix::from_fn(n + 1, m + 1, |r, s| {
        if r < n && s < m {
            scores.values[(r, s)] / epsilon
        } else {
            slack
        }
    });
    let log_a: Vec<f64> = (0..=n)
        .map(|r| if r < n { 0.0 } else { (m.max(1) as f64).ln() })
        .collect();
    let log_b: Vec<f64> = (0..=m)
        .map(|s| if s < m { 0.0 } else { (n.max(1) as f64).ln() })
        .collect();
    let mut plan = match scaled_plan(&kernel, &log_a, &log_b, iters) {
        Some(p) => p,
        None => log_plan(&kernel, &log_a, &log_b, iters),
    };
    if plan.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("sinkhorn scaling overflowed".into()));
    }

    for s in 0..m {
        let col: f64 = (0..n).map(|r| plan[(r, s)]).sum();
        if col > 1.0 {
            for r in 0..n {
                plan[(r, s)] /= col;
            }
        }
        let col: f64 = (0..n).map(|r| plan[(r, s)]).sum();
        plan[(n, s)] = (1.0 - col).max(0.0);
    }
    for r in 0..n {
        let row: f64 = (0..m).map(|s| plan[(r, s)]).sum();
        plan[(r, m)] = (1.0 - row).max(0.0);
    }
    Ok(SoftMatch {
        src_frame: 0,
        dst_frame: 0,
        matrix: plan,
    })
}
