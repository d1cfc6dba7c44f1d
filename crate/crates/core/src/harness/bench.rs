//! Wall-clock accounting per pipeline stage.

use std::time::{Duration, Instant};

/// Accumulates elapsed time under stage names, in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct StageTimer {
    stages: Vec<(String, Duration)>,
}

impl StageTimer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, stage: &str, elapsed: Duration) {
        match self.stages.iter_mut().find(|(n, _)| n == stage) {
            Some((_, d)) => *d += elapsed,
            None => self.stages.push((stage.to_string(), elapsed)),
        }
    }

    /// Runs `f` and charges its duration to `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.add(stage, start.elapsed());
        out
    }

    pub fn stages(&self) -> &[(String, Duration)] {
        &self.stages
    }

    pub fn total(&self) -> Duration {
        self.stages.iter().map(|(_, d)| *d).sum()
    }

    /// Plain-text table: one row per stage plus the sum and the measured
    /// wall-clock time.
    pub fn table(&self, wall: Duration) -> String {
        let mut out = format!("{:<22} {:>12}\n", "stage", "seconds");
        for (name, d) in &self.stages {
            out.push_str(&format!("{:<22} {:>12.6}\n", name, d.as_secs_f64()));
        }
        out.push_str(&format!("{:<22} {:>12.6}\n", "sum", self.total().as_secs_f64()));
        out.push_str(&format!("{:<22} {:>12.6}\n", "wall", wall.as_secs_f64()));
        out
    }
}
