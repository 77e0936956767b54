//! Forward-pass timing and peak memory against graph size.

use std::time::Instant;

use gist_core::block::{model_forward, HeadConfig, ModelConfig, ModelWeights, Task};
use gist_core::linalg::log_log_slope;
use gist_core::rng;
use gist_core::synthetic::grid_graph;
use gist_core::Mat;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub ns: Vec<usize>,
    pub ds: Vec<usize>,
    pub r: usize,
    pub k: usize,
    /// Timed repetitions per point; the minimum is reported.
    pub reps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            ns: (12..=17).map(|p| 1usize << p).collect(),
            ds: vec![64],
            r: 64,
            k: 8,
            reps: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub d: usize,
    pub edges: usize,
    pub seconds: f64,
    /// Process high-water resident set after this point, in KiB.
    pub peak_rss_kib: Option<u64>,
}

/// `VmHWM` from `/proc/self/status`.
pub fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
}

/// One block on an open grid (degree ≤ 4): FastRP, embedding, block, head.
pub fn time_forward(
    n: usize,
    d: usize,
    r: usize,
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<BenchRow> {
    let g = grid_graph(n)?;
    let x = Mat::random_normal(n, d, &mut rng::seeded(seed));
    let mut cfg = ModelConfig::new(
        d,
        d,
        r,
        HeadConfig {
            output_dim: 1,
            task: Task::NodeRegression,
        },
    );
    cfg.fastrp_k = k;
    cfg.seed = seed;
    let w = ModelWeights::init(&cfg)?;
    let mut best = f64::INFINITY;
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        let out = model_forward(&g, &x, &cfg, &w)?;
        best = best.min(t.elapsed().as_secs_f64());
        std::hint::black_box(out);
    }
    Ok(BenchRow {
        n,
        d,
        edges: g.num_edges(),
        seconds: best,
        peak_rss_kib: peak_rss_kib(),
    })
}

/// Points in increasing `n` per `d`, so each RSS reading bounds its own run.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut ns = cfg.ns.clone();
    ns.sort_unstable();
    let mut rows = Vec::new();
    for &d in &cfg.ds {
        for &n in &ns {
            rows.push(time_forward(n, d, cfg.r, cfg.k, cfg.reps, cfg.seed)?);
        }
    }
    Ok(rows)
}

/// Log-log slope of time against `n` for one `d`; `None` with fewer than two
/// points.
pub fn time_slope(rows: &[BenchRow], d: usize) -> Option<f64> {
    let (n, t): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.d == d)
        .map(|r| (r.n as f64, r.seconds))
        .unzip();
    (n.len() >= 2).then(|| log_log_slope(&n, &t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_high_water_mark() {
        assert!(peak_rss_kib().unwrap() > 0);
    }

    #[test]
    fn small_bench_rows() {
        let cfg = BenchConfig {
            ns: vec![512, 256],
            ds: vec![8],
            r: 8,
            k: 2,
            reps: 1,
            seed: 0,
        };
        let rows = run_bench(&cfg).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), [256, 512]);
        assert!(rows.iter().all(|r| r.seconds > 0.0 && r.edges > 0));
        assert!(time_slope(&rows, 8).unwrap().is_finite());
        assert!(time_slope(&rows, 16).is_none());
    }
}
