//! Randomized verification suites: exact gauge invariance of the attention
//! layers and the block, and inner-product preservation of projected
//! eigenmaps.

use alloc::vec::Vec;

use rand::Rng as _;

use crate::attention::{gauge_equivariant_attention, gauge_invariant_attention, AttentionParams};
use crate::block::{multi_scale_block, BlockParams};
use crate::error::Result;
use crate::graph::{normalized_laplacian, Graph};
use crate::linalg::Mat;
use crate::rng;
use crate::spectral::{
    apply_gauge, exact_eigenmaps, jl_error_stats, jl_target_dim, project_eigenmaps,
    sample_gauge_transform, sample_projection, GaugeKind, GaugeTransform, JlStats, ProjectionSpec,
    SpectralEmbedding,
};
use crate::synthetic::{random_connected_graph, twin_leaf_graph};

/// Where trial graphs come from.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    /// Fresh graphs per trial with between 8 and `max_nodes` nodes. Even
    /// trials use plain random connected graphs, odd trials hang twin leaves
    /// on a random core to force degenerate eigenvalues.
    Random { max_nodes: usize, p: f64 },
    /// The same graph for every trial; only the gauge and weights vary.
    Fixed(Graph),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSuiteConfig {
    pub source: GraphSource,
    pub trials: usize,
    pub kinds: Vec<GaugeKind>,
    pub feature_dim: usize,
    pub tol: f64,
    pub seed: u64,
}

impl GaugeSuiteConfig {
    pub fn new(source: GraphSource, trials: usize, seed: u64) -> Self {
        Self {
            source,
            trials,
            kinds: alloc::vec![GaugeKind::SignFlip, GaugeKind::BlockRotation],
            feature_dim: 4,
            tol: 1e-10,
            seed,
        }
    }
}

/// Max-abs deviations for one graph and one gauge draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeTrial {
    pub trial: usize,
    pub nodes: usize,
    pub kind: GaugeKind,
    /// Largest multiplicity group in the spectrum.
    pub max_multiplicity: usize,
    /// Invariant attention output.
    pub attention: f64,
    /// Equivariant attention output against the rotated original.
    pub equivariance: f64,
    /// Block feature output.
    pub block: f64,
    /// Block embedding output against the rotated original.
    pub block_phi: f64,
    pub passed: bool,
}

impl GaugeTrial {
    pub fn max_deviation(&self) -> f64 {
        [
            self.attention,
            self.equivariance,
            self.block,
            self.block_phi,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSuiteReport {
    pub tol: f64,
    pub trials: Vec<GaugeTrial>,
}

impl GaugeSuiteReport {
    pub fn passed(&self) -> bool {
        self.trials.iter().all(|t| t.passed)
    }

    pub fn max_attention_deviation(&self) -> f64 {
        self.trials.iter().map(|t| t.attention).fold(0.0, f64::max)
    }

    pub fn max_block_deviation(&self) -> f64 {
        self.trials
            .iter()
            .map(|t| t.block.max(t.block_phi))
            .fold(0.0, f64::max)
    }

    pub fn max_deviation(&self) -> f64 {
        self.trials
            .iter()
            .map(GaugeTrial::max_deviation)
            .fold(0.0, f64::max)
    }
}

fn trial_graph(source: &GraphSource, trial: usize, seed: u64) -> Result<Graph> {
    match source {
        GraphSource::Fixed(g) => Ok(g.clone()),
        GraphSource::Random { max_nodes, p } => {
            let max = (*max_nodes).max(8);
            let mut rng = rng::seeded(seed);
            let n = rng.random_range(8..=max);
            if trial.is_multiple_of(2) {
                random_connected_graph(n, *p, seed)
            } else {
                let twins = rng.random_range(2..=4.min(n / 2));
                twin_leaf_graph(n - twins, twins, *p, seed)
            }
        }
    }
}

/// Rotates `data` with the groups of `like`.
fn gauge_like(data: &Mat, like: &SpectralEmbedding, t: &GaugeTransform) -> Result<Mat> {
    let emb = SpectralEmbedding {
        data: data.clone(),
        source: like.source,
        spectrum: like.spectrum.clone(),
    };
    Ok(apply_gauge(&emb, t)?.data)
}

pub fn gauge_suite(cfg: &GaugeSuiteConfig) -> Result<GaugeSuiteReport> {
    let d = cfg.feature_dim;
    let mut trials = Vec::with_capacity(cfg.trials * cfg.kinds.len());
    for trial in 0..cfg.trials {
        let seed = rng::derive(cfg.seed, trial as u64);
        let g = trial_graph(&cfg.source, trial, seed)?;
        let phi = exact_eigenmaps(&normalized_laplacian(&g)?, None)?;
        let max_multiplicity = phi
            .multiplicity_groups()
            .map(|gs| gs.iter().map(|g| g.1).max().unwrap_or(0))
            .unwrap_or(0);
        let mut rng = rng::seeded(rng::derive(seed, 1));
        let x = Mat::random_normal(g.num_nodes(), d, &mut rng);
        let attn = AttentionParams::random(d, rng::derive(seed, 2));
        let block = BlockParams::random(d, rng::derive(seed, 3));
        let gi = gauge_invariant_attention(&phi, &x, &attn)?.data;
        let ge = gauge_equivariant_attention(&x, &phi, &attn)?.data;
        let (bx, bphi) = multi_scale_block(&g, &x, &phi, &block)?;
        for (k, &kind) in cfg.kinds.iter().enumerate() {
            let t = sample_gauge_transform(&phi, kind, rng::derive(seed, 10 + k as u64))?;
            let rotated = apply_gauge(&phi, &t)?;
            let gi_r = gauge_invariant_attention(&rotated, &x, &attn)?.data;
            let ge_r = gauge_equivariant_attention(&x, &rotated, &attn)?.data;
            let (bx_r, bphi_r) = multi_scale_block(&g, &x, &rotated, &block)?;
            let mut rec = GaugeTrial {
                trial,
                nodes: g.num_nodes(),
                kind,
                max_multiplicity,
                attention: gi_r.max_abs_diff(&gi),
                equivariance: ge_r.max_abs_diff(&gauge_like(&ge, &phi, &t)?),
                block: bx_r.max_abs_diff(&bx),
                block_phi: bphi_r.data.max_abs_diff(&gauge_like(&bphi.data, &phi, &t)?),
                passed: false,
            };
            rec.passed = rec.max_deviation() <= cfg.tol;
            trials.push(rec);
        }
    }
    Ok(GaugeSuiteReport {
        tol: cfg.tol,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JlSuiteConfig {
    pub nodes: Vec<usize>,
    pub eps: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Constant `c` in `r = ⌈c ln N / ε²⌉`.
    pub c: f64,
    pub num_pairs: usize,
    /// Minimum fraction of pairs within `ε` for a trial to pass.
    pub required_fraction: f64,
    pub edge_probability: f64,
}

impl Default for JlSuiteConfig {
    fn default() -> Self {
        Self {
            nodes: alloc::vec![64, 256],
            eps: alloc::vec![0.3, 0.5],
            seeds: (0..20).collect(),
            c: 8.0,
            num_pairs: 500,
            required_fraction: 0.95,
            edge_probability: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JlTrial {
    pub nodes: usize,
    pub eps: f64,
    pub r: usize,
    pub seed: u64,
    pub stats: JlStats,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JlSuiteReport {
    pub required_fraction: f64,
    pub trials: Vec<JlTrial>,
}

impl JlSuiteReport {
    pub fn passed(&self) -> bool {
        self.trials.iter().all(|t| t.passed)
    }

    pub fn min_fraction(&self) -> f64 {
        self.trials
            .iter()
            .map(|t| t.stats.fraction_within_eps)
            .fold(1.0, f64::min)
    }
}

/// Projects exact eigenmaps of one random graph per `(N, seed)` to the JL
/// width for each `ε` and measures relative inner-product error.
pub fn jl_suite(cfg: &JlSuiteConfig) -> Result<JlSuiteReport> {
    let mut trials = Vec::new();
    for &n in &cfg.nodes {
        for &seed in &cfg.seeds {
            let graph_seed = rng::derive(seed, n as u64);
            let g = random_connected_graph(n, cfg.edge_probability, graph_seed)?;
            let exact = exact_eigenmaps(&normalized_laplacian(&g)?, None)?;
            for &eps in &cfg.eps {
                let r = jl_target_dim(n, eps, cfg.c);
                let spec = ProjectionSpec::new(exact.dim(), r, rng::derive(graph_seed, 1));
                let projected = project_eigenmaps(&exact, &sample_projection(&spec)?)?;
                let stats = jl_error_stats(
                    &exact,
                    &projected,
                    cfg.num_pairs,
                    rng::derive(graph_seed, 2),
                    eps,
                )?;
                trials.push(JlTrial {
                    nodes: n,
                    eps,
                    r,
                    seed,
                    stats,
                    passed: stats.fraction_within_eps >= cfg.required_fraction,
                });
            }
        }
    }
    Ok(JlSuiteReport {
        required_fraction: cfg.required_fraction,
        trials,
    })
}
