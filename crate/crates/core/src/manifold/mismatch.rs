//! Cross-resolution mismatch of the spectral attention kernel.
//!
//! For each resolution `n` the kernel `⟨φ_i, φ_j⟩ = 𝓛†_ij` is evaluated on
//! a fixed set of anchor points and compared with the same anchors in the
//! reference (finest) graph. The exact kernel comes from sparse conjugate
//! gradients, so the reference may exceed the dense oracle cap. Two more
//! series are reported alongside: projected eigenmaps (dense, `n` up to the
//! cap) and FastRP with a resolution-consistent projection.
//!
//! Graph Laplacian kernels on an `m`-manifold scale like `n^{2/m − 1}`, so
//! pseudoinverse entries are multiplied by `n^{1 − 2/m}` before comparison.
//! For surfaces (`m = 2`) the factor is exactly 1.

use alloc::string::String;
use alloc::vec::Vec;

use super::{default_knn_k, knn_graph, match_points, sample_manifold, ManifoldKind};
use crate::error::{Error, Result};
use crate::graph::{normalized_laplacian, Graph};
use crate::linalg::{log_log_slope, median, std_dev, Mat};
use crate::rng;
use crate::spectral::{
    exact_eigenmaps, fastrp_with_projection, project_eigenmaps, pseudoinverse_block,
    sample_projection, ProjectionSpec,
};
use crate::DEFAULT_ORACLE_CAP;

#[derive(Debug, Clone, PartialEq)]
pub struct MismatchConfig {
    pub manifold: ManifoldKind,
    /// Ascending; the last entry is the reference resolution.
    pub ns: Vec<usize>,
    /// `None` uses [`default_knn_k`] per resolution.
    pub knn_k: Option<usize>,
    /// Kernel entries are compared on all pairs of this many anchors.
    pub anchors: usize,
    pub r: usize,
    pub fastrp_k: usize,
    pub seeds: Vec<u64>,
    /// Also report projected exact eigenmaps for `n` up to the oracle cap.
    pub projected: bool,
    pub projection_seed: u64,
    pub cg_tol: f64,
}

impl MismatchConfig {
    pub fn new(manifold: ManifoldKind, ns: Vec<usize>, seeds: Vec<u64>) -> Self {
        Self {
            manifold,
            ns,
            knn_k: None,
            anchors: 60,
            r: 64,
            fastrp_k: 3,
            seeds,
            projected: true,
            projection_seed: 0,
            cg_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MismatchStats {
    pub n: usize,
    /// Median over seeds of the per-seed mean mismatch.
    pub mean: f64,
    /// Largest single-pair mismatch over all seeds.
    pub max: f64,
    /// Standard deviation over seeds of the per-seed mean.
    pub std: f64,
    pub per_seed_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MismatchSeries {
    pub name: String,
    pub stats: Vec<MismatchStats>,
    /// Log-log slope of `mean` against `n` over resolutions below the
    /// reference; `None` with fewer than two usable points.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MismatchReport {
    pub manifold: ManifoldKind,
    pub resolutions: Vec<usize>,
    pub reference_n: usize,
    pub seeds: Vec<u64>,
    pub anchors: usize,
    pub pairs: usize,
    pub exact: MismatchSeries,
    pub projected: Option<MismatchSeries>,
    pub fastrp: MismatchSeries,
    pub theoretical_slope: f64,
}

impl MismatchReport {
    /// Whether the exact series strictly decreases across resolutions.
    pub fn strictly_decreasing(&self) -> bool {
        self.exact.stats.windows(2).all(|w| w[1].mean < w[0].mean)
    }
}

/// Anchor-by-anchor kernel block.
type Kernel = Mat;

/// `n^{1 − 2/m}`.
pub fn kernel_scale(kind: ManifoldKind, n: usize) -> f64 {
    libm::pow(n as f64, 1.0 - 2.0 / kind.dim() as f64)
}

fn exact_kernel(g: &Graph, nodes: &[usize], tol: f64, scale: f64) -> Result<Kernel> {
    let sol = pseudoinverse_block(g, nodes, tol, 20 * g.num_nodes().max(100))?;
    Ok(sol.columns.select_rows(nodes).scale(scale))
}

fn gram_block(data: &Mat, nodes: &[usize]) -> Kernel {
    data.select_rows(nodes).gram()
}

/// Per-pair absolute differences over `i < j`.
fn pair_diffs(a: &Kernel, b: &Kernel) -> Vec<f64> {
    let n = a.rows();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    out
}

struct SeriesAcc {
    per_n: Vec<(Vec<f64>, f64)>,
}

impl SeriesAcc {
    fn new(len: usize) -> Self {
        Self {
            per_n: alloc::vec![(Vec::new(), 0.0); len],
        }
    }

    fn push(&mut self, idx: usize, diffs: &[f64]) {
        let m = crate::linalg::mean(diffs);
        let mx = diffs.iter().copied().fold(0.0, f64::max);
        self.per_n[idx].0.push(m);
        self.per_n[idx].1 = self.per_n[idx].1.max(mx);
    }

    fn finish(self, name: &str, ns: &[usize], reference: usize) -> MismatchSeries {
        let stats: Vec<MismatchStats> = ns
            .iter()
            .zip(self.per_n)
            .filter(|(_, (v, _))| !v.is_empty())
            .map(|(&n, (v, mx))| MismatchStats {
                n,
                mean: median(&v),
                max: mx,
                std: std_dev(&v),
                per_seed_mean: v,
            })
            .collect();
        let fit: Vec<&MismatchStats> = stats
            .iter()
            .filter(|s| s.n < reference && s.mean > 0.0)
            .collect();
        let slope = (fit.len() >= 2).then(|| {
            let x: Vec<f64> = fit.iter().map(|s| s.n as f64).collect();
            let y: Vec<f64> = fit.iter().map(|s| s.mean).collect();
            log_log_slope(&x, &y)
        });
        MismatchSeries {
            name: name.into(),
            stats,
            slope,
        }
    }
}

pub fn discretization_mismatch(cfg: &MismatchConfig) -> Result<MismatchReport> {
    let Some(&reference) = cfg.ns.last() else {
        return Err(Error::Invalid("need at least one resolution".into()));
    };
    if cfg.ns.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Invalid("resolutions must be ascending".into()));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::Invalid("need at least one seed".into()));
    }
    let resolutions: Vec<usize> = if cfg.ns.len() == 1 {
        cfg.ns.clone()
    } else {
        cfg.ns[..cfg.ns.len() - 1].to_vec()
    };
    let anchors = cfg.anchors.min(resolutions[0]);
    if anchors < 2 {
        return Err(Error::Invalid("need at least two anchors".into()));
    }
    let anchor_idx: Vec<usize> = (0..anchors).collect();
    let knn = |n: usize| cfg.knn_k.unwrap_or_else(|| default_knn_k(n)).min(n - 1);
    // one sparsity for every resolution keeps FastRP projections nested
    let fastrp_spec = |n: usize, seed: u64| {
        ProjectionSpec::new(n, cfg.r, rng::derive(seed, 0xFA57))
            .with_sparsity(libm::sqrt(reference as f64))
    };

    let mut exact = SeriesAcc::new(resolutions.len());
    let mut projected = SeriesAcc::new(resolutions.len());
    let mut fastrp = SeriesAcc::new(resolutions.len());

    for &seed in &cfg.seeds {
        let ref_cloud = sample_manifold(cfg.manifold, reference, seed)?;
        let ref_graph = knn_graph(&ref_cloud, knn(reference))?;
        let mut ref_exact: Option<(Vec<usize>, Kernel)> = None;
        let ref_fastrp = {
            let r = sample_projection(&fastrp_spec(reference, seed))?.transpose();
            fastrp_with_projection(&ref_graph, &r, cfg.fastrp_k)?.data
        };

        for (idx, &n) in resolutions.iter().enumerate() {
            let cloud = sample_manifold(cfg.manifold, n, seed)?;
            let anchor_cloud = cloud.prefix(anchors);
            let matched = match_points(&anchor_cloud, &ref_cloud)?.fine_index;
            let k_ref = match &ref_exact {
                Some((m, k)) if *m == matched => k.clone(),
                _ => {
                    let k = exact_kernel(
                        &ref_graph,
                        &matched,
                        cfg.cg_tol,
                        kernel_scale(cfg.manifold, reference),
                    )?;
                    ref_exact = Some((matched.clone(), k.clone()));
                    k
                }
            };
            let g = if n == reference {
                ref_graph.clone()
            } else {
                knn_graph(&cloud, knn(n))?
            };
            let scale = kernel_scale(cfg.manifold, n);
            let k_n = exact_kernel(&g, &anchor_idx, cfg.cg_tol, scale)?;
            exact.push(idx, &pair_diffs(&k_n, &k_ref));

            if cfg.projected && n <= DEFAULT_ORACLE_CAP {
                let emb = exact_eigenmaps(&normalized_laplacian(&g)?, None)?;
                let spec = ProjectionSpec::new(
                    emb.dim(),
                    cfg.r,
                    rng::derive(rng::derive(seed, cfg.projection_seed), n as u64),
                );
                let proj = project_eigenmaps(&emb, &sample_projection(&spec)?)?;
                let k_proj = gram_block(&proj.data, &anchor_idx).scale(scale);
                projected.push(idx, &pair_diffs(&k_proj, &k_ref));
            }

            let r = sample_projection(&fastrp_spec(n, seed))?.transpose();
            let f = fastrp_with_projection(&g, &r, cfg.fastrp_k)?.data;
            fastrp.push(
                idx,
                &pair_diffs(
                    &gram_block(&f, &anchor_idx),
                    &gram_block(&ref_fastrp, &matched),
                ),
            );
        }
    }

    Ok(MismatchReport {
        manifold: cfg.manifold,
        resolutions: resolutions.clone(),
        reference_n: reference,
        seeds: cfg.seeds.clone(),
        anchors,
        pairs: anchors * (anchors - 1) / 2,
        exact: exact.finish("exact", &resolutions, reference),
        projected: cfg
            .projected
            .then(|| projected.finish("projected", &resolutions, reference)),
        fastrp: fastrp.finish("fastrp", &resolutions, reference),
        theoretical_slope: cfg.manifold.theoretical_slope(),
    })
}
