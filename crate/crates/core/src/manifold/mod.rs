//! Point clouds on simple manifolds, k-NN graphs, and the resolution
//! experiments built on them.
//!
//! Clouds are drawn sequentially from one seeded stream, so the first `n`
//! points of a cloud of size `N > n` with the same seed are exactly the
//! cloud of size `n`. Coarse graphs are therefore subsamples of fine ones
//! and corresponding points can be matched exactly.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Mat;
use crate::rng;

mod mismatch;
mod transfer;

pub use mismatch::{
    discretization_mismatch, MismatchConfig, MismatchReport, MismatchSeries, MismatchStats,
};
pub use transfer::{
    harmonic_field, transfer_experiment, R2Pair, TransferConfig, TransferFeatures, TransferReport,
    TransferSeed, TransferTarget,
};

/// Torus radii: tube centre circle and tube.
pub const TORUS_MAJOR: f64 = 2.0;
pub const TORUS_MINOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    Sphere,
    Torus,
    Circle,
}

impl ManifoldKind {
    /// Intrinsic dimension `m`.
    pub fn dim(self) -> usize {
        match self {
            ManifoldKind::Sphere | ManifoldKind::Torus => 2,
            ManifoldKind::Circle => 1,
        }
    }

    pub fn ambient_dim(self) -> usize {
        match self {
            ManifoldKind::Sphere | ManifoldKind::Torus => 3,
            ManifoldKind::Circle => 2,
        }
    }

    /// The `n^{-1/(m+4)}` exponent.
    pub fn theoretical_slope(self) -> f64 {
        -1.0 / (self.dim() as f64 + 4.0)
    }

    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::Sphere => "sphere",
            ManifoldKind::Torus => "torus",
            ManifoldKind::Circle => "circle",
        }
    }
}

impl core::str::FromStr for ManifoldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" | "sphere_s2" | "s2" => Ok(ManifoldKind::Sphere),
            "torus" | "torus_t2" | "t2" => Ok(ManifoldKind::Torus),
            "circle" | "circle_s1" | "s1" => Ok(ManifoldKind::Circle),
            other => Err(Error::Invalid(alloc::format!("unknown manifold {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Mat,
    pub manifold: ManifoldKind,
    pub seed: u64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    /// The first `n` points.
    pub fn prefix(&self, n: usize) -> PointCloud {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        PointCloud {
            points: self.points.select_rows(&idx),
            manifold: self.manifold,
            seed: self.seed,
        }
    }
}

pub fn sample_manifold(kind: ManifoldKind, n: usize, seed: u64) -> Result<PointCloud> {
    if n < 4 {
        return Err(Error::Invalid(alloc::format!(
            "need n ≥ 4 samples, got {n}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut points = Mat::zeros(n, kind.ambient_dim());
    for i in 0..n {
        let row = points.row_mut(i);
        match kind {
            ManifoldKind::Sphere => loop {
                let g: [f64; 3] = [
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ];
                let norm = libm::sqrt(g.iter().map(|v| v * v).sum());
                if norm > 1e-12 {
                    for c in 0..3 {
                        row[c] = g[c] / norm;
                    }
                    break;
                }
            },
            ManifoldKind::Torus => {
                // the area element is proportional to R + r cos θ
                let theta = loop {
                    let t = rng.random_range(0.0..2.0 * PI);
                    let w =
                        (TORUS_MAJOR + TORUS_MINOR * libm::cos(t)) / (TORUS_MAJOR + TORUS_MINOR);
                    if rng.random::<f64>() < w {
                        break t;
                    }
                };
                let phi = rng.random_range(0.0..2.0 * PI);
                let rho = TORUS_MAJOR + TORUS_MINOR * libm::cos(theta);
                row[0] = rho * libm::cos(phi);
                row[1] = rho * libm::sin(phi);
                row[2] = TORUS_MINOR * libm::sin(theta);
            }
            ManifoldKind::Circle => {
                let t = rng.random_range(0.0..2.0 * PI);
                row[0] = libm::cos(t);
                row[1] = libm::sin(t);
            }
        }
    }
    Ok(PointCloud {
        points,
        manifold: kind,
        seed,
    })
}

/// `k = 10` from 250 points up, `⌈log₂ n⌉` below.
pub fn default_knn_k(n: usize) -> usize {
    if n >= 250 {
        10
    } else {
        libm::ceil(libm::log2(n.max(2) as f64)) as usize
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Union-rule k-NN graph: `i ~ j` if either is among the other's `k`
/// nearest points. Ties break by index.
pub fn knn_graph(pc: &PointCloud, k: usize) -> Result<Graph> {
    let n = pc.len();
    if k >= n {
        return Err(Error::Invalid(alloc::format!(
            "k = {k} must be below n = {n}"
        )));
    }
    if k == 0 {
        return Err(Error::Invalid("k must be ≥ 1".into()));
    }
    let p = &pc.points;
    let mut edges = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        cand.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(p.row(i), p.row(j)), j)),
        );
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, cmp);
        }
        edges.extend(cand[..k].iter().map(|&(_, j)| (i, j)));
    }
    Graph::from_edges(n, edges)?.with_coords(pc.points.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `fine_index[i]` is the fine point nearest coarse point `i`.
    pub fine_index: Vec<usize>,
    pub distance: Vec<f64>,
}

/// Nearest fine point for every coarse point (Euclidean, ties by index).
pub fn match_points(coarse: &PointCloud, fine: &PointCloud) -> Result<Matching> {
    if coarse.manifold != fine.manifold {
        return Err(Error::Invalid(alloc::format!(
            "cannot match a {} cloud to a {} cloud",
            coarse.manifold.name(),
            fine.manifold.name()
        )));
    }
    let mut fine_index = Vec::with_capacity(coarse.len());
    let mut distance = Vec::with_capacity(coarse.len());
    for i in 0..coarse.len() {
        let a = coarse.points.row(i);
        let (best, d) = (0..fine.len())
            .map(|j| (j, sq_dist(a, fine.points.row(j))))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        fine_index.push(best);
        distance.push(libm::sqrt(d));
    }
    Ok(Matching {
        fine_index,
        distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::median;

    #[test]
    fn sphere_points_unit_norm() {
        let pc = sample_manifold(ManifoldKind::Sphere, 1000, 1).unwrap();
        for i in 0..1000 {
            let r = libm::sqrt(pc.points.row(i).iter().map(|v| v * v).sum());
            assert!((r - 1.0).abs() < 1e-12);
        }
        assert_eq!(pc, sample_manifold(ManifoldKind::Sphere, 1000, 1).unwrap());
    }

    #[test]
    fn torus_on_surface_and_centred() {
        let n = 4000;
        let pc = sample_manifold(ManifoldKind::Torus, n, 2).unwrap();
        let mut mean = [0.0; 3];
        for i in 0..n {
            let p = pc.points.row(i);
            let rho = libm::sqrt(p[0] * p[0] + p[1] * p[1]);
            let f = (rho - TORUS_MAJOR).powi(2) + p[2] * p[2] - TORUS_MINOR * TORUS_MINOR;
            assert!(f.abs() < 1e-9);
            for c in 0..3 {
                mean[c] += p[c] / n as f64;
            }
        }
        let bound = 5.0 / libm::sqrt(n as f64);
        assert!(mean.iter().all(|m| m.abs() < bound), "{mean:?}");
    }

    #[test]
    fn clouds_are_nested() {
        for kind in [
            ManifoldKind::Sphere,
            ManifoldKind::Torus,
            ManifoldKind::Circle,
        ] {
            let big = sample_manifold(kind, 300, 5).unwrap();
            assert_eq!(big.prefix(100), sample_manifold(kind, 100, 5).unwrap());
        }
    }

    #[test]
    fn too_few_points() {
        assert!(sample_manifold(ManifoldKind::Circle, 3, 0).is_err());
    }

    #[test]
    fn four_circle_points_nearest_neighbor() {
        let pts = Mat::from_rows(&[&[1.0, 0.0], &[0.9, 0.1], &[-1.0, 0.0], &[-0.8, -0.2]]);
        let pc = PointCloud {
            points: pts,
            manifold: ManifoldKind::Circle,
            seed: 0,
        };
        let g = knn_graph(&pc, 1).unwrap();
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));
        assert!(g.has_edge(2, 3));
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn full_k_is_complete() {
        let pc = sample_manifold(ManifoldKind::Sphere, 12, 3).unwrap();
        assert_eq!(knn_graph(&pc, 11).unwrap().num_edges(), 66);
        assert!(knn_graph(&pc, 12).is_err());
    }

    #[test]
    fn sphere_knn_connected() {
        let pc = sample_manifold(ManifoldKind::Sphere, 500, 4).unwrap();
        assert!(knn_graph(&pc, 10).unwrap().is_connected());
    }

    #[test]
    fn subset_matches_identically() {
        let fine = sample_manifold(ManifoldKind::Sphere, 200, 6).unwrap();
        let m = match_points(&fine.prefix(50), &fine).unwrap();
        assert_eq!(m.fine_index, (0..50).collect::<Vec<_>>());
        assert!(m.distance.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn matching_distance_shrinks_with_fine_n() {
        let mut medians = Vec::new();
        for n in [100, 400, 1600] {
            let per_seed: Vec<f64> = (0..5)
                .map(|s| {
                    let coarse = sample_manifold(ManifoldKind::Sphere, 50, 100 + s).unwrap();
                    let fine = sample_manifold(ManifoldKind::Sphere, n, 200 + s).unwrap();
                    crate::linalg::mean(&match_points(&coarse, &fine).unwrap().distance)
                })
                .collect();
            medians.push(median(&per_seed));
        }
        assert!(
            medians[0] > medians[1] && medians[1] > medians[2],
            "{medians:?}"
        );
    }

    #[test]
    fn mismatched_kinds_rejected() {
        let a = sample_manifold(ManifoldKind::Sphere, 10, 0).unwrap();
        let b = sample_manifold(ManifoldKind::Torus, 10, 0).unwrap();
        assert!(match_points(&a, &b).is_err());
    }
}
