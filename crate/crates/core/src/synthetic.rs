//! Synthetic graphs for tests, sweeps and benchmarks.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::linalg::Mat;
use crate::rng;

/// Random recursive tree (node `i` attaches to a uniform earlier node) plus
/// independent extra edges with probability `p`. Always connected.
pub fn random_connected_graph(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::Invalid("random graph needs at least 2 nodes".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i, rng.random_range(0..i))).collect();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// A random connected core with `twins` pendant leaves hung on one core
/// node. Twin leaves make eigenvalue 1 of the normalized Laplacian
/// degenerate with multiplicity at least `twins − 1`.
pub fn twin_leaf_graph(core: usize, twins: usize, p: f64, seed: u64) -> Result<Graph> {
    let base = random_connected_graph(core, p, seed)?;
    let hub = rng::seeded(rng::derive(seed, 1)).random_range(0..core);
    let mut edges: Vec<(usize, usize)> = base.edges().collect();
    edges.extend((0..twins).map(|t| (hub, core + t)));
    Graph::from_edges(core + twins, edges)
}

/// Open rectangular grid, `⌊√n⌋` columns wide; degree ≤ 4 and neighbors
/// are close in memory.
pub fn grid_graph(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::Invalid("grid needs at least 2 nodes".into()));
    }
    let cols = (libm::sqrt(n as f64) as usize).max(1);
    let mut edges = Vec::with_capacity(2 * n);
    for i in 0..n {
        if (i + 1) % cols != 0 && i + 1 < n {
            edges.push((i, i + 1));
        }
        if i + cols < n {
            edges.push((i, i + cols));
        }
    }
    Graph::from_edges(n, edges)
}

/// Stochastic block model; returns the graph and each node's block.
pub fn stochastic_block_model(
    sizes: &[usize],
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(Graph, Vec<usize>)> {
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| core::iter::repeat_n(b, s))
        .collect();
    let n = labels.len();
    let mut rng = rng::seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Ok((Graph::from_edges(n, edges)?, labels))
}

/// Standard-normal noise of width `dim`, with `signal` added to column
/// `label % dim` of each node.
pub fn label_features(labels: &[usize], dim: usize, signal: f64, seed: u64) -> FeatureMatrix {
    let mut rng = rng::seeded(seed);
    Mat::from_fn(labels.len(), dim, |i, c| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z + if labels[i] % dim == c { signal } else { 0.0 }
    })
}

/// Shuffled split of `0..n` with `⌊fraction · n⌋` training rows.
pub fn train_test_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let k = ((n as f64) * fraction) as usize;
    let test = idx.split_off(k.min(n));
    (idx, test)
}
