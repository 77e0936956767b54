//! Inner-product distortion of projected embeddings.

use rand::Rng as _;

use super::{EmbeddingSource, SpectralEmbedding};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JlStats {
    pub max_abs_err: f64,
    pub mean_abs_err: f64,
    pub fraction_within_eps: f64,
    pub eps: f64,
    pub pairs: usize,
}

/// `⌈c · ln N / ε²⌉`.
pub fn jl_target_dim(n: usize, eps: f64, c: f64) -> usize {
    libm::ceil(c * libm::log(n as f64) / (eps * eps)) as usize
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative errors `|⟨φ̃_i,φ̃_j⟩ − ⟨φ_i,φ_j⟩| / (‖φ_i‖‖φ_j‖)` over
/// `num_pairs` node pairs `i ≠ j` drawn uniformly. Pairs where either exact
/// row is zero are skipped.
pub fn jl_error_stats(
    exact: &SpectralEmbedding,
    projected: &SpectralEmbedding,
    num_pairs: usize,
    seed: u64,
    eps: f64,
) -> Result<JlStats> {
    if exact.source != EmbeddingSource::ExactEigenmaps {
        return Err(Error::Invalid("reference must be exact eigenmaps".into()));
    }
    let n = exact.num_nodes();
    if projected.num_nodes() != n {
        return Err(crate::error::shape_err!(
            "{} exact rows vs {} projected rows",
            n,
            projected.num_nodes()
        ));
    }
    if n < 2 {
        return Err(Error::Invalid("need at least two nodes".into()));
    }
    let norms: alloc::vec::Vec<f64> = (0..n)
        .map(|i| libm::sqrt(dot(exact.data.row(i), exact.data.row(i))))
        .collect();
    let mut rng = rng::seeded(seed);
    let (mut max, mut sum, mut within, mut count) = (0.0f64, 0.0, 0usize, 0usize);
    for _ in 0..num_pairs {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let denom = norms[i] * norms[j];
        if denom == 0.0 {
            continue;
        }
        let e = dot(exact.data.row(i), exact.data.row(j));
        let p = dot(projected.data.row(i), projected.data.row(j));
        let err = (p - e).abs() / denom;
        max = max.max(err);
        sum += err;
        within += usize::from(err <= eps);
        count += 1;
    }
    let c = count.max(1) as f64;
    Ok(JlStats {
        max_abs_err: max,
        mean_abs_err: sum / c,
        fraction_within_eps: within as f64 / c,
        eps,
        pairs: count,
    })
}
