use rand::Rng as _;

use super::{EmbeddingSource, SpectralEmbedding};
use crate::error::{Error, Result};
use crate::graph::{transition_apply, Graph};
use crate::linalg::Mat;
use crate::rng;

/// Very sparse random projection law: each entry is `±√(s/r)` with
/// probability `1/(2s)` each and `0` otherwise, so `E[RᵀR] = I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSpec {
    pub input_dim: usize,
    pub target_dim: usize,
    pub sparsity: f64,
    pub seed: u64,
}

impl ProjectionSpec {
    /// Sparsity defaults to `√input_dim` (at least 1).
    pub fn new(input_dim: usize, target_dim: usize, seed: u64) -> Self {
        Self {
            input_dim,
            target_dim,
            sparsity: libm::sqrt(input_dim as f64).max(1.0),
            seed,
        }
    }

    pub fn with_sparsity(mut self, s: f64) -> Self {
        self.sparsity = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_dim == 0 {
            return Err(Error::Invalid(
                "projection target dimension must be ≥ 1".into(),
            ));
        }
        if !self.sparsity.is_finite() || self.sparsity < 1.0 {
            return Err(Error::Invalid(alloc::format!(
                "projection sparsity must be a finite real ≥ 1, got {}",
                self.sparsity
            )));
        }
        Ok(())
    }
}

/// Fill `out` (`input_dim × r`, i.e. already transposed) from the law.
/// Column `l` of the output (row `l` of `R`) uses its own RNG stream, so the
/// result does not depend on generation order.
fn fill_transposed(spec: &ProjectionSpec, out: &mut Mat) {
    let r = spec.target_dim;
    let s = spec.sparsity;
    let value = libm::sqrt(s / r as f64);
    let p_nonzero = 1.0 / s;
    for l in 0..r {
        let mut rng = rng::stream(spec.seed, l as u64);
        for j in 0..spec.input_dim {
            let u: f64 = rng.random();
            out[(j, l)] = if u < 0.5 * p_nonzero {
                value
            } else if u < p_nonzero {
                -value
            } else {
                0.0
            };
        }
    }
}

/// `r × input_dim` very sparse projection.
pub fn sample_projection(spec: &ProjectionSpec) -> Result<Mat> {
    spec.validate()?;
    let mut t = Mat::zeros(spec.input_dim, spec.target_dim);
    fill_transposed(spec, &mut t);
    Ok(t.transpose())
}

/// FastRP: `Φ = Σ_{i=1..k} Pⁱ R` with `R` the transpose of
/// `sample_projection(ProjectionSpec::new(N, r, seed))`.
pub fn fastrp_embed(g: &Graph, r: usize, k: usize, seed: u64) -> Result<SpectralEmbedding> {
    let spec = ProjectionSpec::new(g.num_nodes(), r, seed);
    spec.validate()?;
    let mut proj = Mat::zeros(g.num_nodes(), r);
    fill_transposed(&spec, &mut proj);
    fastrp_with_projection(g, &proj, k)
}

/// FastRP with an explicit `N × r` projection.
pub fn fastrp_with_projection(g: &Graph, proj: &Mat, k: usize) -> Result<SpectralEmbedding> {
    if k == 0 {
        return Err(Error::Invalid("FastRP needs k ≥ 1".into()));
    }
    if proj.rows() != g.num_nodes() {
        return Err(Error::Shape(alloc::format!(
            "projection has {} rows, graph has {} nodes",
            proj.rows(),
            g.num_nodes()
        )));
    }
    let mut term = transition_apply(g, proj);
    let mut acc = term.clone();
    for _ in 1..k {
        term = transition_apply(g, &term);
        acc.add_assign(&term);
    }
    Ok(SpectralEmbedding::new(acc, EmbeddingSource::FastRp))
}

/// Row `i` of the result is `R · φ_i`; `R` is `r × K`.
pub fn project_eigenmaps(emb: &SpectralEmbedding, r: &Mat) -> Result<SpectralEmbedding> {
    if emb.source != EmbeddingSource::ExactEigenmaps {
        return Err(Error::Invalid(
            "only exact eigenmaps can be projected".into(),
        ));
    }
    if r.cols() != emb.dim() {
        return Err(Error::Shape(alloc::format!(
            "projection has {} columns, embedding has {}",
            r.cols(),
            emb.dim()
        )));
    }
    Ok(SpectralEmbedding::new(
        emb.data.matmul_t(r),
        EmbeddingSource::ProjectedEigenmaps,
    ))
}
