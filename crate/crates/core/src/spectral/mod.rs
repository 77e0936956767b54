//! Spectral positional embeddings.
//!
//! Two routes produce node embeddings whose inner products approximate the
//! Laplacian pseudoinverse (the resistance-distance Green's function):
//!
//! * [`exact_eigenmaps`]: dense eigendecomposition, row `i` holds
//!   `u_k[i] / √λ_k` for every non-null eigenpair. Oracle only.
//! * [`fastrp_embed`]: `Σ_{i=1..k} Pⁱ R` with a very sparse random
//!   projection `R`, computed with `k` sparse products. Linear in `N`.
//!
//! Exact eigenmaps are defined only up to a gauge (signs, rotations inside
//! degenerate eigenspaces); [`gauge`] samples and applies such transforms,
//! [`jl`] measures how well projections preserve inner products.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{DenseOperator, OperatorKind};
use crate::linalg::{sym_eigen, Mat};
use crate::DEFAULT_ORACLE_CAP;

pub mod gauge;
pub mod jl;
mod kernel;
mod projection;

pub use gauge::{apply_gauge, sample_gauge_transform, GaugeKind, GaugeTransform};
pub use jl::{jl_error_stats, jl_target_dim, JlStats};
pub use kernel::{pseudoinverse_block, PseudoinverseSolve};
pub use projection::{
    fastrp_embed, fastrp_with_projection, project_eigenmaps, sample_projection, ProjectionSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingSource {
    ExactEigenmaps,
    ProjectedEigenmaps,
    FastRp,
}

/// One retained eigenvalue and the id of its multiplicity group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumEntry {
    pub eigenvalue: f64,
    pub group: usize,
}

/// `N × r` positional embedding, row per node.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub data: Mat,
    pub source: EmbeddingSource,
    /// Present for exact eigenmaps: one entry per column.
    pub spectrum: Option<Vec<SpectrumEntry>>,
}

impl SpectralEmbedding {
    pub fn new(data: Mat, source: EmbeddingSource) -> Self {
        Self {
            data,
            source,
            spectrum: None,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    /// `Φ Φᵀ`.
    pub fn gram(&self) -> Mat {
        self.data.gram()
    }

    /// `(first column, width)` of each multiplicity group, in column order.
    pub fn multiplicity_groups(&self) -> Option<Vec<(usize, usize)>> {
        let spec = self.spectrum.as_ref()?;
        let mut groups: Vec<(usize, usize)> = Vec::new();
        for (c, e) in spec.iter().enumerate() {
            match groups.last_mut() {
                Some((start, len)) if spec[*start].group == e.group => *len += 1,
                _ => groups.push((c, 1)),
            }
        }
        Some(groups)
    }

    /// Embedding of the relabeled graph where old node `i` is `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let mut inv = alloc::vec![0; perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            inv[new] = old;
        }
        Self {
            data: self.data.select_rows(&inv),
            source: self.source,
            spectrum: self.spectrum.clone(),
        }
    }
}

/// Default null-space threshold: `1e-8 · λ_max`.
pub fn default_zero_tol(lambda_max: f64) -> f64 {
    1e-8 * lambda_max
}

/// Eigenvalues closer than this share a multiplicity group.
pub fn degeneracy_tol(lambda_max: f64) -> f64 {
    1e-6 * lambda_max.max(1.0)
}

fn require_laplacian(l: &DenseOperator) -> Result<()> {
    if l.kind != OperatorKind::NormalizedLaplacian {
        return Err(Error::Invalid(alloc::format!(
            "expected a normalized Laplacian, got {:?}",
            l.kind
        )));
    }
    if l.dim() > DEFAULT_ORACLE_CAP {
        return Err(Error::OracleOnly {
            n: l.dim(),
            cap: DEFAULT_ORACLE_CAP,
        });
    }
    Ok(())
}

/// Laplacian eigenmaps: columns `u_k / √λ_k` for every `λ_k > zero_tol`,
/// eigenvalues ascending. `zero_tol = None` uses [`default_zero_tol`].
pub fn exact_eigenmaps(l: &DenseOperator, zero_tol: Option<f64>) -> Result<SpectralEmbedding> {
    require_laplacian(l)?;
    let n = l.dim();
    let eig = sym_eigen(&l.data);
    let lambda_max = eig.values.last().copied().unwrap_or(0.0);
    let tol = zero_tol.unwrap_or_else(|| default_zero_tol(lambda_max));
    let deg_tol = degeneracy_tol(lambda_max);

    let kept: Vec<usize> = (0..n).filter(|&k| eig.values[k] > tol).collect();
    let mut data = Mat::zeros(n, kept.len());
    let mut spectrum = Vec::with_capacity(kept.len());
    let mut group = 0;
    for (c, &k) in kept.iter().enumerate() {
        let lam = eig.values[k];
        if c > 0
            && lam
                - spectrum
                    .last()
                    .map_or(lam, |e: &SpectrumEntry| e.eigenvalue)
                > deg_tol
        {
            group += 1;
        }
        spectrum.push(SpectrumEntry {
            eigenvalue: lam,
            group,
        });
        let s = 1.0 / libm::sqrt(lam);
        for i in 0..n {
            data[(i, c)] = eig.vectors[(i, k)] * s;
        }
    }
    Ok(SpectralEmbedding {
        data,
        source: EmbeddingSource::ExactEigenmaps,
        spectrum: Some(spectrum),
    })
}

/// Moore–Penrose pseudoinverse via eigendecomposition.
pub fn laplacian_pseudoinverse(l: &DenseOperator, zero_tol: Option<f64>) -> Result<DenseOperator> {
    require_laplacian(l)?;
    let n = l.dim();
    let eig = sym_eigen(&l.data);
    let lambda_max = eig.values.last().copied().unwrap_or(0.0);
    let tol = zero_tol.unwrap_or_else(|| default_zero_tol(lambda_max));
    let mut data = Mat::zeros(n, n);
    for k in (0..n).filter(|&k| eig.values[k] > tol) {
        let inv = 1.0 / eig.values[k];
        let u = eig.vectors.col(k);
        for i in 0..n {
            let ui = u[i] * inv;
            for j in 0..n {
                data[(i, j)] += ui * u[j];
            }
        }
    }
    Ok(DenseOperator {
        data,
        kind: OperatorKind::LaplacianPseudoinverse,
    })
}

/// Resistance distances from one pseudoinverse.
#[derive(Debug, Clone)]
pub struct ResistanceOracle {
    pinv: DenseOperator,
}

impl ResistanceOracle {
    pub fn new(l: &DenseOperator) -> Result<Self> {
        Ok(Self {
            pinv: laplacian_pseudoinverse(l, None)?,
        })
    }

    pub fn pseudoinverse(&self) -> &DenseOperator {
        &self.pinv
    }

    /// `Ω(i,j) = (e_i − e_j)ᵀ 𝓛† (e_i − e_j)`; exactly 0 when `i == j`.
    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.pinv.dim();
        if i >= n || j >= n {
            return Err(Error::Invalid(alloc::format!(
                "node pair ({i}, {j}) out of range for {n} nodes"
            )));
        }
        if i == j {
            return Ok(0.0);
        }
        let p = &self.pinv.data;
        Ok(p[(i, i)] + p[(j, j)] - 2.0 * p[(i, j)])
    }
}

pub fn resistance_distance(l: &DenseOperator, i: usize, j: usize) -> Result<f64> {
    if i == j && i < l.dim() {
        return Ok(0.0);
    }
    ResistanceOracle::new(l)?.distance(i, j)
}
