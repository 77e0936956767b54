//! Gauge transforms of exact eigenmaps.
//!
//! Eigenvectors are only determined up to sign and, inside a degenerate
//! eigenspace, up to rotation. A [`GaugeTransform`] holds one orthogonal
//! block per multiplicity group; [`apply_gauge`] right-multiplies each
//! group's columns by its block, leaving the Gram matrix unchanged.

use alloc::vec::Vec;

use rand::Rng as _;

use super::SpectralEmbedding;
use crate::error::{Error, Result};
use crate::linalg::{random_orthogonal, Mat};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeKind {
    Identity,
    /// Independent random sign per column.
    SignFlip,
    /// Haar-random rotation inside each multiplicity group.
    BlockRotation,
    /// One Haar-random rotation of all columns at once. Not an eigenbasis
    /// change in general, but it preserves every inner product, which is
    /// the gauge freedom of a random projection.
    Orthogonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeTransform {
    pub kind: GaugeKind,
    pub blocks: Vec<Mat>,
}

impl GaugeTransform {
    fn widths(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().map(|b| b.rows())
    }

    /// Largest `|BᵀB − I|` entry over all blocks.
    pub fn orthogonality_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.t_matmul(b).max_abs_diff(&Mat::identity(b.rows())))
            .fold(0.0, f64::max)
    }
}

pub fn sample_gauge_transform(
    emb: &SpectralEmbedding,
    kind: GaugeKind,
    seed: u64,
) -> Result<GaugeTransform> {
    let groups = emb.multiplicity_groups().ok_or(Error::MissingSpectrum)?;
    let mut rng = rng::seeded(seed);
    let blocks = match kind {
        GaugeKind::Orthogonal => alloc::vec![random_orthogonal(emb.dim(), &mut rng)],
        _ => groups
            .iter()
            .map(|&(_, w)| match kind {
                GaugeKind::Identity => Mat::identity(w),
                GaugeKind::SignFlip => {
                    Mat::from_fn(w, w, |i, j| match (i == j, rng.random::<bool>()) {
                        (false, _) => 0.0,
                        (true, true) => 1.0,
                        (true, false) => -1.0,
                    })
                }
                _ => random_orthogonal(w, &mut rng),
            })
            .collect(),
    };
    Ok(GaugeTransform { kind, blocks })
}

pub fn apply_gauge(emb: &SpectralEmbedding, t: &GaugeTransform) -> Result<SpectralEmbedding> {
    if t.blocks.iter().any(|b| b.rows() != b.cols()) {
        return Err(Error::GaugeMismatch);
    }
    let groups: Vec<(usize, usize)> = if t.kind == GaugeKind::Orthogonal {
        alloc::vec![(0, emb.dim())]
    } else {
        emb.multiplicity_groups().ok_or(Error::MissingSpectrum)?
    };
    if groups.len() != t.blocks.len() || groups.iter().map(|g| g.1).ne(t.widths()) {
        return Err(Error::GaugeMismatch);
    }
    if t.kind == GaugeKind::Identity {
        return Ok(emb.clone());
    }
    let n = emb.num_nodes();
    let mut data = Mat::zeros(n, emb.dim());
    for (&(start, w), b) in groups.iter().zip(&t.blocks) {
        let rotated = emb.data.cols_range(start, start + w).matmul(b);
        for i in 0..n {
            data.row_mut(i)[start..start + w].copy_from_slice(rotated.row(i));
        }
    }
    Ok(SpectralEmbedding {
        data,
        source: emb.source,
        spectrum: emb.spectrum.clone(),
    })
}
