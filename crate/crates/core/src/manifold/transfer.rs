//! Coarse-to-fine transfer: train on a subsampled cloud, evaluate on the
//! full cloud, compare a gauge-invariant model with one that feeds spectral
//! coordinates in as positional encodings.

use alloc::vec::Vec;

use super::{default_knn_k, knn_graph, sample_manifold, ManifoldKind, PointCloud};
use crate::autodiff::Optimizer;
use crate::block::{fit, predict, r_squared, Architecture, HeadConfig, ModelConfig, Targets, Task};
use crate::error::{Error, Result};
use crate::graph::{normalized_laplacian, Graph};
use crate::linalg::Mat;
use crate::rng;
use crate::spectral::{
    exact_eigenmaps, project_eigenmaps, sample_projection, ProjectionSpec, SpectralEmbedding,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferTarget {
    /// Fixed combination of degree ≤ 2 harmonics of the coordinates.
    Harmonic,
    /// Zero-variance field; R² is undefined.
    Constant,
}

/// Node features handed to both models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferFeatures {
    /// All ambient coordinates.
    Coordinates,
    /// The last ambient coordinate only.
    Height,
}

impl TransferFeatures {
    fn dim(self, kind: ManifoldKind) -> usize {
        match self {
            TransferFeatures::Coordinates => kind.ambient_dim(),
            TransferFeatures::Height => 1,
        }
    }

    fn extract(self, pc: &PointCloud) -> Mat {
        match self {
            TransferFeatures::Coordinates => pc.points.clone(),
            TransferFeatures::Height => {
                let last = pc.points.cols() - 1;
                Mat::from_fn(pc.len(), 1, |i, _| pc.points[(i, last)])
            }
        }
    }
}

/// `x − y/2 + 0.8·P₂(z) + 1.2·xy` on 3-D clouds, `x + 0.6·(x² − y²)` on
/// the circle.
pub fn harmonic_field(points: &Mat) -> Mat {
    Mat::from_fn(points.rows(), 1, |i, _| {
        let p = points.row(i);
        if p.len() >= 3 {
            let (x, y, z) = (p[0], p[1], p[2]);
            x - 0.5 * y + 0.8 * (3.0 * z * z - 1.0) / 2.0 + 1.2 * x * y
        } else {
            p[0] + 0.6 * (p[0] * p[0] - p[1] * p[1])
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferConfig {
    pub manifold: ManifoldKind,
    pub n_train: usize,
    pub n_test: usize,
    pub target: TransferTarget,
    pub features: TransferFeatures,
    pub seeds: Vec<u64>,
    /// Projected eigenmap width.
    pub r: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub optimizer: Optimizer,
}

impl TransferConfig {
    pub fn new(manifold: ManifoldKind, n_train: usize, n_test: usize, seeds: Vec<u64>) -> Self {
        Self {
            manifold,
            n_train,
            n_test,
            target: TransferTarget::Harmonic,
            features: TransferFeatures::Coordinates,
            seeds,
            r: 32,
            hidden_dim: 16,
            epochs: 250,
            optimizer: Optimizer::adam(1e-2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train > self.n_test {
            return Err(Error::Invalid(alloc::format!(
                "n_train {} exceeds n_test {}",
                self.n_train,
                self.n_test
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Invalid("no seeds".into()));
        }
        if self.r == 0 || self.hidden_dim == 0 {
            return Err(Error::Invalid("r and hidden_dim must be ≥ 1".into()));
        }
        Ok(())
    }

    fn model(&self, architecture: Architecture, seed: u64) -> ModelConfig {
        let head = HeadConfig {
            output_dim: 1,
            task: Task::NodeRegression,
        };
        let mut cfg = ModelConfig::new(
            self.features.dim(self.manifold),
            self.hidden_dim,
            self.r,
            head,
        );
        cfg.architecture = architecture;
        cfg.num_blocks = 1;
        cfg.tail_blocks = 1;
        cfg.seed = seed;
        cfg
    }
}

/// Train and test R²; `None` where the target has no variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct R2Pair {
    pub train: Option<f64>,
    pub test: Option<f64>,
}

impl R2Pair {
    pub fn drop(&self) -> Option<f64> {
        Some(self.train? - self.test?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferSeed {
    pub seed: u64,
    pub gauge_invariant: R2Pair,
    pub gauge_broken: R2Pair,
}

impl TransferSeed {
    /// `Some(true)` when the invariant model loses less R² on the test cloud.
    pub fn invariant_wins(&self) -> Option<bool> {
        Some(self.gauge_invariant.drop()? < self.gauge_broken.drop()?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub manifold: ManifoldKind,
    pub n_train: usize,
    pub n_test: usize,
    pub seeds: Vec<TransferSeed>,
}

impl TransferReport {
    /// Seeds where the invariant model's drop is strictly smaller.
    pub fn invariant_wins(&self) -> usize {
        self.seeds
            .iter()
            .filter(|s| s.invariant_wins() == Some(true))
            .count()
    }
}

struct Split {
    graph: Graph,
    x: Mat,
    y: Mat,
    phi: SpectralEmbedding,
}

fn prepare(cfg: &TransferConfig, pc: &PointCloud, seed: u64) -> Result<Split> {
    let graph = knn_graph(pc, default_knn_k(pc.len()))?;
    let exact = exact_eigenmaps(&normalized_laplacian(&graph)?, None)?;
    let spec = ProjectionSpec::new(exact.dim(), cfg.r, rng::derive(seed, 0x7EA5));
    let phi = project_eigenmaps(&exact, &sample_projection(&spec)?)?;
    let y = match cfg.target {
        TransferTarget::Harmonic => harmonic_field(&pc.points),
        TransferTarget::Constant => Mat::filled(pc.len(), 1, 1.0),
    };
    Ok(Split {
        graph,
        x: cfg.features.extract(pc),
        y,
        phi,
    })
}

fn train_and_score(
    cfg: &TransferConfig,
    model: &ModelConfig,
    train: &Split,
    test: &Split,
) -> Result<R2Pair> {
    let targets = Targets::Values {
        rows: (0..train.graph.num_nodes()).collect(),
        y: train.y.clone(),
    };
    let (w, _) = fit(
        &train.graph,
        &train.x,
        &train.phi,
        model,
        &targets,
        cfg.optimizer,
        cfg.epochs,
    )?;
    let fit_train = predict(&train.graph, &train.x, &train.phi, model, &w)?;
    let fit_test = predict(&test.graph, &test.x, &test.phi, model, &w)?;
    Ok(R2Pair {
        train: r_squared(&fit_train, &train.y)?,
        test: r_squared(&fit_test, &test.y)?,
    })
}

/// Trains both models on the first `n_train` points of each seed's cloud
/// and scores them on all `n_test` points.
pub fn transfer_experiment(cfg: &TransferConfig) -> Result<TransferReport> {
    cfg.validate()?;
    let mut seeds = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let fine_pc = sample_manifold(cfg.manifold, cfg.n_test, seed)?;
        let fine = prepare(cfg, &fine_pc, seed)?;
        let coarse = if cfg.n_train == cfg.n_test {
            None
        } else {
            Some(prepare(cfg, &fine_pc.prefix(cfg.n_train), seed)?)
        };
        let coarse = coarse.as_ref().unwrap_or(&fine);
        let gi = cfg.model(Architecture::Gist, seed);
        let gb = cfg.model(Architecture::GaugeBroken, seed);
        seeds.push(TransferSeed {
            seed,
            gauge_invariant: train_and_score(cfg, &gi, coarse, &fine)?,
            gauge_broken: train_and_score(cfg, &gb, coarse, &fine)?,
        });
    }
    Ok(TransferReport {
        manifold: cfg.manifold,
        n_train: cfg.n_train,
        n_test: cfg.n_test,
        seeds,
    })
}
