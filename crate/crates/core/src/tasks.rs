//! Toy node-classification tasks and the sweep and ablation drivers built on
//! them.

use alloc::vec::Vec;

use crate::autodiff::Optimizer;
use crate::block::{
    accuracy, fit, predict, run_ablation, AblationRow, AblationSetup, HeadConfig, ModelConfig,
    Targets, Task,
};
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::linalg::{mean, std_dev, Mat};
use crate::rng;
use crate::spectral::fastrp_embed;
use crate::synthetic::{label_features, stochastic_block_model, train_test_split};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, PartialEq)]
pub struct NodeTask {
    pub graph: Graph,
    pub x: FeatureMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

impl NodeTask {
    pub fn train_targets(&self) -> Targets {
        Targets::Classes(
            self.train_rows
                .iter()
                .map(|&r| (r, self.labels[r]))
                .collect(),
        )
    }
}

/// Planted communities with noisy label-indicator features.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityTaskSpec {
    pub communities: usize,
    pub community_size: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub signal: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for CommunityTaskSpec {
    fn default() -> Self {
        Self {
            communities: 4,
            community_size: 50,
            p_in: 0.12,
            p_out: 0.02,
            feature_dim: 8,
            signal: 0.6,
            train_fraction: 0.5,
            seed: 0,
        }
    }
}

pub fn community_task(spec: &CommunityTaskSpec) -> Result<NodeTask> {
    if spec.communities < 2 || spec.community_size == 0 || spec.feature_dim == 0 {
        return Err(Error::Invalid(
            "need ≥ 2 non-empty communities and features".into(),
        ));
    }
    let sizes = alloc::vec![spec.community_size; spec.communities];
    let (graph, labels) = stochastic_block_model(&sizes, spec.p_in, spec.p_out, spec.seed)?;
    let x = label_features(
        &labels,
        spec.feature_dim,
        spec.signal,
        rng::derive(spec.seed, 1),
    );
    let (train_rows, test_rows) =
        train_test_split(labels.len(), spec.train_fraction, rng::derive(spec.seed, 2));
    Ok(NodeTask {
        graph,
        x,
        labels,
        num_classes: spec.communities,
        train_rows,
        test_rows,
    })
}

/// Community task whose class also encodes a neighbourhood vote and a
/// node-level parity: `label = 4·community + 2·m + (b₀ ⊕ b₁ ⊕ b₂)`.
///
/// Four `±1` columns with Gaussian jitter `bit_noise` are appended: the
/// node's own bits `b₀, b₁, b₂` and a vote `u`. `m` is set when the vote summed
/// over the node's neighbours, plus half the node's own vote, is positive.
pub fn branch_task(spec: &CommunityTaskSpec, bit_noise: f64) -> Result<NodeTask> {
    let mut task = community_task(spec)?;
    let mut rng = rng::seeded(rng::derive(spec.seed, 3));
    let n = task.labels.len();
    let d = task.x.cols();
    let bits: Vec<[bool; 4]> = (0..n)
        .map(|_| core::array::from_fn(|_| rng.random()))
        .collect();
    let sign = |b: bool| if b { 1.0 } else { -1.0 };
    let mut x = Mat::zeros(n, d + 4);
    for i in 0..n {
        let row = x.row_mut(i);
        row[..d].copy_from_slice(task.x.row(i));
        for b in 0..4 {
            let z: f64 = StandardNormal.sample(&mut rng);
            row[d + b] = sign(bits[i][b]) + bit_noise * z;
        }
        let vote: f64 = task
            .graph
            .neighbors(i)
            .iter()
            .map(|&j| sign(bits[j][3]))
            .sum::<f64>()
            + 0.5 * sign(bits[i][3]);
        let parity = bits[i][..3].iter().filter(|b| **b).count() % 2;
        task.labels[i] = 4 * task.labels[i] + 2 * usize::from(vote > 0.0) + parity;
    }
    task.x = x;
    task.num_classes *= 4;
    Ok(task)
}

/// Two dense communities, clear features, every node in the training set.
pub fn two_community_task(seed: u64) -> Result<NodeTask> {
    let mut task = community_task(&CommunityTaskSpec {
        communities: 2,
        community_size: 30,
        p_in: 0.3,
        p_out: 0.03,
        feature_dim: 4,
        signal: 1.0,
        train_fraction: 1.0,
        seed,
    })?;
    task.test_rows = task.train_rows.clone();
    Ok(task)
}

/// Four sparse-boundary communities with weak features; the r sweep task.
pub fn sweep_task(seed: u64) -> Result<NodeTask> {
    community_task(&CommunityTaskSpec {
        communities: 4,
        community_size: 100,
        p_in: 0.08,
        p_out: 0.002,
        feature_dim: 4,
        signal: 0.5,
        train_fraction: 0.5,
        seed,
    })
}

pub fn sweep_config(task: &NodeTask) -> ModelConfig {
    toy_config(task, 16, 32, 3)
}

/// Eight-class [`branch_task`] on two communities of 500 nodes; the ablation
/// task.
pub fn ablation_task(seed: u64) -> Result<NodeTask> {
    branch_task(
        &CommunityTaskSpec {
            communities: 2,
            community_size: 500,
            p_in: 0.02,
            p_out: 0.0004,
            feature_dim: 2,
            signal: 0.5,
            train_fraction: 0.5,
            seed,
        },
        0.3,
    )
}

pub fn ablation_config(task: &NodeTask) -> ModelConfig {
    toy_config(task, 6, 128, 3)
}

/// Classifier sized for `task`.
pub fn toy_config(task: &NodeTask, hidden_dim: usize, r: usize, k: usize) -> ModelConfig {
    let head = HeadConfig {
        output_dim: task.num_classes,
        task: Task::NodeClassification,
    };
    let mut cfg = ModelConfig::new(task.x.cols(), hidden_dim, r, head);
    cfg.fastrp_k = k;
    cfg
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSetup {
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub seeds: Vec<u64>,
}

impl Default for TrainSetup {
    fn default() -> Self {
        Self {
            epochs: 100,
            optimizer: Optimizer::default(),
            seeds: (0..5).collect(),
        }
    }
}

/// Test accuracy per seed. Each seed fixes both the FastRP projection and
/// the weight initialization.
pub fn evaluate(task: &NodeTask, cfg: &ModelConfig, setup: &TrainSetup) -> Result<Vec<f64>> {
    let targets = task.train_targets();
    setup
        .seeds
        .iter()
        .map(|&seed| {
            let phi = fastrp_embed(&task.graph, cfg.embed_dim, cfg.fastrp_k, seed)?;
            let mut c = cfg.clone();
            c.seed = seed;
            let (w, _) = fit(
                &task.graph,
                &task.x,
                &phi,
                &c,
                &targets,
                setup.optimizer,
                setup.epochs,
            )?;
            let pred = predict(&task.graph, &task.x, &phi, &c, &w)?;
            Ok(accuracy(&pred, &task.labels, &task.test_rows))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// FastRP propagation depth.
    K,
    /// Embedding width.
    R,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::R => "r",
        }
    }
}

impl core::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(SweepParam::K),
            "r" => Ok(SweepParam::R),
            other => Err(Error::Invalid(alloc::format!(
                "unknown sweep parameter {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: usize,
    pub mean: f64,
    pub std: f64,
    pub per_seed: Vec<f64>,
}

pub fn run_sweep(
    task: &NodeTask,
    base: &ModelConfig,
    param: SweepParam,
    values: &[usize],
    setup: &TrainSetup,
) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&value| {
            let mut cfg = base.clone();
            match param {
                SweepParam::K => cfg.fastrp_k = value,
                SweepParam::R => cfg.embed_dim = value,
            }
            let per_seed = evaluate(task, &cfg, setup)?;
            Ok(SweepRow {
                value,
                mean: mean(&per_seed),
                std: std_dev(&per_seed),
                per_seed,
            })
        })
        .collect()
}

pub fn ablate(task: &NodeTask, cfg: &ModelConfig, setup: &TrainSetup) -> Result<Vec<AblationRow>> {
    run_ablation(
        &task.graph,
        &task.x,
        &task.labels,
        cfg,
        &AblationSetup {
            train_rows: task.train_rows.clone(),
            test_rows: task.test_rows.clone(),
            epochs: setup.epochs,
            optimizer: setup.optimizer,
            seeds: setup.seeds.clone(),
        },
    )
}
