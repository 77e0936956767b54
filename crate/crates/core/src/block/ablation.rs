use alloc::string::String;
use alloc::vec::Vec;

use super::{fit, predict, train::accuracy, ModelConfig, Targets};
use crate::autodiff::Optimizer;
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::linalg::{mean, std_dev};
use crate::spectral::fastrp_embed;

/// Row names and the branch each one removes.
pub const ABLATIONS: [(&str, Option<usize>); 4] = [
    ("none", None),
    ("branch1_feature", Some(0)),
    ("branch2_local", Some(1)),
    ("branch3_global", Some(2)),
];

#[derive(Debug, Clone, PartialEq)]
pub struct AblationSetup {
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub ablation: String,
    /// Mean over seeds of test accuracy as a percentage of the same seed's
    /// unablated accuracy.
    pub accuracy: f64,
    pub std: f64,
    /// `accuracy − 100`.
    pub delta: f64,
    /// Mean raw test accuracy in `[0, 1]`.
    pub raw_accuracy: f64,
    pub per_seed: Vec<f64>,
}

/// Trains the full model and each single-branch removal with the same seeds,
/// embeddings and hyperparameters, and scores test accuracy.
pub fn run_ablation(
    g: &Graph,
    x: &FeatureMatrix,
    labels: &[usize],
    cfg: &ModelConfig,
    setup: &AblationSetup,
) -> Result<Vec<AblationRow>> {
    if labels.len() != g.num_nodes() {
        return Err(Error::Invalid("one label per node expected".into()));
    }
    if setup.seeds.is_empty() {
        return Err(Error::Invalid("ablation needs at least one seed".into()));
    }
    let targets = Targets::Classes(setup.train_rows.iter().map(|&r| (r, labels[r])).collect());
    let mut raw = alloc::vec![Vec::new(); ABLATIONS.len()];
    for &seed in &setup.seeds {
        let phi = fastrp_embed(g, cfg.embed_dim, cfg.fastrp_k, seed)?;
        for (a, (_, removed)) in ABLATIONS.iter().enumerate() {
            let mut c = cfg.clone();
            c.seed = seed;
            if let Some(b) = removed {
                c.enabled_branches[*b] = false;
            }
            let (w, _) = fit(g, x, &phi, &c, &targets, setup.optimizer, setup.epochs)?;
            let pred = predict(g, x, &phi, &c, &w)?;
            raw[a].push(accuracy(&pred, labels, &setup.test_rows));
        }
    }
    let base = raw[0].clone();
    Ok(ABLATIONS
        .iter()
        .zip(&raw)
        .map(|((name, _), accs)| {
            let pct: Vec<f64> = accs
                .iter()
                .zip(&base)
                .map(|(a, b)| if *b > 0.0 { 100.0 * a / b } else { 0.0 })
                .collect();
            let m = mean(&pct);
            AblationRow {
                ablation: (*name).into(),
                accuracy: m,
                std: std_dev(&pct),
                delta: m - 100.0,
                raw_accuracy: mean(accs),
                per_seed: accs.clone(),
            }
        })
        .collect())
}
