use alloc::vec::Vec;

use super::{forward, model_forward_with, Backend, ModelConfig, ModelWeights, Taped};
use crate::autodiff::{train, Objective, Optimizer, Tape, TrainReport, Var};
use crate::error::{shape_err, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::linalg::Mat;
use crate::spectral::SpectralEmbedding;

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// `(node, class)` pairs scored with softmax cross-entropy.
    Classes(Vec<(usize, usize)>),
    /// Rows of the prediction scored with mean squared error against `y`.
    Values { rows: Vec<usize>, y: Mat },
}

pub struct ModelObjective<'a> {
    pub g: &'a Graph,
    pub x: &'a FeatureMatrix,
    pub phi: &'a SpectralEmbedding,
    pub cfg: &'a ModelConfig,
    pub targets: &'a Targets,
}

impl Objective for ModelObjective<'_> {
    fn loss<'g>(&'g self, tape: &mut Tape<'g>, params: &[Var]) -> Result<Var> {
        let out = {
            let mut b = Taped::new(tape, self.g);
            let x = b.leaf(self.x.clone());
            let phi = b.leaf(self.phi.data.clone());
            forward(&mut b, self.cfg, params, &x, &phi, self.phi.source)?
        };
        match self.targets {
            Targets::Classes(t) => tape.cross_entropy(out, t),
            Targets::Values { rows, y } => {
                let sel = tape.select_rows(out, rows)?;
                tape.mse(sel, y)
            }
        }
    }
}

/// Initializes weights from `cfg.seed` and trains them full-batch.
pub fn fit(
    g: &Graph,
    x: &FeatureMatrix,
    phi: &SpectralEmbedding,
    cfg: &ModelConfig,
    targets: &Targets,
    optimizer: Optimizer,
    epochs: usize,
) -> Result<(ModelWeights, TrainReport)> {
    let mut weights = ModelWeights::init(cfg)?;
    // surface shape problems before the first gradient step
    model_forward_with(g, x, phi, cfg, &weights)?;
    let objective = ModelObjective {
        g,
        x,
        phi,
        cfg,
        targets,
    };
    let report = train(&objective, &mut weights.tensors, optimizer, epochs)?;
    Ok((weights, report))
}

pub fn predict(
    g: &Graph,
    x: &FeatureMatrix,
    phi: &SpectralEmbedding,
    cfg: &ModelConfig,
    weights: &ModelWeights,
) -> Result<Mat> {
    model_forward_with(g, x, phi, cfg, weights)
}

/// Fraction of `rows` whose argmax prediction equals the label.
pub fn accuracy(pred: &Mat, labels: &[usize], rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let hits = rows
        .iter()
        .filter(|&&r| {
            let row = pred.row(r);
            let best = (0..row.len()).fold(0, |b, c| if row[c] > row[b] { c } else { b });
            best == labels[r]
        })
        .count();
    hits as f64 / rows.len() as f64
}

/// Coefficient of determination over all entries, each column centered on
/// its own mean. `None` when the target has no variance.
pub fn r_squared(pred: &Mat, y: &Mat) -> Result<Option<f64>> {
    if pred.shape() != y.shape() {
        return Err(shape_err!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            y.shape()
        ));
    }
    let (n, c) = y.shape();
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for j in 0..c {
        let mean = (0..n).map(|i| y[(i, j)]).sum::<f64>() / n.max(1) as f64;
        for i in 0..n {
            let (res, dev) = (y[(i, j)] - pred[(i, j)], y[(i, j)] - mean);
            ss_res += res * res;
            ss_tot += dev * dev;
        }
    }
    Ok((ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot))
}
