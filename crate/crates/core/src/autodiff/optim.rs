use alloc::vec::Vec;

use super::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// A scalar loss built on a fresh tape from parameter leaves.
pub trait Objective {
    fn loss<'g>(&'g self, tape: &mut Tape<'g>, params: &[Var]) -> Result<Var>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl Optimizer {
    pub fn sgd(lr: f64) -> Self {
        Optimizer::Sgd { lr }
    }

    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam(1e-2)
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub optimizer: Optimizer,
    m: Vec<Mat>,
    v: Vec<Mat>,
    t: i32,
}

impl OptimizerState {
    pub fn new(optimizer: Optimizer, params: &[Mat]) -> Self {
        let zeros = |p: &Mat| Mat::zeros(p.rows(), p.cols());
        Self {
            optimizer,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [Mat], grads: &[Mat]) {
        self.t += 1;
        match self.optimizer {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    p.axpy(-lr, g);
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                let c1 = 1.0 - libm::pow(beta1, self.t as f64);
                let c2 = 1.0 - libm::pow(beta2, self.t as f64);
                for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let m = self.m[k].as_mut_slice();
                    let v = self.v[k].as_mut_slice();
                    for (i, (w, gi)) in p.as_mut_slice().iter_mut().zip(g.as_slice()).enumerate() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                        *w -= lr * (m[i] / c1) / (libm::sqrt(v[i] / c2) + eps);
                    }
                }
            }
        }
    }
}

/// Loss value and one gradient per parameter.
pub fn loss_and_grad<O: Objective + ?Sized>(
    objective: &O,
    params: &[Mat],
) -> Result<(f64, Vec<Mat>)> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let loss = objective.loss(&mut tape, &vars)?;
    let value = tape.value(loss)[(0, 0)];
    let grads = tape.backward(loss)?;
    let out = vars
        .iter()
        .zip(params)
        .map(|(v, p)| grads.get_or_zeros(*v, p))
        .collect();
    Ok((value, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Loss at the start of each epoch, before that epoch's update.
    pub loss_curve: Vec<f64>,
    pub final_loss: f64,
}

/// Full-batch training. Errors with the epoch index if the loss or a
/// gradient stops being finite.
pub fn train<O: Objective + ?Sized>(
    objective: &O,
    params: &mut [Mat],
    optimizer: Optimizer,
    epochs: usize,
) -> Result<TrainReport> {
    let mut state = OptimizerState::new(optimizer, params);
    let mut curve = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (loss, grads) = loss_and_grad(objective, params)?;
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        curve.push(loss);
        state.step(params, &grads);
    }
    let (final_loss, _) = loss_and_grad(objective, params)?;
    if !final_loss.is_finite() {
        return Err(Error::Diverged { epoch: epochs });
    }
    Ok(TrainReport {
        loss_curve: curve,
        final_loss,
    })
}
