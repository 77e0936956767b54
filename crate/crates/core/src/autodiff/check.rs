use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng;

/// Tensors with more entries than this are checked along random directions.
const PROBE_THRESHOLD: usize = 1000;
const PROBES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub h: f64,
    /// Max relative error per parameter tensor, kinks excluded.
    pub max_rel_err: Vec<f64>,
    /// Coordinates or probes whose one-sided slopes disagree (a kink).
    pub kinks: usize,
    pub checked: usize,
}

impl GradientReport {
    pub fn max_error(&self) -> f64 {
        self.max_rel_err.iter().copied().fold(0.0, f64::max)
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central differences of `f` against `grads`. A probe counts as a kink
/// when its forward and backward slopes disagree by more than 5%.
pub fn finite_difference_check<F>(
    mut f: F,
    params: &[Mat],
    grads: &[Mat],
    h: f64,
) -> Result<GradientReport>
where
    F: FnMut(&[Mat]) -> Result<f64>,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Invalid("finite-difference step must be > 0".into()));
    }
    if params.len() != grads.len() {
        return Err(Error::Invalid("one gradient per parameter expected".into()));
    }
    let f0 = f(params)?;
    let mut work: Vec<Mat> = params.to_vec();
    let mut report = GradientReport {
        h,
        max_rel_err: Vec::with_capacity(params.len()),
        kinks: 0,
        checked: 0,
    };
    for (p, g) in grads.iter().enumerate() {
        let len = params[p].as_slice().len();
        let directions: Vec<Vec<(usize, f64)>> = if len > PROBE_THRESHOLD {
            let mut rng = rng::stream(0x5eed, p as u64);
            (0..PROBES)
                .map(|_| {
                    let d: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let norm = libm::sqrt(d.iter().map(|x| x * x).sum::<f64>());
                    d.into_iter()
                        .enumerate()
                        .map(|(i, x)| (i, x / norm))
                        .collect()
                })
                .collect()
        } else {
            (0..len).map(|i| alloc::vec![(i, 1.0)]).collect()
        };
        let mut worst: f64 = 0.0;
        for dir in &directions {
            let analytic: f64 = dir.iter().map(|&(i, w)| w * g.as_slice()[i]).sum();
            let mut eval = |step: f64, work: &mut Vec<Mat>| -> Result<f64> {
                for &(i, w) in dir {
                    work[p].as_mut_slice()[i] = params[p].as_slice()[i] + step * w;
                }
                let v = f(work);
                for &(i, _) in dir {
                    work[p].as_mut_slice()[i] = params[p].as_slice()[i];
                }
                v
            };
            let fp = eval(h, &mut work)?;
            let fm = eval(-h, &mut work)?;
            let (fwd, bwd) = ((fp - f0) / h, (f0 - fm) / h);
            let jump = (fwd - bwd).abs();
            if jump > 0.05 * fwd.abs().max(bwd.abs()) && jump > 100.0 * h {
                report.kinks += 1;
                continue;
            }
            report.checked += 1;
            worst = worst.max(rel_err(analytic, (fp - fm) / (2.0 * h)));
        }
        report.max_rel_err.push(worst);
    }
    Ok(report)
}

/// Runs [`finite_difference_check`] at `h ∈ {1e-4, 1e-5, 1e-6}` and keeps
/// the report with the smallest error.
pub fn finite_difference_sweep<F>(mut f: F, params: &[Mat], grads: &[Mat]) -> Result<GradientReport>
where
    F: FnMut(&[Mat]) -> Result<f64>,
{
    let mut best: Option<GradientReport> = None;
    for h in [1e-4, 1e-5, 1e-6] {
        let r = finite_difference_check(&mut f, params, grads, h)?;
        if best.as_ref().is_none_or(|b| r.max_error() < b.max_error()) {
            best = Some(r);
        }
    }
    Ok(best.expect("three step sizes"))
}
