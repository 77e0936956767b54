//! The ten acceptance criteria, run in sequence so the timing criterion has
//! the machine to itself. Prints one PASS/FAIL line per criterion.

use std::process::Command;
use std::time::Instant;

use gist::report::ablation_csv;
use gist_core::attention::{linear_attention, FeatureMap, DEFAULT_EPS};
use gist_core::autodiff::{
    finite_difference_sweep, loss_and_grad, GradientReport, Objective, Tape, Var,
};
use gist_core::block::{HeadConfig, ModelConfig, ModelObjective, ModelWeights, Targets, Task};
use gist_core::graph::normalized_laplacian;
use gist_core::manifold::{
    discretization_mismatch, transfer_experiment, ManifoldKind, MismatchConfig, TransferConfig,
};
use gist_core::spectral::{exact_eigenmaps, fastrp_embed};
use gist_core::synthetic::random_connected_graph;
use gist_core::tasks::{
    ablate, ablation_config, ablation_task, run_sweep, sweep_config, sweep_task, SweepParam,
    TrainSetup,
};
use gist_core::verify::{gauge_suite, jl_suite, GaugeSuiteConfig, GraphSource, JlSuiteConfig};
use gist_core::{rng, Graph, Mat, Result};
use rand::Rng;

#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

type Criterion = (&'static str, fn() -> Result<Outcome>);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

// ---------------------------------------------------------------- oracles

/// Least-squares slope of `ln y` against `ln x`.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Spearman ρ as the Pearson correlation of average ranks.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|a| {
                let below = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                below + (equal - 1.0) / 2.0
            })
            .collect()
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// Attention with the full `N × N` kernel built entry by entry.
fn quadratic_attention(q: &Mat, k: &Mat, v: &Mat, fm: FeatureMap, eps: f64) -> Vec<Vec<f64>> {
    let f = |x: f64| match fm {
        FeatureMap::Relu => x.max(0.0),
        FeatureMap::EluPlusOne => {
            if x > 0.0 {
                x + 1.0
            } else {
                x.exp()
            }
        }
    };
    (0..q.rows())
        .map(|i| {
            let kappa: Vec<f64> = (0..k.rows())
                .map(|j| (0..q.cols()).map(|c| f(q[(i, c)]) * f(k[(j, c)])).sum())
                .collect();
            let z: f64 = kappa.iter().sum::<f64>() + eps;
            (0..v.cols())
                .map(|c| (0..k.rows()).map(|j| kappa[j] * v[(j, c)]).sum::<f64>() / z)
                .collect()
        })
        .collect()
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, p);
        inv.swap(col, p);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[r][j] -= f * a[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    inv
}

/// Resistance distances of the normalized Laplacian `I − D^{-1/2} A D^{-1/2}`
/// of a connected graph: `L⁺ = (L + uuᵀ)⁻¹ − uuᵀ` with `u ∝ D^{1/2} 1`.
fn resistance_oracle(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.num_nodes();
    let deg: Vec<f64> = (0..n).map(|i| g.degree(i) as f64).collect();
    let vol: f64 = deg.iter().sum();
    let u: Vec<f64> = deg.iter().map(|d| (d / vol).sqrt()).collect();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 1.0;
        for &j in g.neighbors(i) {
            m[i][j] -= 1.0 / (deg[i] * deg[j]).sqrt();
        }
    }
    for i in 0..n {
        for j in 0..n {
            m[i][j] += u[i] * u[j];
        }
    }
    let mut p = invert(m);
    for i in 0..n {
        for j in 0..n {
            p[i][j] -= u[i] * u[j];
        }
    }
    (0..n)
        .map(|i| (0..n).map(|j| p[i][i] + p[j][j] - 2.0 * p[i][j]).collect())
        .collect()
}

// ------------------------------------------------------------- criteria

fn gauge_invariance() -> Result<Outcome> {
    let mut cfg = GaugeSuiteConfig::new(
        GraphSource::Random {
            max_nodes: 64,
            p: 0.15,
        },
        50,
        2024,
    );
    cfg.tol = 1e-10;
    let rep = gauge_suite(&cfg)?;
    let graphs: std::collections::BTreeSet<usize> = rep.trials.iter().map(|t| t.trial).collect();
    let degenerate = rep.trials.iter().filter(|t| t.max_multiplicity > 1).count();
    let ok = rep.passed() && graphs.len() == 50 && rep.trials.iter().all(|t| t.nodes <= 64);
    Ok(outcome(
        ok && rep.max_deviation() <= 1e-10,
        format!(
            "{} graphs, {} gauge draws ({} on degenerate spectra), attention {:.2e}, block {:.2e}",
            graphs.len(),
            rep.trials.len(),
            degenerate,
            rep.max_attention_deviation(),
            rep.max_block_deviation()
        ),
    ))
}

fn jl_preservation() -> Result<Outcome> {
    let cfg = JlSuiteConfig {
        nodes: vec![64, 256],
        eps: vec![0.3, 0.5],
        seeds: (0..20).collect(),
        ..Default::default()
    };
    let rep = jl_suite(&cfg)?;
    let dims_ok = rep
        .trials
        .iter()
        .all(|t| t.r == (8.0 * (t.nodes as f64).ln() / (t.eps * t.eps)).ceil() as usize);
    let pairs: usize = rep.trials.iter().map(|t| t.stats.pairs).sum();
    let within: f64 = rep
        .trials
        .iter()
        .map(|t| t.stats.fraction_within_eps * t.stats.pairs as f64)
        .sum();
    Ok(outcome(
        rep.trials.len() == 80 && dims_ok && rep.passed(),
        format!(
            "{} trials, worst trial {:.3} within ε, overall {:.4} (need ≥ 0.95 per trial)",
            rep.trials.len(),
            rep.min_fraction(),
            within / pairs as f64
        ),
    ))
}

fn attention_oracle() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut r = rng::seeded(33);
    let mut count = 0;
    for fm in [FeatureMap::Relu, FeatureMap::EluPlusOne] {
        for _ in 0..100 {
            let n = r.random_range(1..=64);
            let (dk, dv) = (r.random_range(1..=8), r.random_range(1..=6));
            let q = Mat::random_normal(n, dk, &mut r);
            let k = Mat::random_normal(n, dk, &mut r);
            let v = Mat::random_normal(n, dv, &mut r);
            let fast = linear_attention(&q, &k, &v, fm, DEFAULT_EPS)?;
            let slow = quadratic_attention(&q, &k, &v, fm, DEFAULT_EPS);
            for (i, row) in slow.iter().enumerate() {
                for (c, x) in row.iter().enumerate() {
                    worst = worst.max((fast[(i, c)] - x).abs());
                }
            }
            count += 1;
        }
    }
    Ok(outcome(
        worst <= 1e-10,
        format!("{count} instances over both feature maps, max |Δ| {worst:.2e}"),
    ))
}

fn resistance_identity() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut r = rng::seeded(44);
    for s in 0..20 {
        let n = r.random_range(4..=48);
        let g = random_connected_graph(n, 0.12, 400 + s)?;
        let phi = exact_eigenmaps(&normalized_laplacian(&g)?, None)?.data;
        let omega = resistance_oracle(&g);
        for i in 0..n {
            for j in 0..n {
                let d2: f64 = (0..phi.cols())
                    .map(|c| (phi[(i, c)] - phi[(j, c)]).powi(2))
                    .sum();
                worst = worst.max((d2 - omega[i][j]).abs());
            }
        }
    }
    Ok(outcome(
        worst <= 1e-8,
        format!("20 graphs, all pairs, max |‖φᵢ−φⱼ‖² − Ω| {worst:.2e}"),
    ))
}

struct Built<F>(F);

impl<F> Objective for Built<F>
where
    F: for<'g> Fn(&mut Tape<'g>, &[Var]) -> Result<Var>,
{
    fn loss<'g>(&'g self, tape: &mut Tape<'g>, params: &[Var]) -> Result<Var> {
        (self.0)(tape, params)
    }
}

/// `mse(graph_conv(p₀), y)`; the tape borrows the graph for the objective's
/// lifetime.
struct ConvLoss {
    g: Graph,
    y: Mat,
}

impl Objective for ConvLoss {
    fn loss<'g>(&'g self, tape: &mut Tape<'g>, params: &[Var]) -> Result<Var> {
        let c = tape.graph_conv(params[0], &self.g)?;
        tape.mse(c, &self.y)
    }
}

fn fd<O: Objective>(obj: &O, params: &[Mat]) -> Result<GradientReport> {
    let (_, grads) = loss_and_grad(obj, params)?;
    finite_difference_sweep(|p| loss_and_grad(obj, p).map(|r| r.0), params, &grads)
}

fn gradients() -> Result<Outcome> {
    let m = |r: usize, c: usize, s: u64| Mat::random_normal(r, c, &mut rng::seeded(s));
    let g = random_connected_graph(7, 0.3, 5)?;
    let target = |r: usize, c: usize| m(r, c, 999);
    type Case = (
        &'static str,
        Vec<Mat>,
        Box<dyn for<'g> Fn(&mut Tape<'g>, &[Var]) -> Result<Var>>,
    );
    let t53 = target(5, 3);
    let cases: Vec<Case> = vec![
        ("matmul", vec![m(5, 4, 1), m(4, 3, 2)], {
            let t = t53.clone();
            Box::new(move |tp, p| {
                let y = tp.matmul(p[0], p[1])?;
                tp.mse(y, &t)
            })
        }),
        ("t_matmul", vec![m(4, 5, 1), m(4, 3, 2)], {
            let t = t53.clone();
            Box::new(move |tp, p| {
                let y = tp.t_matmul(p[0], p[1])?;
                tp.mse(y, &t)
            })
        }),
        ("add/sub", vec![m(5, 3, 1), m(5, 3, 2), m(5, 3, 3)], {
            let t = t53.clone();
            Box::new(move |tp, p| {
                let y = tp.add(p[0], p[1])?;
                let y = tp.sub(y, p[2])?;
                tp.mse(y, &t)
            })
        }),
        ("add_row", vec![m(5, 3, 1), m(1, 3, 2)], {
            let t = t53.clone();
            Box::new(move |tp, p| {
                let y = tp.add_row(p[0], p[1])?;
                tp.mse(y, &t)
            })
        }),
        ("scale", vec![m(5, 3, 1)], {
            let t = t53.clone();
            Box::new(move |tp, p| {
                let y = tp.scale(p[0], -1.7);
                tp.mse(y, &t)
            })
        }),
        ("relu", vec![m(5, 3, 1)], {
            let t = t53.clone();
            Box::new(move |tp, p| {
                let y = tp.relu(p[0]);
                tp.mse(y, &t)
            })
        }),
        ("elu_plus_one", vec![m(5, 3, 1)], {
            let t = t53.clone();
            Box::new(move |tp, p| {
                let y = tp.elu_plus_one(p[0]);
                tp.mse(y, &t)
            })
        }),
        ("concat/slice", vec![m(5, 2, 1), m(5, 2, 2)], {
            let t = t53.clone();
            Box::new(move |tp, p| {
                let c = tp.concat_cols(&[p[0], p[1]])?;
                let y = tp.slice_cols(c, 1, 4)?;
                tp.mse(y, &t)
            })
        }),
        ("select_rows", vec![m(8, 3, 1)], {
            let t = t53.clone();
            Box::new(move |tp, p| {
                let y = tp.select_rows(p[0], &[7, 0, 3, 3, 5])?;
                tp.mse(y, &t)
            })
        }),
        (
            "sum",
            vec![m(5, 3, 1)],
            Box::new(|tp, p| {
                let s = tp.sum(p[0]);
                tp.mse(s, &Mat::filled(1, 1, 0.3))
            }),
        ),
        ("row_scale", vec![m(5, 3, 1), m(5, 1, 2)], {
            let t = t53.clone();
            Box::new(move |tp, p| {
                let y = tp.row_scale(p[0], p[1])?;
                tp.mse(y, &t)
            })
        }),
        ("recip_add_eps", vec![m(5, 3, 1).map(|x| x.abs() + 0.5)], {
            let t = t53.clone();
            Box::new(move |tp, p| {
                let y = tp.recip_add_eps(p[0], 1e-3);
                tp.mse(y, &t)
            })
        }),
        ("arccos_kernel", vec![m(6, 3, 1)], {
            let t = target(6, 6);
            Box::new(move |tp, p| {
                let y = tp.arccos_kernel(p[0]);
                tp.mse(y, &t)
            })
        }),
        (
            "kernel_attention",
            vec![m(6, 6, 1).map(f64::abs), m(6, 2, 2)],
            {
                let t = target(6, 2);
                Box::new(move |tp, p| {
                    let y = tp.kernel_attention(p[0], p[1], DEFAULT_EPS)?;
                    tp.mse(y, &t)
                })
            },
        ),
        (
            "linear_attention relu",
            vec![m(6, 4, 1), m(6, 4, 2), m(6, 3, 3)],
            {
                let t = target(6, 3);
                Box::new(move |tp, p| {
                    let y = tp.linear_attention(p[0], p[1], p[2], FeatureMap::Relu, DEFAULT_EPS)?;
                    tp.mse(y, &t)
                })
            },
        ),
        (
            "linear_attention elu+1",
            vec![m(6, 4, 1), m(6, 4, 2), m(6, 3, 3)],
            {
                let t = target(6, 3);
                Box::new(move |tp, p| {
                    let y =
                        tp.linear_attention(p[0], p[1], p[2], FeatureMap::EluPlusOne, DEFAULT_EPS)?;
                    tp.mse(y, &t)
                })
            },
        ),
        (
            "cross_entropy",
            vec![m(5, 4, 1)],
            Box::new(|tp, p| tp.cross_entropy(p[0], &[(0, 1), (1, 3), (2, 0), (4, 2)])),
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut worst_name = "";
    let mut kinks = 0;
    for (name, params, build) in cases {
        let r = fd(&Built(build), &params)?;
        kinks += r.kinks;
        if r.max_error() >= worst {
            worst = r.max_error();
            worst_name = name;
        }
    }
    let conv = fd(
        &ConvLoss {
            g: g.clone(),
            y: target(7, 3),
        },
        &[m(7, 3, 1)],
    )?;
    if conv.max_error() >= worst {
        worst = conv.max_error();
        worst_name = "graph_conv";
    }
    // full single-block models on both attention paths and both heads
    let g = random_connected_graph(10, 0.3, 6)?;
    let x = m(10, 3, 7);
    let mut model_worst: f64 = 0.0;
    let exact = exact_eigenmaps(&normalized_laplacian(&g)?, None)?;
    let fastrp = fastrp_embed(&g, 5, 2, 8)?;
    for (phi, task) in [
        (&exact, Task::NodeClassification),
        (&fastrp, Task::NodeClassification),
        (&exact, Task::NodeRegression),
        (&fastrp, Task::NodeRegression),
    ] {
        let mut cfg = ModelConfig::new(
            3,
            4,
            phi.dim(),
            HeadConfig {
                output_dim: 2,
                task,
            },
        );
        cfg.num_blocks = 1;
        cfg.seed = 9;
        let w = ModelWeights::init(&cfg)?;
        let targets = match task {
            Task::NodeClassification => Targets::Classes((0..10).map(|i| (i, i % 2)).collect()),
            Task::NodeRegression => Targets::Values {
                rows: vec![0, 2, 4, 6, 8],
                y: target(5, 2),
            },
        };
        let obj = ModelObjective {
            g: &g,
            x: &x,
            phi,
            cfg: &cfg,
            targets: &targets,
        };
        let r = fd(&obj, &w.tensors)?;
        kinks += r.kinks;
        model_worst = model_worst.max(r.max_error());
    }
    Ok(outcome(
        worst <= 1e-4 && model_worst <= 1e-4,
        format!(
            "primitives max rel err {worst:.2e} ({worst_name}), single-block models {model_worst:.2e}, {kinks} kink probes skipped"
        ),
    ))
}

fn linear_scaling() -> Result<Outcome> {
    let o = Command::new(env!("CARGO_BIN_EXE_gist"))
        .args([
            "bench",
            "--n",
            "4096,8192,16384,32768,65536,131072",
            "--d",
            "64",
            "--r",
            "64",
            "--k",
            "8",
        ])
        .output()
        .expect("bench runs");
    if o.status.code() != Some(0) {
        return Ok(outcome(
            false,
            String::from_utf8_lossy(&o.stderr).into_owned(),
        ));
    }
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    let (n, t): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
    let slope = loglog_slope(&n, &t);
    let times: Vec<String> = rows.iter().map(|(n, t)| format!("{n}:{t:.3}s")).collect();
    Ok(outcome(
        rows.len() == 6 && slope <= 1.15,
        format!("slope {slope:.3} over {}", times.join(" ")),
    ))
}

fn sphere_mismatch() -> Result<Outcome> {
    let cfg = MismatchConfig::new(
        ManifoldKind::Sphere,
        vec![250, 500, 1000, 2000, 4000],
        (0..5).collect(),
    );
    let rep = discretization_mismatch(&cfg)?;
    let ns: Vec<f64> = rep.exact.stats.iter().map(|s| s.n as f64).collect();
    let means: Vec<f64> = rep.exact.stats.iter().map(|s| s.mean).collect();
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let slope = loglog_slope(&ns, &means);
    let listed: Vec<String> = rep
        .exact
        .stats
        .iter()
        .map(|s| format!("{}:{:.5}", s.n, s.mean))
        .collect();
    Ok(outcome(
        ns.len() == 4 && decreasing && slope < 0.0,
        format!(
            "{}, slope {slope:.3} (theoretical {:.3})",
            listed.join(" "),
            rep.theoretical_slope
        ),
    ))
}

fn transfer_ordering() -> Result<Outcome> {
    let cfg = TransferConfig::new(ManifoldKind::Sphere, 500, 2000, (0..10).collect());
    let rep = transfer_experiment(&cfg)?;
    let wins = rep
        .seeds
        .iter()
        .filter(
            |s| match (s.gauge_invariant.drop(), s.gauge_broken.drop()) {
                (Some(a), Some(b)) => a < b,
                _ => false,
            },
        )
        .count();
    let mean = |f: &dyn Fn(&gist_core::manifold::TransferSeed) -> Option<f64>| {
        let v: Vec<f64> = rep.seeds.iter().filter_map(f).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    Ok(outcome(
        wins >= 8,
        format!(
            "invariant drop smaller in {wins}/10 seeds; mean drop invariant {:.4}, broken {:.4}",
            mean(&|s| s.gauge_invariant.drop()),
            mean(&|s| s.gauge_broken.drop())
        ),
    ))
}

fn sweep_trend() -> Result<Outcome> {
    let task = sweep_task(0)?;
    let setup = TrainSetup {
        epochs: 100,
        seeds: (0..10).collect(),
        ..Default::default()
    };
    let values = [8, 32, 128, 256];
    let rows = run_sweep(&task, &sweep_config(&task), SweepParam::R, &values, &setup)?;
    let x: Vec<f64> = rows.iter().map(|r| r.value as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let rho = spearman(&x, &y);
    let listed: Vec<String> = rows
        .iter()
        .map(|r| format!("{}:{:.3}", r.value, r.mean))
        .collect();
    Ok(outcome(
        rows.len() == 4 && rho >= 0.0,
        format!("{}, Spearman ρ {rho:.3}", listed.join(" ")),
    ))
}

fn ablation_trend() -> Result<Outcome> {
    let task = ablation_task(0)?;
    let setup = TrainSetup {
        epochs: 150,
        seeds: (0..10).collect(),
        ..Default::default()
    };
    let rows = ablate(&task, &ablation_config(&task), &setup)?;
    let full = rows[0].raw_accuracy;
    let each_lower = rows[1..].iter().all(|r| r.raw_accuracy <= full);
    let seeds_ok = rows.iter().all(|r| r.per_seed.len() == 10);
    let csv = ablation_csv(&rows, &[("seeds".into(), "0..10".into())]);
    let lines: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    let names: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    let shape_ok = lines[0].starts_with("ablation,accuracy")
        && names == ["none", "branch1_feature", "branch2_local", "branch3_global"];
    let listed: Vec<String> = rows
        .iter()
        .map(|r| format!("{}:{:.3}", r.ablation, r.raw_accuracy))
        .collect();
    Ok(outcome(
        each_lower && seeds_ok && shape_ok,
        format!(
            "{}; 4-row CSV {}",
            listed.join(" "),
            if shape_ok { "ok" } else { "malformed" }
        ),
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("exact gauge invariance", gauge_invariance),
        ("JL inner-product preservation", jl_preservation),
        ("linear vs quadratic attention", attention_oracle),
        ("eigenmap/resistance identity", resistance_identity),
        ("gradient correctness", gradients),
        ("linear scaling", linear_scaling),
        ("sphere mismatch decay", sphere_mismatch),
        ("transfer ordering", transfer_ordering),
        ("sweep trend", sweep_trend),
        ("ablation trend", ablation_trend),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        let secs = t.elapsed().as_secs_f64();
        println!(
            "{} {:>2} {name}: {} [{secs:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
        if !o.passed {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
