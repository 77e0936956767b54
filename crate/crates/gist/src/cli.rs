//! The `gist` command line.
//!
//! Exit codes: 0 success, 1 verification failure or runtime error, 2 usage
//! or input error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use gist_core::autodiff::Optimizer;
use gist_core::block::{accuracy, fit, predict};
use gist_core::graph::normalized_laplacian;
use gist_core::manifold::{
    default_knn_k, discretization_mismatch, knn_graph, sample_manifold, transfer_experiment,
    ManifoldKind, MismatchConfig, TransferConfig, TransferFeatures, TransferTarget,
};
use gist_core::spectral::{
    exact_eigenmaps, fastrp_embed, project_eigenmaps, sample_projection, ProjectionSpec,
};
use gist_core::synthetic::random_connected_graph;
use gist_core::tasks::{
    ablate, ablation_config, ablation_task, run_sweep, sweep_config, sweep_task, toy_config,
    two_community_task, NodeTask, SweepParam, TrainSetup,
};
use gist_core::verify::{gauge_suite, jl_suite, GaugeSuiteConfig, GraphSource, JlSuiteConfig};
use gist_core::{Graph, Mat};

use crate::bench::{run_bench, time_slope, BenchConfig};
use crate::config::splice_config;
use crate::error::{Error, Result};
use crate::io::{embedding_bin, embedding_csv, load_graph, loss_curve_csv, write_atomic};
use crate::model_io::save_model;
use crate::report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Comma-separated list; for integers `a..b` expands to the half-open range.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

pub trait ListItem: FromStr + Sized {
    fn range(_a: &str, _b: &str) -> Option<Vec<Self>> {
        None
    }
}

macro_rules! int_item {
    ($($t:ty),*) => {$(
        impl ListItem for $t {
            fn range(a: &str, b: &str) -> Option<Vec<Self>> {
                Some((a.trim().parse::<$t>().ok()?..b.trim().parse::<$t>().ok()?).collect())
            }
        }
    )*};
}
int_item!(u64, usize);
impl ListItem for f64 {}

impl<T: ListItem> FromStr for List<T> {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.split_once("..") {
                Some((a, b)) => {
                    out.extend(T::range(a, b).ok_or_else(|| format!("bad range {part:?}"))?)
                }
                None => out.push(
                    part.parse()
                        .map_err(|_| format!("bad list item {part:?}"))?,
                ),
            }
        }
        if out.is_empty() {
            return Err("empty list".into());
        }
        Ok(List(out))
    }
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be ≥ 1".into()),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("not a count: {s:?}")),
    }
}

fn positive_list(s: &str) -> std::result::Result<List<usize>, String> {
    let l: List<usize> = s.parse()?;
    if l.0.contains(&0) {
        return Err("entries must be ≥ 1".into());
    }
    Ok(l)
}

fn manifold(s: &str) -> std::result::Result<ManifoldKind, String> {
    s.parse().map_err(|e: gist_core::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Bin,
}

#[derive(Debug, Parser)]
#[command(
    name = "gist",
    version,
    about = "Gauge-invariant spectral transformer toolkit"
)]
pub struct Cli {
    /// Flat key=value file; flags on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a spectral embedding of a graph.
    Embed(EmbedArgs),
    /// Check gauge invariance and inner-product preservation.
    VerifyGauge(VerifyArgs),
    /// Accuracy against FastRP depth or width on the toy task.
    Sweep(SweepArgs),
    /// Forward time and peak memory against graph size.
    Bench(BenchArgs),
    /// Kernel mismatch between resolutions of a sampled manifold.
    DiscVerify(DiscArgs),
    /// Coarse-to-fine transfer of invariant and positional-encoding models.
    Transfer(TransferArgs),
    /// Single-branch removal study on the toy task.
    Ablate(AblateArgs),
    /// Train a toy classifier and write its loss curve.
    Train(TrainArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedMethod {
    /// Iterated random projection.
    Fastrp,
    /// Exact eigenmaps projected to `r` dimensions.
    Projected,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EmbedArgs {
    /// Edge list, or an OFF mesh when the extension is `.off`.
    #[arg(long, conflicts_with = "manifold")]
    pub graph: Option<PathBuf>,
    /// Sample a manifold and embed its k-NN graph instead.
    #[arg(long, value_parser = manifold)]
    pub manifold: Option<ManifoldKind>,
    /// Points for --manifold, or nodes of a random graph when neither
    /// source is given.
    #[arg(long, value_parser = positive, default_value = "1000")]
    pub n: usize,
    #[arg(long, value_parser = positive, default_value = "64")]
    pub r: usize,
    #[arg(long, value_parser = positive, default_value = "3")]
    pub k: usize,
    #[arg(long, default_value = "0")]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "fastrp")]
    pub method: EmbedMethod,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct VerifyArgs {
    /// Fixed graph for every trial; otherwise random graphs are drawn.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Largest random graph, and the JL suite's node count.
    #[arg(long, value_parser = positive, default_value = "16")]
    pub n: usize,
    #[arg(long, value_parser = positive, default_value = "10")]
    pub trials: usize,
    /// Max-abs deviation allowed in the gauge suite.
    #[arg(long, default_value = "1e-10")]
    pub tol: f64,
    /// Edge probability of random graphs.
    #[arg(long, default_value = "0.2")]
    pub p: f64,
    #[arg(long, default_value = "0")]
    pub seed: u64,
    /// Distortions for the JL suite.
    #[arg(long, default_value = "0.3,0.5")]
    pub jl_eps: List<f64>,
    #[arg(long, default_value = "0..5")]
    pub jl_seeds: List<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SweepArgs {
    #[arg(long, value_parser = ["k", "r"], default_value = "r")]
    pub param: String,
    /// Defaults to 8,32,128,256 for r and 1,2,3,4,6,8 for k.
    #[arg(long, value_parser = positive_list)]
    pub values: Option<List<usize>>,
    #[arg(long, default_value = "0..5")]
    pub seeds: List<u64>,
    #[arg(long, value_parser = positive, default_value = "100")]
    pub epochs: usize,
    #[arg(long, default_value = "0")]
    pub task_seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct BenchArgs {
    #[arg(long, value_parser = positive_list, default_value = "4096,8192,16384,32768,65536,131072")]
    pub n: List<usize>,
    #[arg(long, value_parser = positive_list, default_value = "64")]
    pub d: List<usize>,
    #[arg(long, value_parser = positive, default_value = "64")]
    pub r: usize,
    #[arg(long, value_parser = positive, default_value = "8")]
    pub k: usize,
    #[arg(long, value_parser = positive, default_value = "3")]
    pub reps: usize,
    #[arg(long, default_value = "0")]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct DiscArgs {
    #[arg(long, value_parser = manifold, default_value = "sphere")]
    pub manifold: ManifoldKind,
    /// Ascending resolutions; the last is the reference.
    #[arg(long, value_parser = positive_list, default_value = "250,500,1000,2000,4000")]
    pub ns: List<usize>,
    #[arg(long, default_value = "0..5")]
    pub seeds: List<u64>,
    #[arg(long, value_parser = positive, default_value = "64")]
    pub r: usize,
    #[arg(long, value_parser = positive, default_value = "3")]
    pub k: usize,
    /// Kernel entries are compared on pairs of this many anchor points.
    #[arg(long, value_parser = positive, default_value = "60")]
    pub anchors: usize,
    /// Neighbours per point; defaults to a log-scaled choice per resolution.
    #[arg(long, value_parser = positive)]
    pub knn: Option<usize>,
    /// Skip the projected-eigenmap series.
    #[arg(long)]
    pub no_projected: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Harmonic,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeaturesArg {
    Coordinates,
    Height,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TransferArgs {
    #[arg(long, value_parser = manifold, default_value = "sphere")]
    pub manifold: ManifoldKind,
    /// Training points (a prefix of the test cloud).
    #[arg(long, value_parser = positive, default_value = "500")]
    pub n_train: usize,
    /// Test points.
    #[arg(long, value_parser = positive, default_value = "2000")]
    pub n: usize,
    #[arg(long, default_value = "0..10")]
    pub seeds: List<u64>,
    #[arg(long, value_parser = positive, default_value = "250")]
    pub epochs: usize,
    #[arg(long, value_parser = positive, default_value = "32")]
    pub r: usize,
    #[arg(long, value_parser = positive, default_value = "16")]
    pub hidden: usize,
    #[arg(long, value_enum, default_value = "harmonic")]
    pub target: TargetArg,
    #[arg(long, value_enum, default_value = "coordinates")]
    pub features: FeaturesArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct AblateArgs {
    #[arg(long, default_value = "0..10")]
    pub seeds: List<u64>,
    #[arg(long, value_parser = positive, default_value = "150")]
    pub epochs: usize,
    #[arg(long, default_value = "0")]
    pub task_seed: u64,
    #[arg(long, value_parser = positive, default_value = "128")]
    pub r: usize,
    #[arg(long, value_parser = positive, default_value = "3")]
    pub k: usize,
    #[arg(long, value_parser = positive, default_value = "6")]
    pub hidden: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    TwoCommunity,
    Sweep,
    Ablation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "two-community")]
    pub task: TaskArg,
    #[arg(long, default_value = "0")]
    pub task_seed: u64,
    #[arg(long, default_value = "0")]
    pub seed: u64,
    #[arg(long, value_parser = positive, default_value = "200")]
    pub epochs: usize,
    #[arg(long, value_parser = positive, default_value = "16")]
    pub r: usize,
    #[arg(long, value_parser = positive, default_value = "3")]
    pub k: usize,
    #[arg(long, value_parser = positive, default_value = "8")]
    pub hidden: usize,
    #[arg(long, value_enum, default_value = "adam")]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value = "0.01")]
    pub lr: f64,
    /// Loss curve CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also save the trained model here.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

/// Resolved arguments of the subcommand, defaults included, without output
/// paths.
fn resolved_config(m: &ArgMatches) -> Vec<(String, String)> {
    let Some((name, sub)) = m.subcommand() else {
        return Vec::new();
    };
    let mut out = vec![("command".to_string(), name.to_string())];
    for id in sub.ids() {
        let key = id.as_str();
        // derive-generated group ids are the struct names
        if matches!(key, "out" | "model" | "config" | "format")
            || key.starts_with(|c: char| c.is_ascii_uppercase())
        {
            continue;
        }
        if let Ok(Some(raw)) = sub.try_get_raw(key) {
            let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            if !vals.is_empty() {
                out.push((key.to_string(), vals.join(",")));
            }
        }
    }
    out
}

struct Io<'a> {
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Io<'_> {
    fn emit(&mut self, out: Option<&Path>, bytes: &[u8]) -> Result<()> {
        match out {
            Some(p) => write_atomic(p, bytes),
            None => self
                .stdout
                .write_all(bytes)
                .map_err(|e| Error::io("<stdout>", e)),
        }
    }

    fn note(&mut self, msg: std::fmt::Arguments<'_>) {
        let _ = writeln!(self.stderr, "{msg}");
    }
}

fn only(format: Format, allowed: &[Format], command: &str) -> Result<()> {
    if allowed.contains(&format) {
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "{command} cannot write {format:?} output"
        )))
    }
}

fn exit_code(e: &Error) -> i32 {
    use gist_core::Error as E;
    match e {
        Error::Usage(_) | Error::Io { .. } | Error::Format { .. } => EXIT_USAGE,
        Error::Core(
            E::Parse { .. }
            | E::NoEdges
            | E::NonTriangleFace { .. }
            | E::VertexOutOfRange { .. }
            | E::Invalid(_),
        ) => EXIT_USAGE,
        _ => EXIT_FAILED,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run(args: Vec<OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let mut io = Io { stdout, stderr };
    let args = match splice_config(args) {
        Ok(a) => a,
        Err(e) => {
            io.note(format_args!("error: {e}"));
            return EXIT_USAGE;
        }
    };
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = io.stderr.write_all(text.as_bytes());
            } else {
                let _ = io.stdout.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            io.note(format_args!("{e}"));
            return EXIT_USAGE;
        }
    };
    let config = resolved_config(&matches);
    match dispatch(cli.command, &config, &mut io) {
        Ok(code) => code,
        Err(e) => {
            io.note(format_args!("error: {e}"));
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, config: &[(String, String)], io: &mut Io<'_>) -> Result<i32> {
    match cmd {
        Command::Embed(a) => cmd_embed(a, config, io),
        Command::VerifyGauge(a) => cmd_verify_gauge(a, config, io),
        Command::Sweep(a) => cmd_sweep(a, config, io),
        Command::Bench(a) => cmd_bench(a, config, io),
        Command::DiscVerify(a) => cmd_disc_verify(a, config, io),
        Command::Transfer(a) => cmd_transfer(a, config, io),
        Command::Ablate(a) => cmd_ablate(a, config, io),
        Command::Train(a) => cmd_train(a, config, io),
    }
}

fn embed_graph(a: &EmbedArgs) -> Result<Graph> {
    if let Some(p) = &a.graph {
        return load_graph(p);
    }
    if let Some(kind) = a.manifold {
        let pc = sample_manifold(kind, a.n, a.seed)?;
        return Ok(knn_graph(&pc, default_knn_k(a.n))?);
    }
    Ok(random_connected_graph(a.n, 4.0 / a.n as f64, a.seed)?)
}

fn cmd_embed(a: EmbedArgs, config: &[(String, String)], io: &mut Io<'_>) -> Result<i32> {
    only(a.format, &[Format::Csv, Format::Bin, Format::Json], "embed")?;
    if a.format == Format::Bin && a.out.is_none() {
        return Err(Error::Usage("binary output needs --out".into()));
    }
    let g = embed_graph(&a)?;
    let t = Instant::now();
    let data: Mat = match a.method {
        EmbedMethod::Fastrp => fastrp_embed(&g, a.r, a.k, a.seed)?.data,
        EmbedMethod::Projected => {
            let exact = exact_eigenmaps(&normalized_laplacian(&g)?, None)?;
            let proj = sample_projection(&ProjectionSpec::new(exact.dim(), a.r, a.seed))?;
            project_eigenmaps(&exact, &proj)?.data
        }
    };
    io.note(format_args!(
        "embedded {} nodes into {} dimensions in {:.3}s",
        data.rows(),
        data.cols(),
        t.elapsed().as_secs_f64()
    ));
    let bytes = match a.format {
        Format::Bin => embedding_bin(&data),
        Format::Csv => embedding_csv(&data, config).into_bytes(),
        Format::Json => report::to_pretty(&serde_json::json!({
            "config": report::config_json(config),
            "rows": data.rows(),
            "cols": data.cols(),
            "data": (0..data.rows()).map(|i| data.row(i).to_vec()).collect::<Vec<_>>(),
        }))
        .into_bytes(),
    };
    io.emit(a.out.as_deref(), &bytes)?;
    Ok(EXIT_OK)
}

fn cmd_verify_gauge(a: VerifyArgs, config: &[(String, String)], io: &mut Io<'_>) -> Result<i32> {
    only(a.format, &[Format::Json], "verify-gauge")?;
    let source = match &a.graph {
        Some(p) => GraphSource::Fixed(load_graph(p)?),
        None => GraphSource::Random {
            max_nodes: a.n,
            p: a.p,
        },
    };
    let mut gcfg = GaugeSuiteConfig::new(source, a.trials, a.seed);
    gcfg.tol = a.tol;
    let gauge = gauge_suite(&gcfg)?;
    let jl = jl_suite(&JlSuiteConfig {
        nodes: vec![a.n.max(8)],
        eps: a.jl_eps.0.clone(),
        seeds: a.jl_seeds.0.clone(),
        ..Default::default()
    })?;
    let passed = gauge.passed() && jl.passed();
    io.note(format_args!(
        "gauge: {} graphs, max deviation {:.3e} (tol {:.1e}); jl: min fraction within eps {:.3}; {}",
        a.trials,
        gauge.max_deviation(),
        a.tol,
        jl.min_fraction(),
        if passed { "PASS" } else { "FAIL" }
    ));
    let v = serde_json::json!({
        "config": report::config_json(config),
        "passed": passed,
        "gauge": report::gauge_json(&gauge),
        "jl": report::jl_json(&jl),
    });
    io.emit(a.out.as_deref(), report::to_pretty(&v).as_bytes())?;
    Ok(if passed { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_sweep(a: SweepArgs, config: &[(String, String)], io: &mut Io<'_>) -> Result<i32> {
    only(a.format, &[Format::Csv, Format::Json], "sweep")?;
    let param: SweepParam = a.param.parse()?;
    let values = a.values.map(|l| l.0).unwrap_or_else(|| match param {
        SweepParam::R => vec![8, 32, 128, 256],
        SweepParam::K => vec![1, 2, 3, 4, 6, 8],
    });
    let task = sweep_task(a.task_seed)?;
    let setup = TrainSetup {
        epochs: a.epochs,
        seeds: a.seeds.0,
        ..Default::default()
    };
    let rows = run_sweep(&task, &sweep_config(&task), param, &values, &setup)?;
    for r in &rows {
        io.note(format_args!(
            "{}={}: {:.3} ± {:.3}",
            param.name(),
            r.value,
            r.mean,
            r.std
        ));
    }
    let mut config = config.to_vec();
    if !config.iter().any(|(k, _)| k == "values") {
        let joined: Vec<String> = values.iter().map(ToString::to_string).collect();
        config.push(("values".into(), joined.join(",")));
    }
    let text = match a.format {
        Format::Json => report::to_pretty(&report::sweep_json(param.name(), &rows, &config)),
        _ => report::sweep_csv(param.name(), &rows, &config),
    };
    io.emit(a.out.as_deref(), text.as_bytes())?;
    Ok(EXIT_OK)
}

fn cmd_bench(a: BenchArgs, config: &[(String, String)], io: &mut Io<'_>) -> Result<i32> {
    only(a.format, &[Format::Csv, Format::Json], "bench")?;
    let cfg = BenchConfig {
        ns: a.n.0,
        ds: a.d.0.clone(),
        r: a.r,
        k: a.k,
        reps: a.reps,
        seed: a.seed,
    };
    let rows = run_bench(&cfg)?;
    for r in &rows {
        io.note(format_args!(
            "n={} d={}: {:.4}s, peak rss {} KiB",
            r.n,
            r.d,
            r.seconds,
            r.peak_rss_kib.map_or("?".into(), |v| v.to_string())
        ));
    }
    let slopes: Vec<(usize, Option<f64>)> =
        a.d.0.iter().map(|&d| (d, time_slope(&rows, d))).collect();
    let mut config = config.to_vec();
    for (d, s) in &slopes {
        if let Some(s) = s {
            io.note(format_args!("d={d}: log-log time slope {s:.3}"));
            config.push((format!("slope_d{d}"), format!("{s:.4}")));
        }
    }
    let text = match a.format {
        Format::Json => report::to_pretty(&report::bench_json(&rows, &slopes, &config)),
        _ => report::bench_csv(&rows, &config),
    };
    io.emit(a.out.as_deref(), text.as_bytes())?;
    Ok(EXIT_OK)
}

fn cmd_disc_verify(a: DiscArgs, config: &[(String, String)], io: &mut Io<'_>) -> Result<i32> {
    only(a.format, &[Format::Json], "disc-verify")?;
    let mut cfg = MismatchConfig::new(a.manifold, a.ns.0, a.seeds.0);
    cfg.r = a.r;
    cfg.fastrp_k = a.k;
    cfg.anchors = a.anchors;
    cfg.knn_k = a.knn;
    cfg.projected = !a.no_projected;
    let rep = discretization_mismatch(&cfg)?;
    for s in &rep.exact.stats {
        io.note(format_args!("n={}: mean mismatch {:.5}", s.n, s.mean));
    }
    let slope = rep.exact.slope;
    io.note(format_args!(
        "slope {} (theoretical {:.4})",
        slope.map_or("n/a".into(), |s| format!("{s:.4}")),
        rep.theoretical_slope
    ));
    let passed = rep.strictly_decreasing() && slope.is_some_and(|s| s < 0.0);
    io.emit(
        a.out.as_deref(),
        report::to_pretty(&report::mismatch_json(&rep, config)).as_bytes(),
    )?;
    Ok(if passed { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_transfer(a: TransferArgs, config: &[(String, String)], io: &mut Io<'_>) -> Result<i32> {
    only(a.format, &[Format::Json], "transfer")?;
    let mut cfg = TransferConfig::new(a.manifold, a.n_train, a.n, a.seeds.0);
    cfg.epochs = a.epochs;
    cfg.r = a.r;
    cfg.hidden_dim = a.hidden;
    cfg.target = match a.target {
        TargetArg::Harmonic => TransferTarget::Harmonic,
        TargetArg::Constant => TransferTarget::Constant,
    };
    cfg.features = match a.features {
        FeaturesArg::Coordinates => TransferFeatures::Coordinates,
        FeaturesArg::Height => TransferFeatures::Height,
    };
    let rep = transfer_experiment(&cfg)?;
    io.note(format_args!(
        "invariant model loses less R² in {}/{} seeds",
        rep.invariant_wins(),
        rep.seeds.len()
    ));
    io.emit(
        a.out.as_deref(),
        report::to_pretty(&report::transfer_json(&rep, config)).as_bytes(),
    )?;
    Ok(EXIT_OK)
}

fn cmd_ablate(a: AblateArgs, config: &[(String, String)], io: &mut Io<'_>) -> Result<i32> {
    only(a.format, &[Format::Csv, Format::Json], "ablate")?;
    let task = ablation_task(a.task_seed)?;
    let mut cfg = ablation_config(&task);
    cfg.embed_dim = a.r;
    cfg.fastrp_k = a.k;
    cfg.hidden_dim = a.hidden;
    let setup = TrainSetup {
        epochs: a.epochs,
        seeds: a.seeds.0,
        ..Default::default()
    };
    let rows = ablate(&task, &cfg, &setup)?;
    for r in &rows {
        io.note(format_args!(
            "{}: {:.2}% ({:+.2})",
            r.ablation, r.accuracy, r.delta
        ));
    }
    let text = match a.format {
        Format::Json => report::to_pretty(&report::ablation_json(&rows, config)),
        _ => report::ablation_csv(&rows, config),
    };
    io.emit(a.out.as_deref(), text.as_bytes())?;
    Ok(EXIT_OK)
}

fn train_task(a: &TrainArgs) -> Result<NodeTask> {
    Ok(match a.task {
        TaskArg::TwoCommunity => two_community_task(a.task_seed)?,
        TaskArg::Sweep => sweep_task(a.task_seed)?,
        TaskArg::Ablation => ablation_task(a.task_seed)?,
    })
}

fn cmd_train(a: TrainArgs, config: &[(String, String)], io: &mut Io<'_>) -> Result<i32> {
    let task = train_task(&a)?;
    let mut cfg = toy_config(&task, a.hidden, a.r, a.k);
    cfg.seed = a.seed;
    let optimizer = match a.optimizer {
        OptimizerArg::Adam => Optimizer::adam(a.lr),
        OptimizerArg::Sgd => Optimizer::sgd(a.lr),
    };
    let phi = fastrp_embed(&task.graph, a.r, a.k, a.seed)?;
    let (w, rep) = fit(
        &task.graph,
        &task.x,
        &phi,
        &cfg,
        &task.train_targets(),
        optimizer,
        a.epochs,
    )?;
    let pred = predict(&task.graph, &task.x, &phi, &cfg, &w)?;
    io.note(format_args!(
        "final loss {:.4}; train accuracy {:.3}; test accuracy {:.3}",
        rep.final_loss,
        accuracy(&pred, &task.labels, &task.train_rows),
        accuracy(&pred, &task.labels, &task.test_rows)
    ));
    if let Some(p) = &a.model {
        save_model(p, &cfg, &w)?;
    }
    io.emit(
        a.out.as_deref(),
        loss_curve_csv(&rep.loss_curve, config).as_bytes(),
    )?;
    Ok(EXIT_OK)
}

/// Entry point for the binary.
pub fn main_with_env() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(
        std::env::args_os().collect(),
        &mut stdout.lock(),
        &mut stderr.lock(),
    )
}
