//! JSON and CSV renderings of the core reports.

use std::fmt::Write as _;

use gist_core::block::AblationRow;
use gist_core::manifold::{MismatchReport, MismatchSeries, TransferReport};
use gist_core::spectral::GaugeKind;
use gist_core::tasks::SweepRow;
use gist_core::verify::{GaugeSuiteReport, JlSuiteReport};
use serde_json::{json, Value};

use crate::bench::BenchRow;
use crate::io::{config_header, fmt_f64};

pub type Config = [(String, String)];

pub fn config_json(config: &Config) -> Value {
    Value::Object(
        config
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect(),
    )
}

/// Non-finite numbers become `null`.
fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn gauge_kind_name(k: GaugeKind) -> &'static str {
    match k {
        GaugeKind::Identity => "identity",
        GaugeKind::SignFlip => "sign_flip",
        GaugeKind::BlockRotation => "block_rotation",
        GaugeKind::Orthogonal => "orthogonal",
    }
}

pub fn gauge_json(rep: &GaugeSuiteReport) -> Value {
    json!({
        "tol": num(rep.tol),
        "passed": rep.passed(),
        "max_attention_deviation": num(rep.max_attention_deviation()),
        "max_block_deviation": num(rep.max_block_deviation()),
        "max_deviation": num(rep.max_deviation()),
        "trials": per_trial(rep),
    })
}

/// One record per trial graph, with one entry per gauge kind drawn on it.
fn per_trial(rep: &GaugeSuiteReport) -> Vec<Value> {
    let mut out: Vec<Value> = Vec::new();
    let mut i = 0;
    while i < rep.trials.len() {
        let first = &rep.trials[i];
        let group: Vec<_> = rep.trials[i..]
            .iter()
            .take_while(|t| t.trial == first.trial)
            .collect();
        i += group.len();
        out.push(json!({
            "trial": first.trial,
            "nodes": first.nodes,
            "max_multiplicity": first.max_multiplicity,
            "max_deviation": num(group.iter().map(|t| t.max_deviation()).fold(0.0, f64::max)),
            "passed": group.iter().all(|t| t.passed),
            "gauges": group.iter().map(|t| json!({
                "kind": gauge_kind_name(t.kind),
                "attention": num(t.attention),
                "equivariance": num(t.equivariance),
                "block": num(t.block),
                "block_phi": num(t.block_phi),
                "passed": t.passed,
            })).collect::<Vec<_>>(),
        }));
    }
    out
}

pub fn jl_json(rep: &JlSuiteReport) -> Value {
    json!({
        "required_fraction": num(rep.required_fraction),
        "passed": rep.passed(),
        "min_fraction_within_eps": num(rep.min_fraction()),
        "trials": rep.trials.iter().map(|t| json!({
            "nodes": t.nodes,
            "eps": num(t.eps),
            "r": t.r,
            "seed": t.seed,
            "pairs": t.stats.pairs,
            "max_abs_err": num(t.stats.max_abs_err),
            "mean_abs_err": num(t.stats.mean_abs_err),
            "fraction_within_eps": num(t.stats.fraction_within_eps),
            "passed": t.passed,
        })).collect::<Vec<_>>(),
    })
}

fn series_json(s: &MismatchSeries) -> Value {
    json!({
        "name": s.name,
        "slope": opt(s.slope),
        "stats": s.stats.iter().map(|st| json!({
            "n": st.n,
            "mean": num(st.mean),
            "max": num(st.max),
            "std": num(st.std),
            "per_seed_mean": st.per_seed_mean.iter().copied().map(num).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

pub fn mismatch_json(rep: &MismatchReport, config: &Config) -> Value {
    let m = rep.manifold.dim() as f64;
    json!({
        "config": config_json(config),
        "manifold": rep.manifold.name(),
        "resolutions": rep.resolutions,
        "reference_n": rep.reference_n,
        "seeds": rep.seeds,
        "anchors": rep.anchors,
        "pairs": rep.pairs,
        "kernel_scale_exponent": num(1.0 - 2.0 / m),
        "theoretical_slope": num(rep.theoretical_slope),
        "slope": opt(rep.exact.slope),
        "strictly_decreasing": rep.strictly_decreasing(),
        "exact": series_json(&rep.exact),
        "projected": rep.projected.as_ref().map_or(Value::Null, series_json),
        "fastrp": series_json(&rep.fastrp),
    })
}

pub fn transfer_json(rep: &TransferReport, config: &Config) -> Value {
    let pair = |p: &gist_core::manifold::R2Pair| json!({"train": opt(p.train), "test": opt(p.test), "drop": opt(p.drop())});
    json!({
        "config": config_json(config),
        "manifold": rep.manifold.name(),
        "n_train": rep.n_train,
        "n_test": rep.n_test,
        "invariant_wins": rep.invariant_wins(),
        "seeds": rep.seeds.iter().map(|s| json!({
            "seed": s.seed,
            "gauge_invariant_r2": pair(&s.gauge_invariant),
            "gauge_broken_r2": pair(&s.gauge_broken),
            "invariant_wins": s.invariant_wins(),
        })).collect::<Vec<_>>(),
    })
}

pub fn sweep_csv(param: &str, rows: &[SweepRow], config: &Config) -> String {
    let mut out = config_header(config);
    let _ = writeln!(out, "{param},mean,std");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.value, fmt_f64(r.mean), fmt_f64(r.std));
    }
    out
}

pub fn sweep_json(param: &str, rows: &[SweepRow], config: &Config) -> Value {
    json!({
        "config": config_json(config),
        "param": param,
        "rows": rows.iter().map(|r| json!({
            "value": r.value,
            "mean": num(r.mean),
            "std": num(r.std),
            "per_seed": r.per_seed.iter().copied().map(num).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

/// `accuracy` is the percentage of the unablated model's accuracy.
pub fn ablation_csv(rows: &[AblationRow], config: &Config) -> String {
    let mut out = config_header(config);
    out.push_str("ablation,accuracy,std,delta,raw_accuracy\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.6}",
            r.ablation, r.accuracy, r.std, r.delta, r.raw_accuracy
        );
    }
    out
}

pub fn ablation_json(rows: &[AblationRow], config: &Config) -> Value {
    json!({
        "config": config_json(config),
        "rows": rows.iter().map(|r| json!({
            "ablation": r.ablation,
            "accuracy": num(r.accuracy),
            "std": num(r.std),
            "delta": num(r.delta),
            "raw_accuracy": num(r.raw_accuracy),
            "per_seed": r.per_seed.iter().copied().map(num).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

pub fn bench_csv(rows: &[BenchRow], config: &Config) -> String {
    let mut out = config_header(config);
    out.push_str("n,d,edges,seconds,peak_rss_kib\n");
    for r in rows {
        let rss = r.peak_rss_kib.map_or(String::new(), |v| v.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{rss}",
            r.n,
            r.d,
            r.edges,
            fmt_f64(r.seconds)
        );
    }
    out
}

pub fn bench_json(rows: &[BenchRow], slopes: &[(usize, Option<f64>)], config: &Config) -> Value {
    json!({
        "config": config_json(config),
        "slopes": slopes.iter().map(|(d, s)| json!({"d": d, "slope": opt(*s)})).collect::<Vec<_>>(),
        "rows": rows.iter().map(|r| json!({
            "n": r.n,
            "d": r.d,
            "edges": r.edges,
            "seconds": num(r.seconds),
            "peak_rss_kib": r.peak_rss_kib,
        })).collect::<Vec<_>>(),
    })
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_numbers_are_null() {
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(opt(None), Value::Null);
        assert_eq!(num(0.5), json!(0.5));
    }

    #[test]
    fn ablation_csv_shape() {
        let row = |name: &str, acc: f64| AblationRow {
            ablation: name.into(),
            accuracy: acc,
            std: 0.0,
            delta: acc - 100.0,
            raw_accuracy: acc / 200.0,
            per_seed: vec![],
        };
        let rows = [row("none", 100.0), row("branch1_feature", 90.0)];
        let cfg = vec![("seeds".to_string(), "0,1".to_string())];
        let csv = ablation_csv(&rows, &cfg);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# seeds=0,1");
        assert_eq!(lines[1], "ablation,accuracy,std,delta,raw_accuracy");
        assert_eq!(lines[2], "none,100.0000,0.0000,0.0000,0.500000");
        assert_eq!(lines[3], "branch1_feature,90.0000,0.0000,-10.0000,0.450000");
    }
}
