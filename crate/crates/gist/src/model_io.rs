//! `GISTMDL1` model files.
//!
//! Layout: magic, `u64` header length, a UTF-8 `key=value` header describing
//! the [`ModelConfig`], `u64` tensor count, then per tensor `u64` rows,
//! `u64` cols and row-major little-endian `f64` data, in layout order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gist_core::attention::FeatureMap;
use gist_core::block::{Architecture, HeadConfig, ModelConfig, ModelWeights, Task};
use gist_core::Mat;

use crate::error::{Error, Result};
use crate::io::{read_f64s, read_u64, write_atomic};

pub const MODEL_MAGIC: &[u8; 8] = b"GISTMDL1";

fn bool_flags(b: [bool; 3]) -> String {
    b.iter().map(|&x| if x { '1' } else { '0' }).collect()
}

pub fn config_to_text(cfg: &ModelConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("input_dim", cfg.input_dim.to_string());
    kv("num_blocks", cfg.num_blocks.to_string());
    kv("hidden_dim", cfg.hidden_dim.to_string());
    kv("embed_dim", cfg.embed_dim.to_string());
    kv("fastrp_k", cfg.fastrp_k.to_string());
    kv("output_dim", cfg.head.output_dim.to_string());
    kv(
        "task",
        match cfg.head.task {
            Task::NodeClassification => "classification",
            Task::NodeRegression => "regression",
        }
        .into(),
    );
    kv("seed", cfg.seed.to_string());
    kv("tail_blocks", cfg.tail_blocks.to_string());
    kv(
        "architecture",
        match cfg.architecture {
            Architecture::Gist => "gist",
            Architecture::GaugeBroken => "gauge_broken",
        }
        .into(),
    );
    kv("enabled_branches", bool_flags(cfg.enabled_branches));
    kv("phi_residual", cfg.phi_residual.to_string());
    kv(
        "feature_map",
        match cfg.feature_map {
            FeatureMap::Relu => "relu",
            FeatureMap::EluPlusOne => "elu_plus_one",
        }
        .into(),
    );
    kv("eps", format!("{:?}", cfg.eps));
    s
}

pub fn config_from_text(text: &str) -> std::result::Result<ModelConfig, String> {
    let mut map = std::collections::HashMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("bad header line {line:?}"))?;
        map.insert(k.trim(), v.trim());
    }
    let get = |k: &str| map.get(k).copied().ok_or_else(|| format!("missing {k}"));
    let num = |k: &str| -> std::result::Result<usize, String> {
        get(k)?.parse().map_err(|_| format!("bad {k}"))
    };
    let task = match get("task")? {
        "classification" => Task::NodeClassification,
        "regression" => Task::NodeRegression,
        other => return Err(format!("unknown task {other}")),
    };
    let mut cfg = ModelConfig::new(
        num("input_dim")?,
        num("hidden_dim")?,
        num("embed_dim")?,
        HeadConfig {
            output_dim: num("output_dim")?,
            task,
        },
    );
    cfg.num_blocks = num("num_blocks")?;
    cfg.fastrp_k = num("fastrp_k")?;
    cfg.seed = get("seed")?.parse().map_err(|_| "bad seed")?;
    cfg.tail_blocks = num("tail_blocks")?;
    cfg.architecture = match get("architecture")? {
        "gist" => Architecture::Gist,
        "gauge_broken" => Architecture::GaugeBroken,
        other => return Err(format!("unknown architecture {other}")),
    };
    let flags: Vec<char> = get("enabled_branches")?.chars().collect();
    if flags.len() != 3 || flags.iter().any(|c| !matches!(c, '0' | '1')) {
        return Err("bad enabled_branches".into());
    }
    cfg.enabled_branches = [flags[0] == '1', flags[1] == '1', flags[2] == '1'];
    cfg.phi_residual = get("phi_residual")?
        .parse()
        .map_err(|_| "bad phi_residual")?;
    cfg.feature_map = match get("feature_map")? {
        "relu" => FeatureMap::Relu,
        "elu_plus_one" => FeatureMap::EluPlusOne,
        other => return Err(format!("unknown feature map {other}")),
    };
    cfg.eps = get("eps")?.parse().map_err(|_| "bad eps")?;
    Ok(cfg)
}

pub fn model_bytes(cfg: &ModelConfig, weights: &ModelWeights) -> Result<Vec<u8>> {
    weights.check(cfg)?;
    let header = config_to_text(cfg);
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&(weights.tensors.len() as u64).to_le_bytes());
    for t in &weights.tensors {
        out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
        for v in t.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn parse_model(bytes: &[u8]) -> std::result::Result<(ModelConfig, ModelWeights), String> {
    if bytes.get(..8) != Some(MODEL_MAGIC) {
        return Err("not a GISTMDL1 model".into());
    }
    let short = || "truncated model".to_string();
    let mut at = 8;
    let hlen = read_u64(bytes, &mut at).ok_or_else(short)? as usize;
    let header = bytes.get(at..at + hlen).ok_or_else(short)?;
    at += hlen;
    let cfg = config_from_text(std::str::from_utf8(header).map_err(|_| "header is not UTF-8")?)?;
    let count = read_u64(bytes, &mut at).ok_or_else(short)? as usize;
    let mut tensors = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let rows = read_u64(bytes, &mut at).ok_or_else(short)? as usize;
        let cols = read_u64(bytes, &mut at).ok_or_else(short)? as usize;
        let n = rows.checked_mul(cols).ok_or_else(short)?;
        let data = read_f64s(bytes, &mut at, n).ok_or_else(short)?;
        tensors.push(Mat::from_vec(rows, cols, data).map_err(|e| e.to_string())?);
    }
    if at != bytes.len() {
        return Err("trailing bytes after model".into());
    }
    let weights = ModelWeights { tensors };
    weights.check(&cfg).map_err(|e| e.to_string())?;
    Ok((cfg, weights))
}

pub fn save_model(path: impl AsRef<Path>, cfg: &ModelConfig, weights: &ModelWeights) -> Result<()> {
    write_atomic(path, &model_bytes(cfg, weights)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(ModelConfig, ModelWeights)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_model(&bytes).map_err(|m| Error::format(path, m))
}
