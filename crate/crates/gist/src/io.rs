//! Graph loaders, embedding files and atomic output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use gist_core::graph::{parse_edge_list, parse_off};
use gist_core::{Graph, Mat};

use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"GISTEMB1";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    Ok(parse_edge_list(&read_text(path.as_ref())?)?)
}

pub fn load_off_mesh(path: impl AsRef<Path>) -> Result<Graph> {
    Ok(parse_off(&read_text(path.as_ref())?)?)
}

/// Dispatches on extension: `.off` is a mesh, anything else an edge list.
pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let is_off = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("off"));
    if is_off {
        load_off_mesh(path)
    } else {
        load_edge_list(path)
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::format(path, "not a file path"))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// `# key=value` lines.
pub fn config_header(config: &[(String, String)]) -> String {
    config.iter().fold(String::new(), |mut s, (k, v)| {
        let _ = writeln!(s, "# {k}={v}");
        s
    })
}

/// Shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// `node,e0,…` then one row per node.
pub fn embedding_csv(data: &Mat, config: &[(String, String)]) -> String {
    let mut out = config_header(config);
    out.push_str("node");
    for c in 0..data.cols() {
        let _ = write!(out, ",e{c}");
    }
    out.push('\n');
    for i in 0..data.rows() {
        let _ = write!(out, "{i}");
        for &v in data.row(i) {
            let _ = write!(out, ",{}", fmt_f64(v));
        }
        out.push('\n');
    }
    out
}

pub fn embedding_bin(data: &Mat) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * data.as_slice().len());
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&(data.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(data.cols() as u64).to_le_bytes());
    for v in data.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) fn read_u64(bytes: &[u8], at: &mut usize) -> Option<u64> {
    let chunk = bytes.get(*at..*at + 8)?;
    *at += 8;
    Some(u64::from_le_bytes(chunk.try_into().ok()?))
}

pub(crate) fn read_f64s(bytes: &[u8], at: &mut usize, count: usize) -> Option<Vec<f64>> {
    let end = at.checked_add(count.checked_mul(8)?)?;
    let chunk = bytes.get(*at..end)?;
    *at = end;
    Some(
        chunk
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
    )
}

pub fn parse_embedding_bin(bytes: &[u8]) -> Option<Mat> {
    if bytes.get(..8)? != EMBEDDING_MAGIC {
        return None;
    }
    let mut at = 8;
    let n = usize::try_from(read_u64(bytes, &mut at)?).ok()?;
    let r = usize::try_from(read_u64(bytes, &mut at)?).ok()?;
    let data = read_f64s(bytes, &mut at, n.checked_mul(r)?)?;
    (at == bytes.len()).then(|| Mat::from_vec(n, r, data).ok())?
}

pub fn read_embedding_bin(path: impl AsRef<Path>) -> Result<Mat> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_embedding_bin(&bytes).ok_or_else(|| Error::format(path, "not a GISTEMB1 embedding"))
}

/// `epoch,loss`.
pub fn loss_curve_csv(curve: &[f64], config: &[(String, String)]) -> String {
    let mut out = config_header(config);
    out.push_str("epoch,loss\n");
    for (e, l) in curve.iter().enumerate() {
        let _ = writeln!(out, "{e},{}", fmt_f64(*l));
    }
    out
}
