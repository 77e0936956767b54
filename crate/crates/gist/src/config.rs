//! Flat `key=value` config files spliced into the command line.
//!
//! `--config FILE` is removed from the arguments and each `key=value` line
//! becomes `--key value` directly after the subcommand, ahead of the user's
//! own flags, so flags given on the command line win. Underscores in keys
//! become dashes; `true` turns into a bare switch and `false` drops the key.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub fn parse_config(text: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
        let (k, v) = (k.trim(), v.trim().trim_matches('"'));
        if k.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        out.push((k.replace('_', "-"), v.to_string()));
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|m| Error::format(path, m))
}

fn config_flags(pairs: &[(String, String)]) -> Vec<OsString> {
    let mut out = Vec::new();
    for (k, v) in pairs {
        match v.as_str() {
            "false" => {}
            "true" => out.push(format!("--{k}").into()),
            _ => {
                out.push(format!("--{k}").into());
                out.push(v.into());
            }
        }
    }
    out
}

/// Expands every `--config FILE` (or `--config=FILE`) in `args`.
pub fn splice_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut files = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let f = it
                .next()
                .ok_or_else(|| Error::Usage("--config needs a file".into()))?;
            files.push(f);
        } else if let Some(f) = s.strip_prefix("--config=") {
            files.push(f.into());
        } else {
            rest.push(a);
        }
    }
    if files.is_empty() {
        return Ok(rest);
    }
    let mut flags = Vec::new();
    for f in &files {
        flags.extend(config_flags(&load_config(Path::new(f))?));
    }
    // position just after the subcommand: the first bare word after argv[0]
    let at = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map_or(rest.len(), |p| p + 2);
    rest.splice(at..at, flags);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_pairs_and_comments() {
        let p = parse_config("# run\nr = 8\nfastrp_k=2 # depth\n\nout=\"a.csv\"\n").unwrap();
        assert_eq!(
            p,
            [("r", "8"), ("fastrp-k", "2"), ("out", "a.csv")]
                .map(|(a, b)| (a.to_string(), b.to_string()))
        );
        assert!(parse_config("r 8").unwrap_err().contains("line 1"));
    }

    #[test]
    fn file_values_precede_flags() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("run.cfg");
        fs::write(&f, "r=8\nk=2\nno_projected=true\nquiet=false\n").unwrap();
        let args = os(&["gist", "embed", "--config", f.to_str().unwrap(), "--r", "4"]);
        let got = splice_config(args).unwrap();
        assert_eq!(
            got,
            os(&[
                "gist",
                "embed",
                "--r",
                "8",
                "--k",
                "2",
                "--no-projected",
                "--r",
                "4"
            ])
        );
    }

    #[test]
    fn untouched_without_config() {
        let args = os(&["gist", "bench", "--n", "4096"]);
        assert_eq!(splice_config(args.clone()).unwrap(), args);
    }

    #[test]
    fn missing_file_is_an_error() {
        let args = os(&["gist", "embed", "--config=/nonexistent.cfg"]);
        assert!(splice_config(args).is_err());
    }
}
