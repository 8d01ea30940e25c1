//! Report formatting, staged artifacts and run manifests.

use std::path::{Path, PathBuf};

use clipgeom_core::store::write_atomic;
use clipgeom_core::Histogram;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Rounds to 9 significant digits. Zero (either sign) becomes `+0`.
pub fn round9(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("scientific literal")
}

/// JSON number at report precision; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if x.is_nan() {
        Value::from("nan")
    } else if x == f64::INFINITY {
        Value::from("inf")
    } else if x == f64::NEG_INFINITY {
        Value::from("-inf")
    } else {
        json!(round9(x))
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

/// CSV/TSV cell at report precision; `None` is empty.
pub fn cell(x: Option<f64>) -> String {
    match x {
        None => String::new(),
        Some(v) => match num(v) {
            Value::String(s) => s,
            other => other.to_string(),
        },
    }
}

pub fn histogram_json(h: &Histogram) -> Value {
    json!({
        "edges": nums(h.edges()),
        "counts": h.counts(),
        "densities": nums(&h.densities()),
    })
}

pub fn histogram_tsv(h: &Histogram) -> String {
    h.to_tsv(|x| cell(Some(x)))
}

/// Sorts object keys recursively.
pub fn canonical(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, canonical(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        other => other,
    }
}

pub fn json_bytes(v: Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(&canonical(v)).expect("json values serialize");
    s.push('\n');
    s.into_bytes()
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn manifest_name(out: &Path) -> String {
    manifest_path(out)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// A file to be written once the whole command has succeeded.
pub struct Artifact {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

impl Artifact {
    /// JSON report carrying a `manifest` key that names its manifest.
    pub fn report(path: &Path, body: Value, primary: &Path) -> Self {
        let mut body = body;
        if let Value::Object(map) = &mut body {
            map.insert("manifest".into(), Value::from(manifest_name(primary)));
        }
        Self {
            path: path.to_path_buf(),
            bytes: json_bytes(body),
        }
    }

    /// Delimited table with a leading `# manifest: …` comment line.
    pub fn table(path: &Path, text: String, primary: &Path) -> Self {
        Self {
            path: path.to_path_buf(),
            bytes: format!("# manifest: {}\n{text}", manifest_name(primary)).into_bytes(),
        }
    }

    pub fn raw(path: &Path, bytes: Vec<u8>) -> Self {
        Self {
            path: path.to_path_buf(),
            bytes,
        }
    }
}

/// Writes CSV rows with the `csv` crate.
pub fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>, delimiter: u8) -> String {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Checks every destination directory before writing the first file.
pub fn write_all(artifacts: &[Artifact]) -> Result<(), CliError> {
    for a in artifacts {
        let dir = match a.path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        if !dir.is_dir() {
            return Err(CliError::input(format!("{}: no such directory", dir.display())));
        }
    }
    for a in artifacts {
        write_atomic(&a.path, &a.bytes).map_err(CliError::from)?;
    }
    Ok(())
}

/// `SOURCE_DATE_EPOCH` when set, otherwise the current time, as RFC 3339 UTC.
pub fn timestamp() -> String {
    let when = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
        .unwrap_or_else(chrono::Utc::now);
    when.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[derive(Debug, Clone)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn manifest(
    command: &str,
    argv: &[String],
    inputs: &[InputRecord],
    outputs: &[PathBuf],
    parameters: Value,
) -> Value {
    json!({
        "command": command,
        "argv": argv,
        "inputs": inputs
            .iter()
            .map(|i| json!({"path": i.path.to_string_lossy(), "sha256": i.sha256}))
            .collect::<Vec<_>>(),
        "outputs": outputs.iter().map(|p| p.to_string_lossy().into_owned()).collect::<Vec<_>>(),
        "parameters": parameters,
        "tool_version": concat!("clipgeom ", env!("CARGO_PKG_VERSION")),
        "timestamp": timestamp(),
    })
}
