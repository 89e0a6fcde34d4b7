//! Deterministic text output and atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::CliError;

/// Shortest round-trip decimal; `NaN`, `inf` and `-inf` spelled out.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_owned()
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// CSV with leading `#` comment lines.
#[derive(Debug, Default)]
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn comment(&mut self, line: impl AsRef<str>) {
        for l in line.as_ref().lines() {
            self.buf.push_str("# ");
            self.buf.push_str(l);
            self.buf.push('\n');
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        let line: Vec<&str> = fields.iter().map(|f| f.as_ref()).collect();
        self.buf.push_str(&line.join(","));
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}

pub fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report serialization");
    out.push(b'\n');
    out
}

pub fn compact<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("config serialization")
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// `field.csv` → `field.json`; a `.json` output gets `.sidecar.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        out.with_extension("sidecar.json")
    } else {
        out.with_extension("json")
    }
}
