//! Deterministic file output: fixed-format CSV (identical configs and
//! seeds produce byte-identical files) and JSON manifest/snapshots.

use std::io::Write;
use std::path::Path;

use bosedyn_core::linalg::CMatrix;

use crate::config::ConfigError;

/// Writes a CSV with a header row; every value is rendered `{:.12e}` so
/// reruns are byte-identical.
pub fn write_csv(path: &Path, columns: &[String], rows: &[Vec<f64>]) -> Result<(), ConfigError> {
    let mut buf = String::new();
    buf.push_str(&columns.join(","));
    buf.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                buf.push(',');
            }
            first = false;
            buf.push_str(&format!("{v:.12e}"));
        }
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ConfigError> {
    let mut f = std::fs::File::create(path)
        .map_err(|e| ConfigError(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(bytes)
        .map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), ConfigError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| ConfigError(format!("serialization: {e}")))?;
    write_atomic(path, text.as_bytes())
}

/// A density matrix (or any sector matrix) as JSON: basis descriptor plus
/// row-major [re, im] entries.
pub fn matrix_snapshot(d: usize, n: usize, time: f64, m: &CMatrix) -> serde_json::Value {
    let entries: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| [m[(r, c)].re, m[(r, c)].im])
                .collect()
        })
        .collect();
    serde_json::json!({
        "basis": { "d": d, "n": n, "ordering": "reverse_lexicographic" },
        "time": time,
        "entries": entries,
    })
}
