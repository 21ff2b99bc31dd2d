use std::fs;
use std::path::Path;

use fairlab::MetricsRecord;
use serde::Serialize;

use crate::CliResult;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> CliResult<String> {
    fs::write(dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
    Ok(name.to_string())
}

/// Comma-joined rows with a header line.
pub fn write_csv(dir: &Path, name: &str, header: &[String], rows: &[Vec<String>]) -> CliResult<String> {
    let mut text = header.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    fs::write(dir.join(name), text)?;
    Ok(name.to_string())
}

pub fn nr_headers(k: usize) -> Vec<String> {
    (0..k).map(|s| format!("nr_{s}")).collect()
}

/// `acc, ddp, deo, nr_0, …`.
pub fn metric_cells(m: &MetricsRecord) -> Vec<String> {
    let mut v = vec![fmt17(m.accuracy), fmt17(m.ddp), fmt17(m.deo)];
    v.extend(m.nr.iter().map(|&x| fmt17(x)));
    v
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}
