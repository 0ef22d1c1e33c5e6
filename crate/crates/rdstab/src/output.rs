use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// Writes rows under `header` to `dir/name`.
pub fn write_csv<R>(dir: &Path, name: &str, header: &[String], rows: R) -> Result<()>
where
    R: IntoIterator<Item = Vec<String>>,
{
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn header(fixed: &[&str], prefix: &str, n: usize) -> Vec<String> {
    fixed
        .iter()
        .map(|s| s.to_string())
        .chain((0..n).map(|i| format!("{prefix}{i}")))
        .collect()
}

/// Shortest round-trip decimal form; `NaN` and infinities spelled out.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
