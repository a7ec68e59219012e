//! Minimal CSV writer and reader for the plain numeric tables the runner emits.
//!
//! Fields never contain commas or quotes, lines end with `\n`, and floats are written in
//! the shortest form that parses back to the same value, so write→read→write is lossless.

use std::fmt::Write as _;
use std::path::Path;

use super::CliError;

/// Shortest round-trip decimal form of `v`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn render(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn write(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    std::fs::write(path, render(header, rows)).map_err(|e| CliError::io(path, e))
}

/// Header and rows of a CSV file written by [`write`].
pub fn read(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(parse(&text))
}

pub fn parse(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let split = |l: &str| l.split(',').map(str::to_string).collect::<Vec<_>>();
    let header = lines.next().map(split).unwrap_or_default();
    let rows = lines.map(split).collect();
    (header, rows)
}
