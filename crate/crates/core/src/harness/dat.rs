//! Two-column whitespace-separated data files for pgfplots/gnuplot.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Column layout of a data file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schema {
    KaEbno,
    EbnoPupe,
    EpsMu,
    EbnoFer,
}

impl Schema {
    pub fn columns(&self) -> [&'static str; 2] {
        match self {
            Schema::KaEbno => ["KA", "EBNO"],
            Schema::EbnoPupe => ["EBNO", "PUPE"],
            Schema::EpsMu => ["EPS", "MU"],
            Schema::EbnoFer => ["EBNO", "FER"],
        }
    }
}

/// `%g`-style rendering with six significant digits.
pub fn format_value(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn format_dat(schema: Schema, points: &[(f64, f64)]) -> String {
    let [a, b] = schema.columns();
    let mut out = format!("{a} {b}\n");
    for &(x, y) in points {
        let _ = writeln!(out, "{} {}", format_value(x), format_value(y));
    }
    out
}

/// Writes `points` under `schema` to `path`, creating parent directories.
pub fn emit_dat(path: impl AsRef<Path>, schema: Schema, points: &[(f64, f64)]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, format_dat(schema, points))?;
    Ok(())
}

/// Header and rows of a two-column data file.
pub fn parse_dat(text: &str) -> Result<(Vec<String>, Vec<(f64, f64)>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter("empty data file".into()))?
        .split_whitespace()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidParameter(format!("row {}: {e}", i + 1)));
        if cols.len() != 2 {
            return Err(Error::InvalidParameter(format!("row {} has {} columns", i + 1, cols.len())));
        }
        rows.push((parse(cols[0])?, parse(cols[1])?));
    }
    Ok((header, rows))
}
