//! Typed table cells and the three output formats.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Bundle;
use crate::error::{Error, Result};

/// A table value. Rendering only rounds; it never computes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "kebab-case")]
pub enum Cell {
    Text(String),
    Count(u64),
    /// A fraction, shown as a percentage with two decimals.
    Percent(f64),
    /// Two decimals.
    Stat(f64),
    /// Three decimals.
    Alpha(f64),
    /// Three decimals, or `<0.001`.
    PValue(f64),
    Flag(bool),
    Missing,
}

fn fixed(x: f64, places: usize) -> String {
    let s = format!("{x:.places$}");
    // No "-0.00".
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Cell {
        Cell::Text(s.into())
    }

    pub fn opt_stat(x: Option<f64>) -> Cell {
        x.map_or(Cell::Missing, Cell::Stat)
    }

    pub fn opt_percent(x: Option<f64>) -> Cell {
        x.map_or(Cell::Missing, Cell::Percent)
    }

    pub fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Count(n) => n.to_string(),
            Cell::Percent(x) if x.is_finite() => format!("{}%", fixed(x * 100.0, 2)),
            Cell::Stat(x) if x.is_finite() => fixed(*x, 2),
            Cell::Alpha(x) if x.is_finite() => fixed(*x, 3),
            Cell::PValue(p) if p.is_finite() => {
                if *p < 0.001 {
                    "<0.001".to_string()
                } else {
                    fixed(*p, 3)
                }
            }
            Cell::Flag(b) => if *b { "yes" } else { "no" }.to_string(),
            Cell::Missing => String::new(),
            _ => "NaN".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, title: &str, columns: &[&str]) -> Table {
        Table {
            name: name.to_string(),
            title: title.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Header and rows as left-aligned columns.
    pub fn plain(&self) -> String {
        let mut out = String::new();
        let cells: Vec<Vec<String>> = std::iter::once(self.columns.clone())
            .chain(self.rows.iter().map(|r| r.iter().map(Cell::render).collect()))
            .collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        for row in &cells {
            let mut line = String::new();
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    line.push_str("  ");
                }
                let _ = write!(line, "{v:<w$}", w = widths[c]);
            }
            let _ = writeln!(out, "{}", line.trim_end());
        }
        if self.rows.is_empty() {
            let _ = writeln!(out, "(no rows)");
        }
        out
    }

    /// Rendered value at `row`, `column`.
    pub fn get(&self, row: usize, column: &str) -> Option<String> {
        let c = self.column(column)?;
        self.rows.get(row).map(|r| r[c].render())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Plain,
    Csv,
    JsonLines,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Plain, Format::Csv, Format::JsonLines];

    pub fn name(self) -> &'static str {
        match self {
            Format::Plain => "plain",
            Format::Csv => "csv",
            Format::JsonLines => "json-lines",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Format::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown format {s:?} (plain, csv, json-lines)")))
    }
}

fn plain(bundle: &Bundle) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "config_hash: {}", bundle.config_hash);
    let _ = writeln!(out, "seed_sample: {}", bundle.seed_sample);
    let _ = writeln!(out, "seed_train: {}", bundle.seed_train);
    let _ = writeln!(out, "status: {}", if bundle.is_partial() { "partial" } else { "complete" });
    for t in &bundle.tables {
        let _ = writeln!(out, "\n## {} ({})", t.title, t.name);
        let _ = writeln!(
            out,
            "config {} seeds sample={} train={}",
            &bundle.config_hash[..12.min(bundle.config_hash.len())],
            bundle.seed_sample,
            bundle.seed_train
        );
        out.push_str(&t.plain());
    }
    out
}

fn csv_table(bundle: &Bundle, t: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let meta = ["config_hash", "seed_sample", "seed_train"];
    w.write_record(t.columns.iter().map(String::as_str).chain(meta))?;
    for r in &t.rows {
        let mut rec: Vec<String> = r.iter().map(Cell::render).collect();
        rec.extend([
            bundle.config_hash.clone(),
            bundle.seed_sample.to_string(),
            bundle.seed_train.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Malformed(e.to_string()))
}

fn jsonl_table(bundle: &Bundle, t: &Table) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in &t.rows {
        let mut obj = serde_json::Map::new();
        obj.insert("table".into(), t.name.clone().into());
        obj.insert("config_hash".into(), bundle.config_hash.clone().into());
        obj.insert("seed_sample".into(), bundle.seed_sample.into());
        obj.insert("seed_train".into(), bundle.seed_train.into());
        for (c, v) in t.columns.iter().zip(r) {
            obj.insert(c.clone(), v.render().into());
        }
        serde_json::to_writer(&mut out, &obj)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Writes the bundle into `dir`: `report.txt` for plain, and one
/// `<table>.csv` or `<table>.jsonl` per table otherwise. Returns the
/// written paths in order.
pub fn render(bundle: &Bundle, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files: Vec<(String, Vec<u8>)> = match format {
        Format::Plain => vec![("report.txt".into(), plain(bundle).into_bytes())],
        Format::Csv => bundle
            .tables
            .iter()
            .map(|t| Ok((format!("{}.csv", t.name), csv_table(bundle, t)?)))
            .collect::<Result<_>>()?,
        Format::JsonLines => bundle
            .tables
            .iter()
            .map(|t| Ok((format!("{}.jsonl", t.name), jsonl_table(bundle, t)?)))
            .collect::<Result<_>>()?,
    };
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_precision() {
        assert_eq!(Cell::Percent(0.93814).render(), "93.81%");
        assert_eq!(Cell::Stat(6.4849).render(), "6.48");
        assert_eq!(Cell::Stat(-0.0001).render(), "0.00");
        assert_eq!(Cell::Alpha(0.05 / 3.0).render(), "0.017");
        assert_eq!(Cell::PValue(0.0004).render(), "<0.001");
        assert_eq!(Cell::PValue(0.2801).render(), "0.280");
        assert_eq!(Cell::Missing.render(), "");
        assert_eq!(Cell::Stat(f64::NAN).render(), "NaN");
    }

    #[test]
    fn unknown_format() {
        assert!("xml".parse::<Format>().is_err());
        assert_eq!("json-lines".parse::<Format>().unwrap(), Format::JsonLines);
    }

    #[test]
    fn empty_csv_is_header_only() {
        let bundle = Bundle {
            config_hash: "abc".into(),
            seed_sample: 1,
            seed_train: 2,
            stages: Vec::new(),
            tables: vec![Table::new("t", "T", &["a", "b"])],
        };
        let dir = tempfile::tempdir().unwrap();
        let files = render(&bundle, Format::Csv, dir.path()).unwrap();
        assert_eq!(fs::read_to_string(&files[0]).unwrap(), "a,b,config_hash,seed_sample,seed_train\n");
        let files = render(&bundle, Format::JsonLines, dir.path()).unwrap();
        assert_eq!(fs::read_to_string(&files[0]).unwrap(), "");
    }
}
