//! Deterministic tabular and JSON writers.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Value};

use super::config::OutputFormat;
use super::CliError;

/// Named equal-length columns; an optional integer column is printed without exponent.
pub(crate) struct Series<'a> {
    cols: Vec<(&'a str, &'a [f64])>,
    counts: Option<(&'a str, &'a [f64])>,
    counts_first: bool,
}

impl<'a> Series<'a> {
    pub(crate) fn new(cols: &[(&'a str, &'a [f64])]) -> Self {
        Self { cols: cols.to_vec(), counts: None, counts_first: false }
    }

    pub(crate) fn with_counts(mut self, name: &'a str, v: &'a [f64]) -> Self {
        self.counts = Some((name, v));
        self
    }

    pub(crate) fn counts_first(mut self) -> Self {
        self.counts_first = true;
        self
    }

    fn rows(&self) -> usize {
        self.cols.first().map(|c| c.1.len()).or(self.counts.map(|c| c.1.len())).unwrap_or(0)
    }

    fn csv(&self) -> String {
        let mut names: Vec<&str> = self.cols.iter().map(|c| c.0).collect();
        if let Some((n, _)) = self.counts {
            if self.counts_first {
                names.insert(0, n);
            } else {
                names.push(n);
            }
        }
        let mut s = names.join(",");
        s.push('\n');
        for r in 0..self.rows() {
            let mut fields: Vec<String> = self.cols.iter().map(|c| format!("{:.16e}", c.1[r])).collect();
            if let Some((_, v)) = self.counts {
                let f = format!("{}", v[r] as u64);
                if self.counts_first {
                    fields.insert(0, f);
                } else {
                    fields.push(f);
                }
            }
            let _ = writeln!(s, "{}", fields.join(","));
        }
        s
    }

    fn json(&self) -> Value {
        let mut m = Map::new();
        if let Some((n, v)) = self.counts {
            m.insert(n.into(), Value::from(v.iter().map(|x| *x as u64).collect::<Vec<_>>()));
        }
        for (n, v) in &self.cols {
            m.insert((*n).into(), Value::from(v.to_vec()));
        }
        Value::Object(m)
    }
}

pub(crate) fn write_columns(dir: &Path, stem: &str, format: OutputFormat, s: &Series<'_>) -> Result<(), CliError> {
    match format {
        OutputFormat::Csv => write_text(&dir.join(format!("{stem}.csv")), &s.csv()),
        OutputFormat::Json => write_json(&dir.join(format!("{stem}.json")), &s.json()),
    }
}

pub(crate) fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).expect("value serializes");
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
