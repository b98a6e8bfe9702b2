//! Report values: floats with 17 significant digits, rationals as "p/q".

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_rational::BigRational;
use serde_json::{Number, Value};

use hermitian_einstein::quot::poly::format_ratio;

/// A JSON number printed as `{:.16e}`; non-finite values become null.
pub fn float(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Number::from_str(&format!("{x:.16e}")).map(Value::Number).unwrap_or(Value::Null)
}

pub fn rational(x: &BigRational) -> Value {
    Value::String(format_ratio(x))
}

pub fn floats(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|x| float(*x)).collect())
}

/// Comma separated table with a header row.
#[derive(Clone, Debug, PartialEq)]
pub struct Csv {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Csv {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Csv {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(
            row.into_iter()
                .map(|c| match c {
                    Cell::Int(i) => i.to_string(),
                    Cell::Float(x) => format!("{x:.16e}"),
                    Cell::Text(s) => s,
                })
                .collect(),
        );
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Writes report.json plus the traces into `dir`; returns the paths written.
pub fn write_outputs(dir: &Path, report: &Value, traces: &[Csv]) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    written.push(path);
    for t in traces {
        let path = dir.join(format!("{}.csv", t.name));
        std::fs::write(&path, t.render())?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let v = float(0.1);
        assert_eq!(v.to_string(), "1.0000000000000001e-1");
        assert_eq!(float(f64::NAN), Value::Null);
        let back: f64 = v.to_string().parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn csv_renders_header_and_rows() {
        let mut t = Csv::new("trace", &["k", "dev"]);
        t.push(vec![Cell::Int(5), Cell::Float(0.5)]);
        assert_eq!(t.render(), "k,dev\n5,5.0000000000000000e-1\n");
    }
}
