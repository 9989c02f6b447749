//! Number formatting and file writers shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

/// `x` with `digits` significant digits, in the style of C's `%g`:
/// plain notation for moderate exponents, scientific otherwise, trailing
/// zeros dropped.
pub fn sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds every number in a JSON document to `digits` significant digits.
/// Non-finite numbers cannot be represented and become `null` on the way in.
pub fn round_json(v: &mut Value, digits: usize) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(x) = n.as_f64() {
                    let r: f64 = sig(x, digits).parse().unwrap_or(x);
                    *v = serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| round_json(x, digits)),
        Value::Object(map) => map.values_mut().for_each(|x| round_json(x, digits)),
        _ => {}
    }
}

/// Collects rows and writes RFC 4180 CSV.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_header(header: Vec<String>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for row in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = row.iter().map(|c| quote(c)).collect();
            out.push_str(&cells.join(","));
            out.push_str("\r\n");
        }
        out
    }
}

fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Output directory plus formatting settings.
#[derive(Debug, Clone)]
pub struct Sink {
    pub dir: PathBuf,
    pub format: Format,
    pub precision: usize,
}

impl Sink {
    pub fn new(dir: PathBuf, format: Format, precision: usize) -> Self {
        Sink {
            dir,
            format,
            precision,
        }
    }

    pub fn num(&self, x: f64) -> String {
        sig(x, self.precision)
    }

    fn write(&self, name: &str, body: &str) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir).map_err(|e| io_error(&self.dir, e))?;
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| io_error(&path, e))
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        self.write(name, &table.render())
    }

    /// Writes one JSON document, tagged with the schema version.
    pub fn json(&mut self, name: &str, mut doc: Value) -> Result<(), CliError> {
        if let Value::Object(map) = &mut doc {
            map.insert("schema".into(), Value::from(1));
        }
        round_json(&mut doc, self.precision);
        let mut body = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        body.push('\n');
        self.write(name, &body)
    }

    pub fn raw(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        self.write(name, body)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
