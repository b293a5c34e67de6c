//! Tables with fixed numeric formatting, written as CSV or JSON and read
//! back for resumed sweeps.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

/// Significant digits of every floating-point field.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// `x` with 12 significant digits: fixed notation for moderate magnitudes,
/// scientific otherwise.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return format!("{:.*}", SIGNIFICANT_DIGITS - 1, 0.0);
    }
    // the exponent of the correctly rounded mantissa handles carries
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let exponent: i32 = sci[sci.find('e').expect("scientific format") + 1..]
        .parse()
        .expect("integer exponent");
    let decimals = SIGNIFICANT_DIGITS as i32 - 1 - exponent;
    if (0..=20).contains(&decimals) {
        format!("{:.*}", decimals as usize, x)
    } else {
        sci
    }
}

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    format_sig(x).parse().unwrap_or(x)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            Cell::Text(_) => None,
        }
    }

    fn parse(s: &str) -> Self {
        if let Ok(i) = i64::from_str(s) {
            return Cell::Int(i);
        }
        match s {
            "NaN" => Cell::Float(f64::NAN),
            _ => f64::from_str(s).map_or_else(|_| Cell::Text(s.to_string()), Cell::Float),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Float(x) => Number::from_f64(round_sig(*x)).map_or(Value::Null, Value::Number),
            Cell::Int(i) => Value::Number((*i).into()),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }

    fn from_json(v: &Value) -> Result<Self> {
        Ok(match v {
            Value::Null => Cell::Float(f64::NAN),
            Value::Number(n) if n.is_i64() => Cell::Int(n.as_i64().expect("checked")),
            Value::Number(n) => Cell::Float(n.as_f64().unwrap_or(f64::NAN)),
            Value::String(s) => Cell::Text(s.clone()),
            other => return Err(Error::Config(format!("unexpected JSON value {other}"))),
        })
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Float(x) => f.write_str(&format_sig(*x)),
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::Config(format!("unknown format {s:?} (csv or json)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    /// Sort rows by the numeric value of `key` (ties keep input order).
    pub fn sort_by_key(&mut self, key: &str) {
        if let Some(i) = self.column_index(key) {
            self.rows.sort_by(|a, b| {
                let x = a[i].as_f64().unwrap_or(f64::NAN);
                let y = b[i].as_f64().unwrap_or(f64::NAN);
                x.total_cmp(&y)
            });
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (k, c) in self.columns.iter().zip(row) {
                    m.insert(k.clone(), c.to_json());
                }
                Value::Object(m)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&Value::Array(rows))?;
        s.push('\n');
        Ok(s)
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(Cell::parse).collect());
        }
        Ok(Self { columns, rows })
    }

    pub fn from_json(text: &str, columns: &[&str]) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let arr = v
            .as_array()
            .ok_or_else(|| Error::Config("JSON output is not an array".into()))?;
        let mut t = Table::new(columns);
        for obj in arr {
            let row = columns
                .iter()
                .map(|c| {
                    obj.get(*c)
                        .ok_or_else(|| Error::Config(format!("JSON row lacks {c:?}")))
                        .and_then(Cell::from_json)
                })
                .collect::<Result<Vec<_>>>()?;
            t.push(row);
        }
        Ok(t)
    }

    /// Rows already present in a previous output file with the same columns.
    pub fn read_existing(path: &Path, format: OutputFormat, columns: &[&str]) -> Result<Option<Self>> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        if text.trim().is_empty() {
            return Ok(None);
        }
        let t = match format {
            OutputFormat::Csv => Self::from_csv(&text)?,
            OutputFormat::Json => Self::from_json(&text, columns)?,
        };
        if t.columns.iter().map(String::as_str).ne(columns.iter().copied()) {
            return Err(Error::Config(format!(
                "{} has columns {:?}, expected {:?}",
                path.display(),
                t.columns,
                columns
            )));
        }
        Ok(Some(t))
    }

    /// Write to `path` (via a temporary file and rename) or to stdout.
    pub fn write(&self, path: Option<&Path>, format: OutputFormat) -> Result<()> {
        let text = self.render(format)?;
        match path {
            Some(p) => {
                let tmp = p.with_extension("partial");
                fs::write(&tmp, text)?;
                fs::rename(&tmp, p)?;
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())?;
                out.flush()?;
            }
        }
        Ok(())
    }
}
