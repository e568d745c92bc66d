//! Fixed-precision CSV and JSON emission.
//!
//! Every float is written with six decimals in CSV and rounded to six
//! decimals in JSON. An infinite budget is the string `inf` in both.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use permswap::Epsilon;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

pub const DECIMALS: usize = 6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

pub fn fixed(x: f64) -> String {
    if x.is_infinite() && x > 0.0 {
        "inf".into()
    } else {
        format!("{x:.DECIMALS$}")
    }
}

fn round(x: f64) -> Value {
    if x.is_infinite() && x > 0.0 {
        return Value::String("inf".into());
    }
    let scale = 10f64.powi(DECIMALS as i32);
    let r = (x * scale).round() / scale;
    Number::from_f64(if r == 0.0 { 0.0 } else { r }).map_or(Value::Null, Value::Number)
}

/// Rounds every float in `v` to the fixed precision.
pub fn fix_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => round(n.as_f64().expect("f64 number")),
        Value::Array(a) => Value::Array(a.into_iter().map(fix_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, fix_json(v))).collect()),
        other => other,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Value {
    fix_json(serde_json::to_value(value).expect("report types serialize"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Eps(Epsilon),
    Bool(bool),
    Str(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fixed(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Eps(e) => e.fmt_fixed(),
            Cell::Bool(b) => b.to_string(),
            Cell::Str(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => round(*x),
            Cell::Int(n) => Value::from(*n),
            Cell::Eps(e) => round(e.value()),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Str(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::Int(n)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<Epsilon> for Cell {
    fn from(e: Epsilon) -> Self {
        Cell::Eps(e)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Rows with named columns, emitted as CSV or as a JSON array of objects.
#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    /// CSV, or the JSON array when `json` is `None`; otherwise `json` itself.
    pub fn emit(&self, format: Format, path: Option<&Path>, json: Option<Value>) -> Result<()> {
        let mut sink = sink(path)?;
        match format {
            Format::Csv => self.write_csv(&mut sink)?,
            Format::Json => write_json(&mut sink, &json.unwrap_or_else(|| self.json()))?,
        }
        sink.flush()?;
        Ok(())
    }
}

/// Buffered writer for `path`, standard output when `None`.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_json<W: Write>(mut w: W, value: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}
