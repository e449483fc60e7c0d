//! Result documents: a metadata header, an optional table and an optional
//! summary object, rendered as CSV (header as `#` comments) or JSON.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Writes every float as `{:.16e}` (17 significant digits).
#[derive(Clone, Copy, Default)]
pub struct FixedDigits;

impl serde_json::ser::Formatter for FixedDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", fmt_f64(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Compact JSON with fixed-digit floats.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// SHA-256 of the canonical JSON form.
pub fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    hex::encode(Sha256::digest(to_json(value).as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(i64::from(v))
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Key of the row array in JSON output.
    pub key: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { key: "rows", columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn keyed(mut self, key: &'static str) -> Self {
        self.key = key;
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Default)]
pub struct Document {
    pub meta: Map<String, Value>,
    pub summary: Map<String, Value>,
    pub table: Option<Table>,
}

impl Document {
    pub fn render_csv(&self) -> io::Result<Vec<u8>> {
        let mut out = Vec::new();
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {}", scalar_text(v))?;
        }
        for (k, v) in &self.summary {
            writeln!(out, "# {k}: {}", scalar_text(v))?;
        }
        if let Some(t) = &self.table {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&t.columns)?;
            for row in &t.rows {
                w.write_record(row.iter().map(Cell::csv))?;
            }
            w.flush()?;
        }
        Ok(out)
    }

    pub fn render_json(&self) -> Vec<u8> {
        let mut doc = Map::new();
        doc.insert("meta".into(), Value::Object(self.meta.clone()));
        for (k, v) in &self.summary {
            doc.insert(k.clone(), v.clone());
        }
        if let Some(t) = &self.table {
            doc.insert("columns".into(), t.columns.iter().map(|c| Value::from(*c)).collect());
            let rows = t.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
            doc.insert(t.key.into(), Value::Array(rows));
        }
        let mut s = to_json(&Value::Object(doc));
        s.push('\n');
        s.into_bytes()
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => to_json(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(to_json(&[0.5, 1.0]), "[5.0000000000000000e-1,1.0000000000000000e0]");
        let v: f64 = fmt_f64(std::f64::consts::PI).parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
    }

    #[test]
    fn csv_quotes_text() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![Cell::from("x, y"), Cell::from(2.0)]);
        let d = Document { table: Some(t), ..Document::default() };
        let s = String::from_utf8(d.render_csv().unwrap()).unwrap();
        assert_eq!(s, "a,b\n\"x, y\",2.0000000000000000e0\n");
    }

    #[test]
    fn json_rows_keyed() {
        let mut t = Table::new(&["y", "mc"]).keyed("G0y_table");
        t.push(vec![Cell::from(1.0), Cell::Empty]);
        let mut d = Document { table: Some(t), ..Document::default() };
        d.summary.insert("eta".into(), Value::from(1.0));
        let v: Value = serde_json::from_slice(&d.render_json()).unwrap();
        assert_eq!(v["eta"], 1.0);
        assert_eq!(v["G0y_table"][0][1], Value::Null);
    }
}
