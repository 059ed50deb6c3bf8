//! Tabular results as CSV or JSON, with floats rounded to 9 significant
//! digits so both formats carry identical values.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value as Json};

use crate::config::Format;

pub const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<Option<bool>> for Cell {
    fn from(v: Option<bool>) -> Self {
        v.map_or(Cell::Empty, Cell::Bool)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<String>> for Cell {
    fn from(v: Option<String>) -> Self {
        v.map_or(Cell::Empty, Cell::Text)
    }
}

/// `x` with 9 significant digits: positional notation for magnitudes in
/// `[1e-4, 1e9)`, scientific otherwise.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let rounded: f64 = sci.parse().expect("round trip");
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        let s = format!("{rounded:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let (mantissa, exp) = sci.split_once('e').expect("exponent");
        let mantissa = if mantissa.contains('.') { mantissa.trim_end_matches('0').trim_end_matches('.') } else { mantissa };
        format!("{mantissa}e{exp}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format_sig(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Cell::Num(x) if x.is_finite() => {
                let v: f64 = format_sig(*x).parse().expect("formatted float parses");
                serde_json::Number::from_f64(v).map_or(Json::Null, Json::Number)
            }
            Cell::Num(_) | Cell::Empty => Json::Null,
            Cell::Int(i) => Json::from(*i),
            Cell::Bool(b) => Json::Bool(*b),
            Cell::Text(s) => Json::String(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self, stamp: Option<&str>) -> anyhow::Result<Vec<u8>> {
        let mut buf = Vec::new();
        if let Some(s) = stamp {
            writeln!(buf, "# {s}")?;
        }
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv))?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn to_json(&self, stamp: Option<&str>) -> anyhow::Result<Vec<u8>> {
        let rows: Vec<Json> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Json> =
                    self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect();
                Json::Object(obj)
            })
            .collect();
        let mut top = Map::new();
        if let Some(s) = stamp {
            top.insert("generated".into(), Json::String(s.into()));
        }
        top.insert("rows".into(), Json::Array(rows));
        let mut out = serde_json::to_vec_pretty(&Json::Object(top))?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn render(&self, format: Format, stamp: Option<&str>) -> anyhow::Result<Vec<u8>> {
        match format {
            Format::Csv => self.to_csv(stamp),
            Format::Json => self.to_json(stamp),
        }
    }
}

pub fn timestamp() -> String {
    format!(
        "generated {} by qmoney {}",
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        env!("CARGO_PKG_VERSION")
    )
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig(0.1), "0.1");
        assert_eq!(format_sig(std::f64::consts::PI), "3.14159265");
        assert_eq!(format_sig(-0.000123456789123), "-0.000123456789");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig(2.5e-7), "2.5e-7");
        assert_eq!(format_sig(123456789012.0), "1.23456789e11");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(9.9999999999), "10");
    }

    #[test]
    fn csv_and_json_agree() {
        let mut t = Table::new(&["a", "b", "c", "d"]);
        t.push(vec![Cell::Num(1.0 / 7.0), Cell::Empty, Cell::Bool(true), Cell::Text("x".into())]);
        let csv = String::from_utf8(t.to_csv(None).unwrap()).unwrap();
        assert_eq!(csv, "a,b,c,d\n0.142857143,,true,x\n");
        let json: Json = serde_json::from_slice(&t.to_json(None).unwrap()).unwrap();
        let a = json["rows"][0]["a"].as_f64().unwrap();
        assert_eq!(format_sig(a), "0.142857143");
        assert!(json["rows"][0]["b"].is_null());
        assert!(json.get("generated").is_none());
    }

    #[test]
    fn stamp_is_a_comment_line() {
        let t = Table::new(&["a"]);
        let csv = String::from_utf8(t.to_csv(Some("generated now")).unwrap()).unwrap();
        assert_eq!(csv, "# generated now\na\n");
    }
}
