use std::io::Write;

use serde_json::{json, Map, Value};

use crate::args::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
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

/// Rows with a fixed column order. The last column is always `error`.
#[derive(Debug, Clone)]
pub struct Table {
    pub command: String,
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(command: &str, columns: &[&'static str]) -> Self {
        let mut columns = columns.to_vec();
        columns.push("error");
        Table { command: command.to_string(), metadata: Vec::new(), columns, rows: Vec::new() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    /// `values` fills every column but `error`.
    pub fn push(&mut self, values: Vec<Cell>, error: Option<String>) {
        debug_assert_eq!(values.len() + 1, self.columns.len());
        let mut row = values;
        row.push(error.map_or(Cell::Empty, Cell::Text));
        self.rows.push(row);
    }

    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| !matches!(r.last(), Some(Cell::Empty))).count()
    }

    pub fn render(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Csv => self.csv(),
            Format::Json => {
                let mut s = serde_json::to_vec_pretty(&self.json()).expect("serializable");
                s.push(b'\n');
                s
            }
        }
    }

    fn csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        for (k, v) in &self.metadata {
            writeln!(buf, "# {k}={v}").unwrap();
        }
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(&self.columns).unwrap();
        for row in &self.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::Num(v) => fmt_g17(*v),
                Cell::Text(t) => t.clone(),
                Cell::Empty => String::new(),
            }))
            .unwrap();
        }
        w.into_inner().expect("in-memory writer")
    }

    pub fn json(&self) -> Value {
        let meta: Map<String, Value> = self.metadata.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, cell)| {
                        let v = match cell {
                            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
                            Cell::Text(t) => Value::String(t.clone()),
                            Cell::Empty => Value::Null,
                        };
                        (c.to_string(), v)
                    })
                    .collect();
                Value::Object(obj)
            })
            .collect();
        json!({ "command": self.command, "metadata": meta, "columns": self.columns, "rows": rows })
    }
}

/// 17 significant digits, like C's `%.17g`.
pub fn fmt_g17(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let exp = v.abs().log10().floor() as i32;
    let sci = format!("{v:.16e}");
    // the rounded mantissa may carry into the next decade
    let exp = sci.rsplit_once('e').map_or(exp, |(_, e)| e.parse().unwrap_or(exp));
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let (mant, e) = sci.split_once('e').unwrap();
        let e: i32 = e.parse().unwrap();
        format!("{}e{}{:02}", trim_zeros(mant.to_string()), if e < 0 { '-' } else { '+' }, e.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
