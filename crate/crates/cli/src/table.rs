use std::io::Write;

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Missing,
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

impl Cell {
    /// Shortest decimal that parses back to the same value.
    fn text(&self) -> String {
        match *self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match *self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) if v.is_finite() => json!(v),
            _ => Value::Null,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .header
                        .iter()
                        .zip(row)
                        .map(|(k, c)| (k.clone(), c.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_shortest_round_trip() {
        let mut t = Table::new(&["N", "x", "y"]);
        t.push(vec![4u64.into(), 0.1.into(), None.into()]);
        t.push(vec![1u64.into(), 2.0.into(), Some(1.0 / 3.0).into()]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "N,x,y\n4,0.1,\n1,2,0.3333333333333333\n");
        let back: f64 = "0.3333333333333333".parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn json_rows_are_keyed_by_header() {
        let mut t = Table::new(&["N", "v"]);
        t.push(vec![3u64.into(), f64::NAN.into()]);
        assert_eq!(t.json_rows(), json!([{ "N": 3, "v": null }]));
    }
}
