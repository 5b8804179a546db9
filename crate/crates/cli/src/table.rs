//! In-memory table emitted as CSV or JSON with a fixed number of significant
//! digits, so that output bytes depend only on the configuration.

use std::io::Write;

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Flag(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
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

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// `digits` significant digits in scientific notation; `inf`, `-inf`, `nan`
/// for non-finite values.
pub fn format_number(v: f64, digits: usize) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{:.*e}", digits - 1, v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub command: &'static str,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Free-text remarks, e.g. regime notes. Emitted in JSON only.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(command: &'static str, columns: &[&str]) -> Self {
        Table { command, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn write(&self, format: Format, digits: usize, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Csv => self.write_csv(digits, out),
            Format::Json => self.write_json(digits, out),
        }
    }

    fn write_csv(&self, digits: usize, out: &mut dyn Write) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::Num(v) => format_number(*v, digits),
                Cell::Text(s) => s.clone(),
                Cell::Flag(b) => b.to_string(),
                Cell::Empty => String::new(),
            }))?;
        }
        w.flush()
    }

    fn write_json(&self, digits: usize, out: &mut dyn Write) -> std::io::Result<()> {
        let quote = |s: &str| serde_json::to_string(s).expect("strings always serialize");
        let cell = |c: &Cell| match c {
            Cell::Num(v) if v.is_finite() => format_number(*v, digits),
            Cell::Num(_) | Cell::Empty => "null".into(),
            Cell::Text(s) => quote(s),
            Cell::Flag(b) => b.to_string(),
        };
        writeln!(out, "{{")?;
        writeln!(out, "  \"command\": {},", quote(self.command))?;
        let notes: Vec<String> = self.notes.iter().map(|n| quote(n)).collect();
        writeln!(out, "  \"notes\": [{}],", notes.join(", "))?;
        writeln!(out, "  \"rows\": [")?;
        for (i, row) in self.rows.iter().enumerate() {
            let fields: Vec<String> =
                self.columns.iter().zip(row).map(|(k, c)| format!("{}: {}", quote(k), cell(c))).collect();
            let sep = if i + 1 < self.rows.len() { "," } else { "" };
            writeln!(out, "    {{{}}}{sep}", fields.join(", "))?;
        }
        writeln!(out, "  ]")?;
        writeln!(out, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("demo", &["name", "value", "ok"]);
        t.push(vec!["a, b".into(), 1234.5678.into(), true.into()]);
        t.push(vec!["c".into(), f64::INFINITY.into(), Cell::Empty]);
        t.notes.push("say \"hi\"".into());
        t
    }

    #[test]
    fn numbers_round_trip_at_declared_precision() {
        for v in [0.1, -2.5e-300, 1.0 / 3.0, 6.02214076e23, -0.0] {
            for digits in [6, 10, 17] {
                let s = format_number(v, digits);
                let back: f64 = s.parse().unwrap();
                assert_eq!(back.is_sign_negative(), v.is_sign_negative(), "{s}");
                assert!((back - v).abs() <= v.abs() * 10f64.powi(1 - digits as i32), "{s}");
            }
            assert_eq!(format_number(v, 17).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_number(1234.5678, 6), "1.23457e3");
        assert_eq!(format_number(f64::NEG_INFINITY, 6), "-inf");
    }

    #[test]
    fn csv_quotes_text() {
        let mut buf = Vec::new();
        sample().write(Format::Csv, 6, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "name,value,ok\n\"a, b\",1.23457e3,true\nc,inf,\n");
    }

    #[test]
    fn json_is_valid_and_nulls_non_finite() {
        let mut buf = Vec::new();
        sample().write(Format::Json, 6, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["command"], "demo");
        assert_eq!(v["notes"][0], "say \"hi\"");
        assert_eq!(v["rows"][0]["value"].as_f64(), Some(1234.57));
        assert!(v["rows"][1]["value"].is_null());
    }
}
