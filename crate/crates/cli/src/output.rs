//! Number formatting, aligned tables and the JSON envelope.

use std::fmt::Write as _;

use serde_json::{Map, Value};

/// Version of the JSON output schema.
pub const SCHEMA_VERSION: u64 = 1;

/// `%.{digits}g`-style formatting: `digits` significant digits, trailing
/// zeros trimmed, scientific notation outside [1e-4, 10^digits).
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    // Round once in scientific form so the exponent already accounts for
    // carries like 9.9999996 -> 10.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        return format!("{}e{exp}", trim_zeros(mantissa));
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

/// Table cells use 6 significant digits.
pub fn num(x: f64) -> String {
    sig(x, 6)
}

/// A left-aligned text table with a header row.
pub struct Table {
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            rows: vec![header.into_iter().map(Into::into).collect()],
        }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) {
        self.rows.push(cells.into_iter().map(Into::into).collect());
    }

    pub fn render(&self) -> String {
        let cols = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let widths: Vec<usize> = (0..cols)
            .map(|c| {
                self.rows
                    .iter()
                    .filter_map(|r| r.get(c))
                    .map(|s| s.chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for row in &self.rows {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c + 1 == row.len() {
                    line.push_str(cell);
                } else {
                    let pad = widths[c] - cell.chars().count();
                    let _ = write!(line, "{cell}{:pad$}  ", "");
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

/// Wraps a command's payload in the versioned envelope.
pub fn envelope(command: &str, timestamp: Option<u64>, payload: Value) -> Value {
    let mut obj = Map::new();
    obj.insert("spec".into(), Value::from(SCHEMA_VERSION));
    obj.insert("command".into(), Value::from(command));
    if let Some(t) = timestamp {
        obj.insert("timestamp".into(), Value::from(t));
    }
    match payload {
        Value::Object(fields) => obj.extend(fields),
        other => {
            obj.insert("result".into(), other);
        }
    }
    Value::Object(obj)
}

pub fn render_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(1.0), "1");
        assert_eq!(num(-1.0 / 3.0), "-0.333333");
        assert_eq!(num(1.0 / 9.0), "0.111111");
        assert_eq!(num(123456.7), "123457");
        assert_eq!(num(1234567.0), "1.23457e6");
        assert_eq!(num(0.99999996), "1");
        assert_eq!(num(2.5e-7), "2.5e-7");
        assert_eq!(num(0.00012345678), "0.000123457");
        assert_eq!(sig(0.1, 17), "0.10000000000000001");
        assert_eq!(sig(0.5, 17), "0.5");
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn seventeen_digits_round_trip() {
        let mut x = 0.123_f64;
        for _ in 0..1000 {
            x = (x * 7.31 + 0.17).fract();
            assert_eq!(sig(x, 17).parse::<f64>().unwrap(), x);
        }
        for x in [1e-9, 3.0e-6 + 1e-22, 0.999_999_999_999_999_9] {
            assert_eq!(sig(x, 17).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn table_alignment() {
        let mut t = Table::new(["a", "long header", "c"]);
        t.row(["wide cell", "x", "y"]);
        let r = t.render();
        let lines: Vec<&str> = r.lines().collect();
        assert_eq!(lines[0], "a          long header  c");
        assert_eq!(lines[1], "wide cell  x            y");
    }

    #[test]
    fn envelope_carries_version() {
        let v = envelope("measure", None, serde_json::json!({"x": 1.5}));
        assert_eq!(v["spec"], 1);
        assert_eq!(v["command"], "measure");
        assert_eq!(v["x"], 1.5);
        assert!(v.get("timestamp").is_none());
    }
}
