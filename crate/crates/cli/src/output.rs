//! CSV output with `%g`-style numbers.

use std::fs;
use std::path::{Path, PathBuf};

use crate::AppError;

/// Formats `x` like C's `%.6g`: six significant digits, trailing zeros
/// dropped, scientific notation outside `[1e-4, 1e6)`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs());
    }
    trim_zeros(&format!("{x:.*}", (5 - exp) as usize)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One output table.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells.into_iter().map(Cell::render).collect());
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf, AppError> {
        let path = dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
        w.write_record(&self.header).map_err(|e| AppError::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| AppError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| AppError::Io(e.to_string()))?;
        Ok(path)
    }
}

/// A table cell.
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(self) -> String {
        match self {
            Cell::Num(x) => fmt_g(x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s,
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

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), AppError> {
    fs::create_dir_all(dir).map_err(|e| AppError::Io(format!("cannot create {}: {e}", dir.display())))
}

#[cfg(test)]
mod tests {
    use super::fmt_g;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (0.1031, "0.1031"),
            (0.103_123_456, "0.103123"),
            (87.516_04, "87.516"),
            (1.0, "1"),
            (123_456.7, "123457"),
            (999_999.7, "1e+06"),
            (1_234_567.0, "1.23457e+06"),
            (0.000_123_456_7, "0.000123457"),
            (0.000_012_345_67, "1.23457e-05"),
            (-2.5, "-2.5"),
            (0.0, "0"),
            (f64::NAN, "nan"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g(x), want, "{x}");
        }
    }
}
