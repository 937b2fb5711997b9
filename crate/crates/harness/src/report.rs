//! Table model with markdown and CSV renderers.
//!
//! Both renderers print numbers from the same full-precision values: CSV
//! always at 6 decimals, markdown at the requested precision. Stars, bold,
//! percent signs and NA/-- placeholders are markdown-only; CSV cells hold
//! bare numbers and leave missing values empty.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::store::write_atomic;

pub const CSV_PRECISION: usize = 6;
pub const DEFAULT_PRECISION: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    /// `None` renders as `NA`.
    Number {
        value: Option<f64>,
        star: bool,
        bold: bool,
    },
    /// A percentage; `None` renders as `--`.
    Percent(Option<f64>),
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn num(value: Option<f64>) -> Self {
        Cell::Number { value, star: false, bold: false }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Cell::Number { value, .. } | Cell::Percent(value) => *value,
            Cell::Text(_) => None,
        }
    }

    fn plain(&self, precision: usize) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Number { value: Some(v), .. } => fmt_num(*v, precision),
            Cell::Number { value: None, .. } => "NA".into(),
            Cell::Percent(Some(v)) => format!("{}%", fmt_num(*v, precision)),
            Cell::Percent(None) => "--".into(),
        }
    }

    /// Bare number for CSV: no percent sign, empty when missing.
    fn machine(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Number { value, .. } | Cell::Percent(value) => {
                value.map(|v| fmt_num(v, CSV_PRECISION)).unwrap_or_default()
            }
        }
    }

    fn markdown(&self, precision: usize) -> String {
        let mut s = self.plain(precision).replace('|', "\\|");
        if let Cell::Number { value: Some(_), star, bold } = self {
            if *star {
                s.push('*');
            }
            if *bold {
                s = format!("**{s}**");
            }
        }
        s
    }
}

fn fmt_num(v: f64, precision: usize) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    let s = format!("{v:.precision$}");
    // no "-0.000"
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem, e.g. `similarity`.
    pub name: String,
    pub title: String,
    pub caption: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, title: &str, header: Vec<String>) -> Self {
        Table { name: name.into(), title: title.into(), caption: None, header, rows: Vec::new() }
    }

    pub fn render_markdown(&self, precision: usize) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "### {}\n", self.title);
        let _ = writeln!(out, "| {} |", self.header.join(" | "));
        let _ = writeln!(out, "|{}", " --- |".repeat(self.header.len()));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.markdown(precision)).collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        if let Some(c) = &self.caption {
            let _ = writeln!(out, "\n{c}");
        }
        out
    }

    pub fn render_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::machine))?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `<name>.md` and `<name>.csv`; returns both paths.
    pub fn write(&self, dir: &Path, precision: usize) -> Result<[PathBuf; 2]> {
        let md = dir.join(format!("{}.md", self.name));
        let csv = dir.join(format!("{}.csv", self.name));
        write_atomic(&md, self.render_markdown(precision).as_bytes())?;
        write_atomic(&csv, self.render_csv()?.as_bytes())?;
        Ok([md, csv])
    }
}

/// Marks the largest value of each numeric column in bold (ties all bold).
pub fn bold_column_maxima(table: &mut Table) {
    let width = table.header.len();
    for col in 0..width {
        let max = table
            .rows
            .iter()
            .filter_map(|r| r.get(col).and_then(Cell::value))
            .filter(|v| v.is_finite())
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        let Some(max) = max else { continue };
        for row in &mut table.rows {
            if let Some(Cell::Number { value: Some(v), bold, .. }) = row.get_mut(col) {
                *bold = *v == max;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("t", "Sample", vec!["Row".into(), "a".into(), "b".into()]);
        t.rows.push(vec![Cell::text("x"), Cell::num(Some(0.123_456_789)), Cell::Percent(Some(800.0))]);
        t.rows.push(vec![
            Cell::text("y|z"),
            Cell::Number { value: Some(0.5), star: true, bold: false },
            Cell::Percent(None),
        ]);
        t.rows.push(vec![Cell::text("w"), Cell::num(None), Cell::num(Some(-0.000_000_1))]);
        t
    }

    #[test]
    fn markdown_layout() {
        let mut t = sample();
        bold_column_maxima(&mut t);
        let md = t.render_markdown(3);
        assert!(md.contains("| Row | a | b |"));
        assert!(md.contains("| x | 0.123 | 800.000% |"));
        assert!(md.contains("| y\\|z | **0.500*** | -- |"));
        assert!(md.contains("| w | NA | 0.000 |"));
    }

    #[test]
    fn csv_has_six_decimals_and_no_decorations() {
        let csv = sample().render_csv().unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "Row,a,b");
        assert_eq!(lines[1], "x,0.123457,800.000000");
        assert_eq!(lines[2], "y|z,0.500000,");
        assert_eq!(lines[3], "w,,0.000000");
    }
}
