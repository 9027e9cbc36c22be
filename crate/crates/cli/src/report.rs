//! Output formatting shared by the subcommands: every number is printed
//! with 9 significant digits, as either machine-readable CSV or an aligned
//! human-readable summary.

use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Comma-separated values with a header row.
    Csv,
    /// Aligned human-readable text.
    Summary,
}

/// Format with 9 significant digits, using plain decimal notation for
/// moderate magnitudes and scientific notation otherwise.
pub fn sig9(x: f64) -> String {
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
    let mag = x.abs().log10().floor() as i32;
    if (-4..9).contains(&mag) {
        let decimals = (8 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.8e}")
    }
}

pub fn sig9_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), sig9)
}

/// A rectangular table with fixed headers.
pub struct Table {
    headers: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: Vec<&'static str>) -> Self {
        Self {
            headers,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write(&self, format: Format, w: &mut dyn Write) -> io::Result<()> {
        match format {
            Format::Csv => {
                writeln!(w, "{}", self.headers.join(","))?;
                for row in &self.rows {
                    writeln!(w, "{}", row.join(","))?;
                }
            }
            Format::Summary => {
                let mut widths: Vec<usize> = self.headers.iter().map(|h| h.len()).collect();
                for row in &self.rows {
                    for (i, cell) in row.iter().enumerate() {
                        widths[i] = widths[i].max(cell.len());
                    }
                }
                let header: Vec<String> = self
                    .headers
                    .iter()
                    .zip(&widths)
                    .map(|(h, w)| format!("{h:>w$}"))
                    .collect();
                writeln!(w, "{}", header.join("  "))?;
                for row in &self.rows {
                    let cells: Vec<String> = row
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:>w$}"))
                        .collect();
                    writeln!(w, "{}", cells.join("  "))?;
                }
            }
        }
        Ok(())
    }
}

/// An ordered key/value report. CSV form uses a `key,value` header.
pub struct Report {
    entries: Vec<(&'static str, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, key: &'static str, value: impl Into<String>) {
        self.entries.push((key, value.into()));
    }

    pub fn write(&self, format: Format, w: &mut dyn Write) -> io::Result<()> {
        match format {
            Format::Csv => {
                writeln!(w, "key,value")?;
                for (k, v) in &self.entries {
                    writeln!(w, "{k},{v}")?;
                }
            }
            Format::Summary => {
                let width = self.entries.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (k, v) in &self.entries {
                    writeln!(w, "{k:<width$}  {v}")?;
                }
            }
        }
        Ok(())
    }
}
