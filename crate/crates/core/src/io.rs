//! Plain-text data files.
//!
//! Every CSV is comma-separated with a header row and LF line endings.
//! Floats are written with 17 significant digits (`{:.16e}`), which is
//! enough for `str::parse` to recover the exact `f64`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::panel::{Panel, PanelError};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_f64(field: &str) -> Result<f64, String> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("bad number {field:?}: {e}"))
}

/// A header row and numeric records.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Values of the named column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Columns listed in `int_columns` are written as integers.
    pub fn to_csv(&self, int_columns: &[&str]) -> String {
        let is_int: Vec<bool> = self
            .header
            .iter()
            .map(|h| int_columns.contains(&h.as_str()))
            .collect();
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .zip(&is_int)
                .map(|(&v, &int)| if int { format!("{}", v as i64) } else { fmt_f64(v) })
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or("empty file")?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(parse_f64)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("record {}: {e}", i + 1))?;
            if row.len() != header.len() {
                return Err(format!(
                    "record {}: {} fields, header has {}",
                    i + 1,
                    row.len(),
                    header.len()
                ));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }
}

/// Panel as `t,a0,a1,...` with one row per time step.
pub fn panel_to_csv(panel: &Panel) -> String {
    let mut out = String::with_capacity(panel.assets() * panel.len() * 24);
    out.push('t');
    for k in 0..panel.assets() {
        out.push_str(&format!(",a{k}"));
    }
    out.push('\n');
    for t in 0..panel.len() {
        out.push_str(&t.to_string());
        for k in 0..panel.assets() {
            out.push(',');
            out.push_str(&fmt_f64(panel.get(k, t)));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum PanelCsvError {
    #[error("panel csv: {0}")]
    Format(String),
    #[error(transparent)]
    Panel(#[from] PanelError),
}

pub fn panel_from_csv(text: &str) -> Result<Panel, PanelCsvError> {
    let table = Table::from_csv(text).map_err(PanelCsvError::Format)?;
    let assets = table.header.len().saturating_sub(1);
    if table.header.first().map(String::as_str) != Some("t") {
        return Err(PanelCsvError::Format("first column must be t".into()));
    }
    let len = table.rows.len();
    let mut values = vec![0.0; assets * len];
    for (t, row) in table.rows.iter().enumerate() {
        for k in 0..assets {
            values[k * len + t] = row[k + 1];
        }
    }
    Ok(Panel::from_row_major(assets, len, values)?)
}

/// Writes `contents` through a `<name>.partial` file that is renamed into
/// place once complete, so an interrupted run leaves the marker behind.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let partial = partial_path(path);
    {
        let mut f = io::BufWriter::new(fs::File::create(&partial)?);
        f.write_all(contents.as_bytes())?;
        f.flush()?;
    }
    fs::rename(&partial, path)
}

pub fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}
