//! Rolling equal-time cross-correlation matrices.
//!
//! For a window of `M` steps ending (exclusively) at `window_end`,
//! `C_kj = (1/M) sum_i m_k(t_i) m_j(t_i)` where `m` is the series
//! standardized over that window. With [`Normalization::Global`] the
//! standardization uses full-series moments instead, which is the literal
//! composition of the two formulas but no longer gives a unit diagonal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{fmt_f64, parse_f64};
use crate::panel::Panel;
use crate::series;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum XcorrError {
    #[error("invalid window spec: {0}")]
    InvalidSpec(String),
    #[error("series length {len} is shorter than the window {window}")]
    TooShort { len: usize, window: usize },
    #[error("correlation matrix csv: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationMode {
    Return,
    AbsoluteReturn,
}

impl CorrelationMode {
    pub fn tag(self) -> &'static str {
        match self {
            CorrelationMode::Return => "return",
            CorrelationMode::AbsoluteReturn => "absolute-return",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Standardize each asset inside every window.
    Window,
    /// Standardize each asset once over the whole series.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window: usize,
    pub stride: usize,
    pub mode: CorrelationMode,
    pub normalization: Normalization,
}

impl WindowSpec {
    /// `M = 400`, non-overlapping, window-local normalization.
    pub fn new(window: usize, mode: CorrelationMode) -> Self {
        Self {
            window,
            stride: window,
            mode,
            normalization: Normalization::Window,
        }
    }

    pub fn validate(&self) -> Result<(), XcorrError> {
        if self.window < 1 || self.stride < 1 {
            return Err(XcorrError::InvalidSpec(
                "window and stride must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// `floor((T - M) / stride) + 1` for `T >= M`.
    pub fn window_count(&self, len: usize) -> usize {
        if len < self.window {
            0
        } else {
            (len - self.window) / self.stride + 1
        }
    }

    pub fn window_ends(&self, len: usize) -> Vec<usize> {
        (0..self.window_count(len))
            .map(|i| self.window + i * self.stride)
            .collect()
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self::new(400, CorrelationMode::Return)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    /// One past the last time index in the window.
    pub window_end: usize,
    entries: Vec<f64>,
    /// Assets with zero variance in this window; their rows and columns are
    /// zero except for a unit diagonal.
    pub degenerate: Vec<usize>,
}

impl CorrelationMatrix {
    pub fn from_entries(n: usize, window_end: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), n * n, "correlation matrix must be n x n");
        Self {
            n,
            window_end,
            entries,
            degenerate: Vec::new(),
        }
    }

    pub fn identity(n: usize, window_end: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self::from_entries(n, window_end, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.entries[k * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.n {
            for j in 0..k {
                worst = worst.max((self.get(k, j) - self.get(j, k)).abs());
            }
        }
        worst
    }

    /// Dense CSV with header `k,c0,...,c{N-1}`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k");
        for j in 0..self.n {
            out.push_str(&format!(",c{j}"));
        }
        out.push('\n');
        for k in 0..self.n {
            out.push_str(&k.to_string());
            for j in 0..self.n {
                out.push(',');
                out.push_str(&fmt_f64(self.get(k, j)));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, window_end: usize) -> Result<Self, XcorrError> {
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| XcorrError::Parse("empty".into()))?;
        let n = header.split(',').count() - 1;
        let mut entries = Vec::with_capacity(n * n);
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n + 1 {
                return Err(XcorrError::Parse(format!("row has {} fields", fields.len())));
            }
            for f in &fields[1..] {
                entries.push(parse_f64(f).map_err(XcorrError::Parse)?);
            }
        }
        if entries.len() != n * n {
            return Err(XcorrError::Parse(format!("expected {n} rows")));
        }
        Ok(Self::from_entries(n, window_end, entries))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegenerateWindow {
    pub asset: usize,
    pub window_end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub spec: WindowSpec,
    pub matrices: Vec<CorrelationMatrix>,
    pub degenerate: Vec<DegenerateWindow>,
}

/// Correlation matrices for every window end `M, M + stride, ...`, in time
/// order. In absolute-return mode the panel is replaced by `|R|` first.
pub fn rolling_correlations(panel: &Panel, spec: &WindowSpec) -> Result<CorrelationSeries, XcorrError> {
    spec.validate()?;
    if panel.len() < spec.window {
        return Err(XcorrError::TooShort {
            len: panel.len(),
            window: spec.window,
        });
    }
    let source = match spec.mode {
        CorrelationMode::Return => panel.clone(),
        CorrelationMode::AbsoluteReturn => panel.map(f64::abs),
    };
    // Global normalization: standardize once, then each window just averages
    // products. `None` marks a zero-variance asset.
    let global: Option<Vec<Option<Vec<f64>>>> = match spec.normalization {
        Normalization::Window => None,
        Normalization::Global => Some(source.rows().map(|r| series::standardize(r).ok()).collect()),
    };

    let n = source.assets();
    let m = spec.window;
    let matrices: Vec<CorrelationMatrix> = spec
        .window_ends(source.len())
        .into_par_iter()
        .map(|end| {
            let start = end - m;
            let rows: Vec<Option<Vec<f64>>> = match &global {
                None => source
                    .rows()
                    .map(|r| series::standardize(&r[start..end]).ok())
                    .collect(),
                Some(z) => z.iter().map(|r| r.as_ref().map(|r| r[start..end].to_vec())).collect(),
            };
            window_matrix(n, m, end, &rows)
        })
        .collect();

    let degenerate = matrices
        .iter()
        .flat_map(|c| {
            c.degenerate.iter().map(|&asset| DegenerateWindow {
                asset,
                window_end: c.window_end,
            })
        })
        .collect();
    Ok(CorrelationSeries {
        spec: *spec,
        matrices,
        degenerate,
    })
}

fn window_matrix(n: usize, m: usize, end: usize, rows: &[Option<Vec<f64>>]) -> CorrelationMatrix {
    let mut entries = vec![0.0; n * n];
    let inv_m = 1.0 / m as f64;
    for k in 0..n {
        let Some(zk) = &rows[k] else {
            entries[k * n + k] = 1.0;
            continue;
        };
        for j in 0..=k {
            let Some(zj) = &rows[j] else { continue };
            let c = zk.iter().zip(zj).map(|(a, b)| a * b).sum::<f64>() * inv_m;
            entries[k * n + j] = c;
            entries[j * n + k] = c;
        }
    }
    let degenerate = (0..n).filter(|&k| rows[k].is_none()).collect();
    CorrelationMatrix {
        n,
        window_end: end,
        entries,
        degenerate,
    }
}
