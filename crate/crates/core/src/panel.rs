//! Asset-by-time matrices.
//!
//! [`Panel`] is a dense `assets x len` matrix of finite reals stored row-major
//! (one contiguous row per asset). [`ReturnPanel`] wraps a panel whose values
//! are simulator returns and therefore lie in `[-1, 1]`.

use std::ops::Deref;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PanelError {
    #[error("panel needs at least one asset")]
    NoAssets,
    #[error("row {row} has length {found}, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("value {value} at asset {asset}, t={t} is not finite")]
    NotFinite { asset: usize, t: usize, value: f64 },
    #[error("return {value} at asset {asset}, t={t} is outside [-1, 1]")]
    OutOfRange { asset: usize, t: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    assets: usize,
    len: usize,
    values: Vec<f64>,
}

impl Panel {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, PanelError> {
        if rows.is_empty() {
            return Err(PanelError::NoAssets);
        }
        let len = rows[0].len();
        let assets = rows.len();
        let mut values = Vec::with_capacity(assets * len);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != len {
                return Err(PanelError::RaggedRows {
                    row,
                    expected: len,
                    found: r.len(),
                });
            }
            values.extend(r);
        }
        Self::from_row_major(assets, len, values)
    }

    pub fn from_row_major(assets: usize, len: usize, values: Vec<f64>) -> Result<Self, PanelError> {
        if assets == 0 {
            return Err(PanelError::NoAssets);
        }
        if values.len() != assets * len {
            return Err(PanelError::RaggedRows {
                row: 0,
                expected: assets * len,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PanelError::NotFinite {
                asset: i / len.max(1),
                t: i % len.max(1),
                value: values[i],
            });
        }
        Ok(Self { assets, len, values })
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn row(&self, asset: usize) -> &[f64] {
        &self.values[asset * self.len..(asset + 1) * self.len]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.assets).map(move |k| self.row(k))
    }

    pub fn get(&self, asset: usize, t: usize) -> f64 {
        self.values[asset * self.len + t]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Applies `f` element-wise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Panel {
        Panel {
            assets: self.assets,
            len: self.len,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rows `range` of every asset, i.e. a time slice.
    pub fn slice_time(&self, start: usize, end: usize) -> Panel {
        assert!(start <= end && end <= self.len, "time slice out of range");
        let mut values = Vec::with_capacity(self.assets * (end - start));
        for row in self.rows() {
            values.extend_from_slice(&row[start..end]);
        }
        Panel {
            assets: self.assets,
            len: end - start,
            values,
        }
    }

    /// Reorders assets: row `k` of the result is row `order[k]` of `self`.
    pub fn permute_assets(&self, order: &[usize]) -> Panel {
        assert_eq!(order.len(), self.assets);
        let mut values = Vec::with_capacity(self.values.len());
        for &k in order {
            values.extend_from_slice(self.row(k));
        }
        Panel {
            assets: self.assets,
            len: self.len,
            values,
        }
    }
}

/// Simulator output: `R_k(t)` for every asset and sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel(Panel);

impl ReturnPanel {
    pub fn new(panel: Panel) -> Result<Self, PanelError> {
        if let Some(i) = panel.values.iter().position(|v| v.abs() > 1.0) {
            return Err(PanelError::OutOfRange {
                asset: i / panel.len,
                t: i % panel.len,
                value: panel.values[i],
            });
        }
        Ok(Self(panel))
    }

    pub fn into_inner(self) -> Panel {
        self.0
    }
}

impl Deref for ReturnPanel {
    type Target = Panel;

    fn deref(&self) -> &Panel {
        &self.0
    }
}

impl AsRef<Panel> for ReturnPanel {
    fn as_ref(&self) -> &Panel {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_rows() {
        let err = Panel::from_rows(vec![vec![0.0, 1.0], vec![0.0]]).unwrap_err();
        assert!(matches!(err, PanelError::RaggedRows { row: 1, .. }));
    }

    #[test]
    fn return_panel_bounds() {
        let p = Panel::from_rows(vec![vec![0.5, -1.0], vec![1.0, 0.0]]).unwrap();
        assert!(ReturnPanel::new(p).is_ok());
        let p = Panel::from_rows(vec![vec![0.5, -1.5]]).unwrap();
        assert!(matches!(
            ReturnPanel::new(p),
            Err(PanelError::OutOfRange { asset: 0, t: 1, .. })
        ));
    }

    #[test]
    fn slicing_and_permuting() {
        let p = Panel::from_rows(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let s = p.slice_time(1, 3);
        assert_eq!(s.row(1), &[5.0, 6.0]);
        let q = p.permute_assets(&[1, 0]);
        assert_eq!(q.row(0), p.row(1));
    }
}
