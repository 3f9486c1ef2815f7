//! Spectra of correlation matrices: eigendecomposition, cumulative risk
//! fraction, the Marchenko-Pastur reference and eigenvector localization
//! (IPR / IPR6).

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::xcorr::CorrelationMatrix;

/// Largest tolerated `|C_kj - C_jk|`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;
/// Adjacent eigenvalues closer than this have non-unique eigenvectors.
pub const DEGENERACY_GAP: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("window {window_end}: matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { window_end: usize, asymmetry: f64 },
    #[error("window {window_end}: eigensolver did not converge")]
    NoConvergence { window_end: usize },
    #[error("m = {m} outside 1..={n}")]
    IndexOutOfRange { m: usize, n: usize },
    #[error("Marchenko-Pastur reference needs Q = T/N > 1 (T={t_window}, N={n_assets})")]
    RatioTooSmall { t_window: usize, n_assets: usize },
    #[error("vector norm {norm} differs from 1 by more than 1e-6")]
    NotUnitNorm { norm: f64 },
    #[error("window {window_end} has {found} assets, expected {expected}")]
    InconsistentSize {
        window_end: usize,
        expected: usize,
        found: usize,
    },
    #[error("empty spectrum")]
    Empty,
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// `vectors[l]` belongs to `values[l]`; its largest-magnitude component
    /// is positive.
    pub vectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    /// `max |A - V diag(lambda) V^T|` against the row-major matrix `a`.
    pub fn reconstruction_residual(&self, a: &[f64]) -> f64 {
        let n = self.values.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n)
                    .map(|l| self.vectors[l][i] * self.values[l] * self.vectors[l][j])
                    .sum();
                worst = worst.max((a[i * n + j] - r).abs());
            }
        }
        worst
    }
}

/// Full symmetric eigendecomposition of a row-major `n x n` matrix.
/// `window_end` only labels errors.
pub fn eig_sym_dense(n: usize, entries: &[f64], window_end: usize) -> Result<EigenDecomposition, SpectraError> {
    assert_eq!(entries.len(), n * n);
    let mut asymmetry: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            asymmetry = asymmetry.max((entries[i * n + j] - entries[j * n + i]).abs());
        }
    }
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(SpectraError::NotSymmetric {
            window_end,
            asymmetry,
        });
    }
    let m = DMatrix::from_row_slice(n, n, entries);
    let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 100 * n.max(10))
        .ok_or(SpectraError::NoConvergence { window_end })?;

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep the solver's index order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            fix_sign(&mut v);
            v
        })
        .collect();
    Ok(EigenDecomposition { values, vectors })
}

pub fn eig_sym(matrix: &CorrelationMatrix) -> Result<EigenDecomposition, SpectraError> {
    eig_sym_dense(matrix.n(), matrix.entries(), matrix.window_end)
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `CRF_m = (lambda_1 + ... + lambda_m) / (lambda_1 + ... + lambda_N)` for
/// eigenvalues sorted in descending order.
pub fn crf(eigenvalues: &[f64], m: usize) -> Result<f64, SpectraError> {
    let n = eigenvalues.len();
    if m < 1 || m > n {
        return Err(SpectraError::IndexOutOfRange { m, n });
    }
    Ok(crf_curve(eigenvalues)[m - 1])
}

/// `CRF_1 ..= CRF_N`; the last entry is exactly 1.
pub fn crf_curve(eigenvalues: &[f64]) -> Vec<f64> {
    let total: f64 = eigenvalues.iter().sum();
    let mut acc = 0.0;
    eigenvalues
        .iter()
        .map(|l| {
            acc += l;
            acc / total
        })
        .collect()
}

/// Limiting eigenvalue density of a correlation matrix built from `T`
/// samples of `N` independent series, `Q = T / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpReference {
    pub q: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

impl MpReference {
    pub fn density(&self, lambda: f64) -> f64 {
        if lambda <= self.lambda_minus || lambda >= self.lambda_plus {
            return 0.0;
        }
        self.q / (2.0 * std::f64::consts::PI)
            * ((self.lambda_plus - lambda) * (lambda - self.lambda_minus)).sqrt()
            / lambda
    }

    /// `(lambda, rho)` on `points` evenly spaced values spanning the support.
    pub fn sample(&self, points: usize) -> Vec<(f64, f64)> {
        let step = (self.lambda_plus - self.lambda_minus) / (points.max(2) - 1) as f64;
        (0..points)
            .map(|i| {
                let l = self.lambda_minus + i as f64 * step;
                (l, self.density(l))
            })
            .collect()
    }
}

pub fn mp_reference(t_window: usize, n_assets: usize) -> Result<MpReference, SpectraError> {
    if n_assets == 0 || t_window <= n_assets {
        return Err(SpectraError::RatioTooSmall { t_window, n_assets });
    }
    let q = t_window as f64 / n_assets as f64;
    let inv = 1.0 / q;
    let spread = 2.0 * inv.sqrt();
    Ok(MpReference {
        q,
        lambda_minus: 1.0 + inv - spread,
        lambda_plus: 1.0 + inv + spread,
    })
}

fn power_sum(v: &[f64], p: i32) -> Result<f64, SpectraError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(SpectraError::NotUnitNorm { norm });
    }
    Ok(v.iter().map(|x| x.powi(p)).sum())
}

/// Inverse participation ratio `sum_j v_j^4` of a unit vector.
pub fn ipr(v: &[f64]) -> Result<f64, SpectraError> {
    power_sum(v, 4)
}

/// `sum_j v_j^6` of a unit vector.
pub fn ipr6(v: &[f64]) -> Result<f64, SpectraError> {
    power_sum(v, 6)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub window_end: usize,
    pub eigen: EigenDecomposition,
    pub crf: Vec<f64>,
    pub ipr: Vec<f64>,
    pub ipr6: Vec<f64>,
    /// `true` where the eigenvalue is within [`DEGENERACY_GAP`] of a
    /// neighbour, so the eigenvector (and its IPR) is basis-dependent.
    pub non_unique: Vec<bool>,
}

impl SpectralSummary {
    pub fn from_matrix(matrix: &CorrelationMatrix) -> Result<Self, SpectraError> {
        let eigen = eig_sym(matrix)?;
        if eigen.values.is_empty() {
            return Err(SpectraError::Empty);
        }
        let crf = crf_curve(&eigen.values);
        let ipr = eigen.vectors.iter().map(|v| ipr(v)).collect::<Result<_, _>>()?;
        let ipr6 = eigen.vectors.iter().map(|v| ipr6(v)).collect::<Result<_, _>>()?;
        let vals = &eigen.values;
        let non_unique = (0..vals.len())
            .map(|l| {
                (l > 0 && vals[l - 1] - vals[l] < DEGENERACY_GAP)
                    || (l + 1 < vals.len() && vals[l] - vals[l + 1] < DEGENERACY_GAP)
            })
            .collect();
        Ok(Self {
            window_end: matrix.window_end,
            eigen,
            crf,
            ipr,
            ipr6,
            non_unique,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    pub fn n(&self) -> usize {
        self.eigen.values.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFailure {
    pub window_end: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTrajectory {
    pub top_m: usize,
    pub summaries: Vec<SpectralSummary>,
    pub failures: Vec<WindowFailure>,
    /// Present when the window is longer than the number of assets.
    pub mp: Option<MpReference>,
}

impl SpectralTrajectory {
    /// `(window_end, l, lambda_l, IPR(l))` for `l = 1..=top_m`.
    pub fn scatter(&self) -> Vec<(usize, usize, f64, f64)> {
        self.summaries
            .iter()
            .flat_map(|s| (0..self.top_m).map(move |l| (s.window_end, l + 1, s.eigen.values[l], s.ipr[l])))
            .collect()
    }
}

/// Decomposes every window; a failing window is recorded and skipped.
pub fn spectral_trajectory(
    matrices: &[CorrelationMatrix],
    top_m: usize,
    t_window: usize,
) -> Result<SpectralTrajectory, SpectraError> {
    let n = matrices.first().map_or(0, CorrelationMatrix::n);
    if let Some(bad) = matrices.iter().find(|c| c.n() != n) {
        return Err(SpectraError::InconsistentSize {
            window_end: bad.window_end,
            expected: n,
            found: bad.n(),
        });
    }
    if !matrices.is_empty() && (top_m < 1 || top_m > n) {
        return Err(SpectraError::IndexOutOfRange { m: top_m, n });
    }
    let results: Vec<Result<SpectralSummary, SpectraError>> =
        matrices.par_iter().map(SpectralSummary::from_matrix).collect();
    let mut summaries = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (c, r) in matrices.iter().zip(results) {
        match r {
            Ok(s) => summaries.push(s),
            Err(e) => failures.push(WindowFailure {
                window_end: c.window_end,
                error: e.to_string(),
            }),
        }
    }
    Ok(SpectralTrajectory {
        top_m,
        summaries,
        failures,
        mp: mp_reference(t_window, n).ok(),
    })
}

/// Ways a correlation matrix can violate its contract.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub max_asymmetry: f64,
    pub max_diagonal_error: f64,
    pub max_abs_entry: f64,
    pub min_eigenvalue: f64,
    pub trace_error: f64,
}

impl InvariantReport {
    pub fn of(matrix: &CorrelationMatrix) -> Result<Self, SpectraError> {
        let n = matrix.n();
        let eig = eig_sym(matrix)?;
        let sum: f64 = eig.values.iter().sum();
        Ok(Self {
            max_asymmetry: matrix.max_asymmetry(),
            max_diagonal_error: (0..n).map(|i| (matrix.get(i, i) - 1.0).abs()).fold(0.0, f64::max),
            max_abs_entry: matrix.entries().iter().map(|v| v.abs()).fold(0.0, f64::max),
            min_eigenvalue: eig.values.last().copied().unwrap_or(0.0),
            trace_error: (sum - n as f64).abs(),
        })
    }

    /// Symmetric and unit-diagonal to 1e-12, entries in `[-1, 1]` to 1e-12,
    /// smallest eigenvalue `>= -1e-8 N` and eigenvalue sum `N` to 1e-8.
    pub fn holds(&self, n: usize) -> bool {
        self.max_asymmetry <= 1e-12
            && self.max_diagonal_error <= 1e-12
            && self.max_abs_entry <= 1.0 + 1e-12
            && self.min_eigenvalue >= -1e-8 * n as f64
            && self.trace_error <= 1e-8
    }
}
