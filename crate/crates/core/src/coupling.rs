//! Cross-asset interaction matrix `gamma`.
//!
//! `gamma_jk` is the weight with which asset `j`'s magnetization enters the
//! field on asset `k`. The generator fills a fixed fraction of the
//! off-diagonal entries with Gaussian draws; the matrix is not symmetric in
//! general. The Gaussian parameter is a variance (default 0.01, i.e. standard
//! deviation 0.1), not a standard deviation.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{fmt_f64, parse_f64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("coupling matrix needs n >= 1")]
    Empty,
    #[error("expected {expected} entries for n={n}, found {found}")]
    Shape {
        n: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid coupling spec: {0}")]
    InvalidSpec(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CouplingMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; n * n],
        }
    }

    /// Row-major `n x n` entries. The diagonal is not checked here; use
    /// [`validate_coupling`] for that.
    pub fn from_dense(n: usize, entries: Vec<f64>) -> Result<Self, CouplingError> {
        if n == 0 {
            return Err(CouplingError::Empty);
        }
        if entries.len() != n * n {
            return Err(CouplingError::Shape {
                n,
                expected: n * n,
                found: entries.len(),
            });
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.n + k]
    }

    pub fn set(&mut self, j: usize, k: usize, value: f64) {
        self.entries[j * self.n + k] = value;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn nonzero_count(&self) -> usize {
        self.entries.iter().filter(|&&v| v != 0.0).count()
    }

    /// Indices `l` with `gamma_ll != 0`.
    pub fn nonzero_diagonal(&self) -> Vec<usize> {
        (0..self.n).filter(|&l| self.get(l, l) != 0.0).collect()
    }

    /// `(gamma + gamma^T) / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        for j in 0..self.n {
            for k in 0..self.n {
                out.set(j, k, 0.5 * (self.get(j, k) + self.get(k, j)));
            }
        }
        out
    }

    /// Dense CSV: an `n=<N>` line followed by `N` comma-separated rows.
    pub fn to_dense_csv(&self) -> String {
        let mut out = format!("n={}\n", self.n);
        for j in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|k| fmt_f64(self.get(j, k))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_dense_csv(text: &str) -> Result<Self, CouplingError> {
        let mut lines = text.lines().enumerate();
        let n = parse_header(lines.next())?;
        let mut entries = Vec::with_capacity(n * n);
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let start = entries.len();
            for field in line.split(',') {
                entries.push(parse_f64(field).map_err(|msg| CouplingError::Parse { line: i + 1, msg })?);
            }
            if entries.len() - start != n {
                return Err(CouplingError::Parse {
                    line: i + 1,
                    msg: format!("expected {n} columns, found {}", entries.len() - start),
                });
            }
        }
        Self::from_dense(n, entries)
    }

    /// Sparse text: `n=<N>`, a `j,k,value` header, then one triplet per
    /// nonzero entry in row-major order.
    pub fn to_sparse_text(&self) -> String {
        let mut out = format!("n={}\nj,k,value\n", self.n);
        for j in 0..self.n {
            for k in 0..self.n {
                let v = self.get(j, k);
                if v != 0.0 {
                    out.push_str(&format!("{j},{k},{}\n", fmt_f64(v)));
                }
            }
        }
        out
    }

    pub fn from_sparse_text(text: &str) -> Result<Self, CouplingError> {
        let mut lines = text.lines().enumerate();
        let n = parse_header(lines.next())?;
        let mut m = Self::zeros(n);
        for (i, line) in lines {
            if line.is_empty() || line == "j,k,value" {
                continue;
            }
            let err = |msg: String| CouplingError::Parse { line: i + 1, msg };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected j,k,value, got {line:?}")));
            }
            let j: usize = fields[0].parse().map_err(|e| err(format!("{e}")))?;
            let k: usize = fields[1].parse().map_err(|e| err(format!("{e}")))?;
            if j >= n || k >= n {
                return Err(err(format!("index ({j},{k}) outside {n}x{n}")));
            }
            m.set(j, k, parse_f64(fields[2]).map_err(err)?);
        }
        Ok(m)
    }
}

fn parse_header(line: Option<(usize, &str)>) -> Result<usize, CouplingError> {
    let err = |msg: String| CouplingError::Parse { line: 1, msg };
    let (_, line) = line.ok_or_else(|| err("empty file".into()))?;
    let n = line
        .strip_prefix("n=")
        .ok_or_else(|| err(format!("expected n=<N> header, got {line:?}")))?
        .trim()
        .parse::<usize>()
        .map_err(|e| err(e.to_string()))?;
    if n == 0 {
        return Err(CouplingError::Empty);
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub n: usize,
    /// Fraction of off-diagonal entries that are nonzero.
    pub density: f64,
    pub mean: f64,
    pub variance: f64,
    pub seed: u64,
}

impl CouplingSpec {
    /// Ten percent density, Normal(0.05, variance 0.01).
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            density: 0.10,
            mean: 0.05,
            variance: 0.01,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), CouplingError> {
        if self.n == 0 {
            return Err(CouplingError::Empty);
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(CouplingError::InvalidSpec(format!(
                "density {} outside [0, 1]",
                self.density
            )));
        }
        if !(self.variance >= 0.0 && self.variance.is_finite()) || !self.mean.is_finite() {
            return Err(CouplingError::InvalidSpec(
                "mean must be finite and variance finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// `round(density * n * (n - 1))`.
    pub fn nonzero_target(&self) -> usize {
        (self.density * (self.n * (self.n - 1)) as f64).round() as usize
    }
}

/// Draws a coupling matrix. Exactly [`CouplingSpec::nonzero_target`]
/// off-diagonal positions are chosen without replacement; each receives an
/// independent Normal draw (a draw of exactly 0.0 is possible in principle
/// but has probability zero).
///
/// # Panics
/// If the spec is invalid; call [`CouplingSpec::validate`] first.
pub fn generate_coupling(spec: &CouplingSpec) -> CouplingMatrix {
    spec.validate().expect("invalid coupling spec");
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(u64::MAX);
    let off_diagonal = n * (n - 1);
    let mut chosen = index::sample(&mut rng, off_diagonal, spec.nonzero_target()).into_vec();
    chosen.sort_unstable();
    let normal = Normal::new(spec.mean, spec.variance.sqrt()).expect("validated");
    let mut m = CouplingMatrix::zeros(n);
    for p in chosen {
        // skip the diagonal: position p maps to row j, and column k != j
        let (j, c) = (p / (n - 1), p % (n - 1));
        let k = if c >= j { c + 1 } else { c };
        m.set(j, k, normal.sample(&mut rng));
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDiagnostics {
    pub n: usize,
    pub nonzero: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    pub symmetric: bool,
    pub diagonal_zero: bool,
    pub nonzero_diagonal: Vec<usize>,
}

impl CouplingDiagnostics {
    pub fn passes(&self) -> bool {
        self.diagonal_zero
    }
}

/// Summary statistics of the nonzero entries plus the zero-diagonal check.
pub fn validate_coupling(gamma: &CouplingMatrix) -> CouplingDiagnostics {
    let nonzeros: Vec<f64> = gamma.entries.iter().copied().filter(|&v| v != 0.0).collect();
    let (min, max, mean) = if nonzeros.is_empty() {
        (None, None, None)
    } else {
        (
            Some(nonzeros.iter().copied().fold(f64::INFINITY, f64::min)),
            Some(nonzeros.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            Some(nonzeros.iter().sum::<f64>() / nonzeros.len() as f64),
        )
    };
    let nonzero_diagonal = gamma.nonzero_diagonal();
    let n = gamma.n;
    let symmetric = (0..n).all(|j| (0..j).all(|k| gamma.get(j, k) == gamma.get(k, j)));
    CouplingDiagnostics {
        n,
        nonzero: nonzeros.len(),
        min,
        max,
        mean,
        symmetric,
        diagonal_zero: nonzero_diagonal.is_empty(),
        nonzero_diagonal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_density_two_assets() {
        let spec = CouplingSpec {
            density: 1.0,
            ..CouplingSpec::new(2, 3)
        };
        let m = generate_coupling(&spec);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_ne!(m.get(0, 1), 0.0);
        assert_ne!(m.get(1, 0), 0.0);
    }

    #[test]
    fn zero_density_is_zero_matrix() {
        let spec = CouplingSpec {
            density: 0.0,
            ..CouplingSpec::new(10, 3)
        };
        assert_eq!(generate_coupling(&spec), CouplingMatrix::zeros(10));
    }

    #[test]
    fn full_scale_matrix() {
        let m = generate_coupling(&CouplingSpec::new(300, 2024));
        let d = validate_coupling(&m);
        assert_eq!(d.nonzero, 8970);
        assert!(d.passes());
        assert!(!d.symmetric);
        let bound = 3.0 * 0.1 / (8970f64).sqrt();
        assert!((d.mean.unwrap() - 0.05).abs() < bound, "mean {:?}", d.mean);
        let nz: Vec<f64> = m.entries().iter().copied().filter(|&v| v != 0.0).collect();
        let var = nz.iter().map(|v| (v - d.mean.unwrap()).powi(2)).sum::<f64>() / nz.len() as f64;
        assert!((var - 0.01).abs() < 0.001, "variance {var}");
        assert!(d.min.unwrap() < 0.0, "Gaussian tail should cross zero");
    }

    #[test]
    fn diagnostics_flag_diagonal() {
        let d = validate_coupling(&CouplingMatrix::zeros(4));
        assert_eq!(d.nonzero, 0);
        assert!(d.passes());
        let mut m = CouplingMatrix::zeros(4);
        m.set(1, 1, 0.1);
        let d = validate_coupling(&m);
        assert!(!d.passes());
        assert_eq!(d.nonzero_diagonal, vec![1]);
    }

    #[test]
    fn symmetrize_keeps_zero_diagonal() {
        let m = generate_coupling(&CouplingSpec::new(12, 1));
        let s = m.symmetrized();
        let d = validate_coupling(&s);
        assert!(d.symmetric && d.diagonal_zero);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = CouplingSpec::new(5, 0);
        spec.density = 1.5;
        assert!(spec.validate().is_err());
        spec.density = 0.5;
        spec.variance = -1.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn parse_errors() {
        assert!(CouplingMatrix::from_sparse_text("n=2\nj,k,value\n0,5,1.0\n").is_err());
        assert!(CouplingMatrix::from_dense_csv("n=2\n0,1\n1\n").is_err());
        assert!(CouplingMatrix::from_dense_csv("2\n").is_err());
    }

    proptest! {
        #[test]
        fn generation_contract(n in 1usize..25, density in 0.0f64..=1.0, seed: u64) {
            let spec = CouplingSpec { density, ..CouplingSpec::new(n, seed) };
            let m = generate_coupling(&spec);
            prop_assert!(m.nonzero_diagonal().is_empty());
            prop_assert_eq!(m.nonzero_count(), spec.nonzero_target());
            prop_assert_eq!(&m, &generate_coupling(&spec));
        }

        #[test]
        fn text_formats_round_trip(n in 1usize..12, density in 0.0f64..=1.0, seed: u64) {
            let spec = CouplingSpec { density, variance: 3.7, ..CouplingSpec::new(n, seed) };
            let m = generate_coupling(&spec);
            let dense = CouplingMatrix::from_dense_csv(&m.to_dense_csv()).unwrap();
            let sparse = CouplingMatrix::from_sparse_text(&m.to_sparse_text()).unwrap();
            prop_assert_eq!(m.entries(), dense.entries());
            prop_assert_eq!(m.entries(), sparse.entries());
        }
    }
}
