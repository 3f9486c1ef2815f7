//! Time-series statistics of a return panel.
//!
//! Standard deviations use the population convention (divisor `T`)
//! throughout, and autocorrelations use the biased estimator with the lag-0
//! denominator, so `|rho| <= 1` always holds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::Panel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("asset {asset} has zero variance")]
    Degenerate { asset: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("empty input")]
    Empty,
    #[error("max_lag {max_lag} must be in 1..{len}")]
    BadLag { max_lag: usize, len: usize },
    #[error("no self-consistent window below T/2 = {limit} (c = {c})")]
    WindowSearchFailed { limit: usize, c: f64 },
    #[error("invalid histogram: {0}")]
    BadHistogram(String),
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Standardizes one series to zero mean and unit population variance.
pub fn standardize(x: &[f64]) -> Result<Vec<f64>, SeriesError> {
    if x.is_empty() {
        return Err(SeriesError::Empty);
    }
    let m = mean(x);
    let sd = variance(x).sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return Err(SeriesError::ZeroVariance);
    }
    Ok(x.iter().map(|v| (v - m) / sd).collect())
}

/// `(R_k(t) - A_k) / sigma_k` for every asset, using full-series moments.
pub fn normalize_returns(panel: &Panel) -> Result<Panel, SeriesError> {
    let mut values = Vec::with_capacity(panel.values().len());
    for (asset, row) in panel.rows().enumerate() {
        match standardize(row) {
            Ok(z) => values.extend(z),
            Err(SeriesError::ZeroVariance | SeriesError::Empty) => {
                return Err(SeriesError::Degenerate { asset })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Panel::from_row_major(panel.assets(), panel.len(), values).expect("finite"))
}

/// Symmetric linear bins on `[lo, hi]`; values outside land in the
/// underflow / overflow counters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            bins: 81,
            lo: -10.0,
            hi: 10.0,
        }
    }
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<(), SeriesError> {
        if self.bins == 0 || !self.lo.is_finite() || !self.hi.is_finite() || self.lo >= self.hi {
            return Err(SeriesError::BadHistogram(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub spec: HistogramSpec,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
    pub total: u64,
}

impl Histogram {
    pub fn build(samples: &[f64], spec: HistogramSpec) -> Self {
        let width = spec.width();
        let mut counts = vec![0u64; spec.bins];
        let (mut underflow, mut overflow) = (0, 0);
        for &x in samples {
            if x < spec.lo {
                underflow += 1;
            } else if x > spec.hi {
                overflow += 1;
            } else {
                let b = (((x - spec.lo) / width) as usize).min(spec.bins - 1);
                counts[b] += 1;
            }
        }
        Self {
            spec,
            counts,
            underflow,
            overflow,
            total: samples.len() as u64,
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.spec.width();
        (0..self.spec.bins)
            .map(|b| self.spec.lo + (b as f64 + 0.5) * w)
            .collect()
    }

    /// Counts divided by `total * width`, so the density integrates to the
    /// in-range fraction.
    pub fn density(&self) -> Vec<f64> {
        let norm = self.total as f64 * self.spec.width();
        self.counts.iter().map(|&c| c as f64 / norm).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    /// Raw fourth standardized moment (3 for a Gaussian).
    pub kurtosis: f64,
    pub histogram: Histogram,
}

impl DistributionStats {
    pub fn of(samples: &[f64], spec: HistogramSpec) -> Result<Self, SeriesError> {
        if samples.is_empty() {
            return Err(SeriesError::Empty);
        }
        spec.validate()?;
        let n = samples.len() as f64;
        let m = mean(samples);
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &x in samples {
            let d = x - m;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
        if m2 == 0.0 {
            return Err(SeriesError::ZeroVariance);
        }
        Ok(Self {
            count: samples.len(),
            mean: m,
            variance: m2,
            skewness: m3 / m2.powf(1.5),
            kurtosis: m4 / (m2 * m2),
            histogram: Histogram::build(samples, spec),
        })
    }
}

/// Moments and histogram of a (normalized) panel: one entry for the pooled
/// sample, or one per asset.
pub fn distribution_stats(
    panel: &Panel,
    pooled: bool,
    spec: HistogramSpec,
) -> Result<Vec<DistributionStats>, SeriesError> {
    if panel.is_empty() {
        return Err(SeriesError::Empty);
    }
    if pooled {
        Ok(vec![DistributionStats::of(panel.values(), spec)?])
    } else {
        panel
            .rows()
            .enumerate()
            .map(|(asset, row)| {
                DistributionStats::of(row, spec).map_err(|e| match e {
                    SeriesError::ZeroVariance => SeriesError::Degenerate { asset },
                    e => e,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfCurve {
    /// `rho[l]` for `l = 0..=max_lag`.
    pub rho: Vec<f64>,
    /// `1.96 / sqrt(T)`.
    pub noise_band: f64,
}

impl AcfCurve {
    pub fn max_lag(&self) -> usize {
        self.rho.len() - 1
    }
}

/// Lag-by-lag autocorrelation of a mean-removed series.
struct Autocorrelator {
    centered: Vec<f64>,
    c0: f64,
}

impl Autocorrelator {
    fn new(x: &[f64]) -> Result<Self, SeriesError> {
        if x.is_empty() {
            return Err(SeriesError::Empty);
        }
        let m = mean(x);
        let centered: Vec<f64> = x.iter().map(|v| v - m).collect();
        let c0: f64 = centered.iter().map(|d| d * d).sum();
        if c0 == 0.0 {
            return Err(SeriesError::ZeroVariance);
        }
        Ok(Self { centered, c0 })
    }

    fn rho(&self, lag: usize) -> f64 {
        if lag == 0 {
            return 1.0;
        }
        let d = &self.centered;
        let s: f64 = d[..d.len() - lag].iter().zip(&d[lag..]).map(|(a, b)| a * b).sum();
        s / self.c0
    }
}

pub fn acf(series: &[f64], max_lag: usize) -> Result<AcfCurve, SeriesError> {
    if max_lag < 1 || max_lag >= series.len() {
        return Err(SeriesError::BadLag {
            max_lag,
            len: series.len(),
        });
    }
    let ac = Autocorrelator::new(series)?;
    Ok(AcfCurve {
        rho: (0..=max_lag).map(|l| ac.rho(l)).collect(),
        noise_band: 1.96 / (series.len() as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub tau: f64,
    /// `sqrt((4W + 2) / T) * tau`.
    pub error: f64,
    pub window: usize,
}

/// Integrated autocorrelation time `1/2 + sum_{l=1}^{W} rho(l)` with the
/// smallest window `W` satisfying `W >= c * tau(W)`.
pub fn integrated_autocorr_time(series: &[f64], c: f64) -> Result<TauEstimate, SeriesError> {
    let ac = Autocorrelator::new(series)?;
    let t_len = series.len();
    let limit = t_len / 2;
    let mut tau = 0.5;
    for w in 1..=limit {
        tau += ac.rho(w);
        if w as f64 >= c * tau {
            return Ok(TauEstimate {
                tau,
                error: ((4 * w + 2) as f64 / t_len as f64).sqrt() * tau,
                window: w,
            });
        }
    }
    Err(SeriesError::WindowSearchFailed { limit, c })
}

/// `I(t) = (1/N) sum_k |R_k(t)|`.
pub fn volatility_index(panel: &Panel) -> Vec<f64> {
    let n = panel.assets() as f64;
    (0..panel.len())
        .map(|t| panel.rows().map(|r| r[t].abs()).sum::<f64>() / n)
        .collect()
}

/// Permutes every asset's series in time independently, destroying both
/// auto- and cross-correlations while keeping each marginal distribution.
pub fn shuffle_in_time(panel: &Panel, seed: u64) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = panel
        .rows()
        .map(|r| {
            let mut v = r.to_vec();
            v.shuffle(&mut rng);
            v
        })
        .collect();
    Panel::from_rows(rows).expect("same shape")
}

/// Average ranks (ties share the mean rank), 1-based.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Spearman rank correlation.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    pearson(&ranks(a), &ranks(b))
}
