//! Oracles shared by the integration tests. Nothing here touches the
//! library's linear algebra.

#![allow(dead_code)]

use rand::Rng;

/// Eigenvalues of a symmetric row-major matrix by cyclic Jacobi rotations,
/// sorted descending.
pub fn jacobi_eigenvalues(n: usize, a: &[f64]) -> Vec<f64> {
    let mut m = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// Symmetric, unit diagonal, off-diagonal entries uniform in `[-1, 1]`.
pub fn random_unit_diagonal(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = rng.random_range(-1.0..=1.0);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    a
}

/// Gaussian vector of length `n`, scaled to unit norm.
pub fn random_unit_vector(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// AR(1) series `x_t = phi x_{t-1} + e_t` with a burn-in of 1000 steps.
pub fn ar1(len: usize, phi: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut x = 0.0;
    let mut out = Vec::with_capacity(len);
    for t in 0..len + 1000 {
        let e: f64 = rng.sample(rand_distr::StandardNormal);
        x = phi * x + e;
        if t >= 1000 {
            out.push(x);
        }
    }
    out
}

pub fn gaussian(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| rng.sample(rand_distr::StandardNormal)).collect()
}
