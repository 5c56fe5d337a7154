//! Dense Cholesky factorization for covariance matrices.

use crate::error::{Error, Result};

/// Jitter multipliers tried in turn, relative to trace/dim.
pub(crate) const JITTER_LADDER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Lower factor L with L Lᵀ = C (+ jitter) on the rows of nonzero variance.
///
/// Rows whose variance is exactly zero are dropped before factorizing; the
/// corresponding outputs are pinned to 0.
#[derive(Clone, Debug)]
pub(crate) struct Factor {
    pub dim: usize,
    pub active: Vec<usize>,
    /// Row-major lower triangle over `active`, `active.len()`² entries.
    pub lower: Vec<f64>,
    pub jitter: f64,
}

impl Factor {
    /// Factorizes the symmetric `dim`×`dim` row-major matrix `cov`.
    pub fn new(cov: &[f64], dim: usize) -> Result<Self> {
        assert_eq!(cov.len(), dim * dim);
        let active: Vec<usize> = (0..dim).filter(|&i| cov[i * dim + i] != 0.0).collect();
        for &i in &active {
            if !(cov[i * dim + i] > 0.0) {
                return Err(Error::Model(format!("negative or NaN variance at node {i}")));
            }
        }
        let m = active.len();
        let mut sub = vec![0.0; m * m];
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                sub[a * m + b] = cov[i * dim + j];
            }
        }
        let scale = if m == 0 {
            0.0
        } else {
            active.iter().map(|&i| cov[i * dim + i]).sum::<f64>() / m as f64
        };
        for mult in JITTER_LADDER {
            let jitter = mult * scale;
            if let Some(lower) = cholesky(&sub, m, jitter) {
                return Ok(Self {
                    dim,
                    active,
                    lower,
                    jitter,
                });
            }
        }
        Err(Error::Model(format!(
            "covariance of {m} nodes is not positive definite even with jitter {:e}",
            JITTER_LADDER[3] * scale
        )))
    }

    /// The full `dim`×`dim` lower factor with zero rows and columns at
    /// pinned nodes.
    pub fn embedded(&self) -> Vec<f64> {
        let m = self.active.len();
        let mut full = vec![0.0; self.dim * self.dim];
        for a in 0..m {
            for b in 0..=a {
                full[self.active[a] * self.dim + self.active[b]] = self.lower[a * m + b];
            }
        }
        full
    }

    /// y = L z with z indexed like the full matrix.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let m = self.active.len();
        let mut y = vec![0.0; self.dim];
        for a in 0..m {
            let row = &self.lower[a * m..a * m + a + 1];
            let mut acc = 0.0;
            for (b, l) in row.iter().enumerate() {
                acc += l * z[self.active[b]];
            }
            y[self.active[a]] = acc;
        }
        y
    }
}

fn cholesky(a: &[f64], m: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i * m + j];
            if i == j {
                s += jitter;
            }
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    Some(l)
}
