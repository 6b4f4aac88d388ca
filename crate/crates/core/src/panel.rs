//! Panels and the spectra of their symmetrized lag-τ covariance matrices.
//!
//! For a panel `R` with columns `R_1, …, R_N` the lag-τ matrix is
//!
//! ```text
//! Φ(τ) = (1 / 2T) Σ_{j=1..T} (R_j R_{j+τ}ᵀ + R_{j+τ} R_jᵀ)
//! ```
//!
//! When several lags are computed from one panel, `T = N − τ_max` is shared
//! so the aspect ratio `c = n / T` is the same at every lag.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// An `n × N` real panel, stored row-major (row `i` is series `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    n: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Panel {
    /// Builds a panel from row-major data, validating shape and finiteness.
    pub fn from_row_major(n: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || cols == 0 || data.is_empty() {
            return Err(Error::EmptyInput);
        }
        if data.len() != n * cols {
            return Err(Error::InvalidArgument(format!(
                "row-major buffer has {} values, expected {n} x {cols}",
                data.len()
            )));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / cols,
                col: idx % cols,
            });
        }
        if cols < 2 {
            return Err(Error::InsufficientColumns {
                needed: 2,
                available: cols,
            });
        }
        Ok(Self { n, cols, data })
    }

    /// Number of series.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of time points `N`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.data[i * self.cols + t]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    /// Multiplies every entry by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::from_row_major(self.n, self.cols, self.data.iter().map(|v| v * s).collect())
    }
}

/// Validates a row-oriented matrix and turns it into a [`Panel`].
pub fn validate_panel(raw: &[Vec<f64>]) -> Result<Panel> {
    let Some(first) = raw.first() else {
        return Err(Error::EmptyInput);
    };
    let cols = first.len();
    if cols == 0 {
        return Err(Error::EmptyInput);
    }
    for (row, values) in raw.iter().enumerate() {
        if values.len() != cols {
            return Err(Error::RaggedRows {
                row,
                expected: cols,
                found: values.len(),
            });
        }
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
    }
    let data = raw.iter().flatten().copied().collect();
    Panel::from_row_major(raw.len(), cols, data)
}

/// A symmetrized lag-τ covariance matrix `Φ(τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymLagCov {
    pub matrix: DMatrix<f64>,
    pub tau: usize,
    pub t_used: usize,
}

impl SymLagCov {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Builds `Φ(τ)` from the first `t_used + tau` columns of the panel.
///
/// Only the upper triangle is accumulated; the lower triangle is mirrored,
/// so the result is exactly symmetric.
pub fn build_sym_lag_cov(panel: &Panel, tau: usize, t_used: usize) -> Result<SymLagCov> {
    if t_used == 0 {
        return Err(Error::InvalidArgument("t_used must be positive".into()));
    }
    if t_used + tau > panel.cols() {
        return Err(Error::InsufficientColumns {
            needed: t_used + tau,
            available: panel.cols(),
        });
    }
    let n = panel.n();
    let scale = 1.0 / (2.0 * t_used as f64);

    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|a| {
            let ra = panel.row(a);
            (a..n)
                .map(|b| {
                    let rb = panel.row(b);
                    let mut s = 0.0;
                    for j in 0..t_used {
                        s += ra[j] * rb[j + tau] + ra[j + tau] * rb[j];
                    }
                    s * scale
                })
                .collect()
        })
        .collect();

    let mut matrix = DMatrix::zeros(n, n);
    for (a, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let b = a + off;
            matrix[(a, b)] = v;
            matrix[(b, a)] = v;
        }
    }
    Ok(SymLagCov {
        matrix,
        tau,
        t_used,
    })
}

/// Full real spectrum of a `Φ(τ)` plus the metadata the laws need.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// Sorted descending by value.
    pub eigenvalues: Vec<f64>,
    /// The same values, sorted descending by absolute value.
    pub abs_sorted: Vec<f64>,
    pub tau: usize,
    pub n: usize,
    pub t_used: usize,
    /// Aspect ratio `n / t_used`.
    pub c: f64,
}

impl Spectrum {
    /// Wraps an arbitrary list of eigenvalues (sorted internally).
    pub fn from_eigenvalues(mut values: Vec<f64>, tau: usize, t_used: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ConvergenceFailure);
        }
        if t_used == 0 {
            return Err(Error::InvalidArgument("t_used must be positive".into()));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        let mut abs_sorted = values.clone();
        abs_sorted.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        let n = values.len();
        Ok(Self {
            eigenvalues: values,
            abs_sorted,
            tau,
            n,
            t_used,
            c: n as f64 / t_used as f64,
        })
    }

    /// Eigenvalues in ascending order.
    pub fn ascending(&self) -> Vec<f64> {
        self.eigenvalues.iter().rev().copied().collect()
    }

    /// Returns a copy with every eigenvalue multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::from_eigenvalues(
            self.eigenvalues.iter().map(|v| v * s).collect(),
            self.tau,
            self.t_used,
        )
    }

    pub fn largest_abs(&self) -> f64 {
        self.abs_sorted.first().map_or(0.0, |v| v.abs())
    }
}

/// Eigenvalues of a symmetric lag covariance.
pub fn eigenvalues_sym(cov: &SymLagCov) -> Result<Spectrum> {
    let values = symmetric_eigenvalues(&cov.matrix)?;
    Spectrum::from_eigenvalues(values, cov.tau, cov.t_used)
}

/// Eigenvalues (unsorted) of a dense symmetric matrix.
pub(crate) fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "expected a nonempty square matrix".into(),
        ));
    }
    let eig = m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(Error::ConvergenceFailure)?;
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::ConvergenceFailure);
    }
    Ok(values)
}

/// Spectra of `Φ(0), …, Φ(τ_max)` with the shared `T = N − τ_max`.
pub fn lag_spectra(panel: &Panel, tau_max: usize) -> Result<Vec<Spectrum>> {
    if panel.cols() <= tau_max {
        return Err(Error::InsufficientColumns {
            needed: tau_max + 1,
            available: panel.cols(),
        });
    }
    let t_used = panel.cols() - tau_max;
    (0..=tau_max)
        .into_par_iter()
        .map(|tau| eigenvalues_sym(&build_sym_lag_cov(panel, tau, t_used)?))
        .collect()
}
