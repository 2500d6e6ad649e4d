//! Tridiagonal and cyclic tridiagonal operators.
//!
//! Row `j` of a [`TriOp`] reads `lower[j]*u[j-1] + diag[j]*u[j] + upper[j]*u[j+1]`.
//! For a cyclic operator `lower[0]` couples row 0 to the last unknown and
//! `upper[n-1]` couples the last row to the first; otherwise those two
//! entries are ignored.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("singular system: pivot {pivot:e}")]
    Singular { pivot: f64 },
    #[error("dimension mismatch: operator {expected}, vector {found}")]
    Dimension { expected: usize, found: usize },
}

/// Pivots smaller than this (relative to the row scale) are treated as zero.
pub const PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct TriOp {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub cyclic: bool,
}

impl TriOp {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `self + shift * I`
    pub fn shifted(mut self, shift: f64) -> TriOp {
        self.diag.iter_mut().for_each(|d| *d += shift);
        self
    }

    /// `scale * self`
    pub fn scaled(mut self, scale: f64) -> TriOp {
        for v in self
            .lower
            .iter_mut()
            .chain(self.diag.iter_mut())
            .chain(self.upper.iter_mut())
        {
            *v *= scale;
        }
        self
    }

    /// `self + diag(d)`
    pub fn plus_diagonal(mut self, d: &[f64]) -> TriOp {
        for (a, b) in self.diag.iter_mut().zip(d) {
            *a += b;
        }
        self
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(u.len(), n);
        (0..n)
            .map(|j| {
                let mut acc = self.diag[j] * u[j];
                if j > 0 {
                    acc += self.lower[j] * u[j - 1];
                } else if self.cyclic {
                    acc += self.lower[0] * u[n - 1];
                }
                if j + 1 < n {
                    acc += self.upper[j] * u[j + 1];
                } else if self.cyclic {
                    acc += self.upper[n - 1] * u[0];
                }
                acc
            })
            .collect()
    }

    /// Max over rows of the absolute row sum (infinity norm).
    pub fn norm_inf(&self) -> f64 {
        (0..self.len())
            .map(|j| self.lower[j].abs() + self.diag[j].abs() + self.upper[j].abs())
            .fold(0.0, f64::max)
    }

    /// Largest eigenvalue bound from Gershgorin discs (symmetric operators).
    pub fn gershgorin_upper(&self) -> f64 {
        (0..self.len())
            .map(|j| self.diag[j] + self.off_diag_radius(j))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.len())
            .map(|j| self.diag[j] - self.off_diag_radius(j))
            .fold(f64::INFINITY, f64::min)
    }

    fn off_diag_radius(&self, j: usize) -> f64 {
        let n = self.len();
        let lo = if j > 0 || self.cyclic { self.lower[j].abs() } else { 0.0 };
        let up = if j + 1 < n || self.cyclic { self.upper[j].abs() } else { 0.0 };
        lo + up
    }

    /// Solves `self * x = rhs`: Thomas elimination, with a Sherman-Morrison
    /// rank-one correction for the cyclic corners.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
        let n = self.len();
        if rhs.len() != n {
            return Err(SolveError::Dimension { expected: n, found: rhs.len() });
        }
        if !self.cyclic || n < 3 {
            return thomas(&self.lower, &self.diag, &self.upper, rhs);
        }
        let corner_top = self.lower[0];
        let corner_bottom = self.upper[n - 1];
        let gamma = -self.diag[0];
        if gamma == 0.0 {
            return Err(SolveError::Singular { pivot: 0.0 });
        }
        let mut diag = self.diag.clone();
        diag[0] -= gamma;
        diag[n - 1] -= corner_bottom * corner_top / gamma;

        let y = thomas(&self.lower, &diag, &self.upper, rhs)?;
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = corner_bottom;
        let z = thomas(&self.lower, &diag, &self.upper, &u)?;

        let vy = y[0] + corner_top * y[n - 1] / gamma;
        let vz = z[0] + corner_top * z[n - 1] / gamma;
        let denom = 1.0 + vz;
        if denom.abs() < PIVOT_TOL * vz.abs().max(1.0) {
            return Err(SolveError::Singular { pivot: denom });
        }
        let factor = vy / denom;
        let x: Vec<f64> = y.iter().zip(&z).map(|(yi, zi)| yi - factor * zi).collect();
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(SolveError::Singular { pivot: denom })
        }
    }

    /// `‖self x − rhs‖∞ / (‖self‖∞ ‖x‖∞ + ‖rhs‖∞)`
    pub fn relative_residual(&self, x: &[f64], rhs: &[f64]) -> f64 {
        let ax = self.apply(x);
        let res = ax
            .iter()
            .zip(rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bn = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = self.norm_inf() * xn + bn;
        if scale == 0.0 {
            0.0
        } else {
            res / scale
        }
    }
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let row_scale = |j: usize| {
        let lo = if j > 0 { lower[j].abs() } else { 0.0 };
        let up = if j + 1 < n { upper[j].abs() } else { 0.0 };
        (lo + diag[j].abs() + up).max(f64::MIN_POSITIVE)
    };
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta.abs() < PIVOT_TOL * row_scale(0) {
        return Err(SolveError::Singular { pivot: beta });
    }
    d[0] = rhs[0] / beta;
    for j in 1..n {
        c[j] = upper[j - 1] / beta;
        beta = diag[j] - lower[j] * c[j];
        if beta.abs() < PIVOT_TOL * row_scale(j) {
            return Err(SolveError::Singular { pivot: beta });
        }
        d[j] = (rhs[j] - lower[j] * d[j - 1]) / beta;
    }
    let mut x = d;
    for j in (0..n - 1).rev() {
        let next = x[j + 1];
        x[j] -= c[j + 1] * next;
    }
    Ok(x)
}
