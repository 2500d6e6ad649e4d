//! Uniform 1-D grids, fields sampled on them, and the discrete operators,
//! quadrature and norms used everywhere else.
//!
//! Node layout per boundary closure (box `[-L/2, L/2]`, `M` nodes):
//!
//! * `Periodic`: `h = L/M`, `x_j = -L/2 + j h`, the right end wraps onto the left.
//! * `Dirichlet0`: `h = L/(M+1)`, interior nodes `x_j = -L/2 + (j+1) h`,
//!   ghost values outside the box are 0.
//! * `Neumann0`: cell-centred, `h = L/M`, `x_j = -L/2 + (j+1/2) h`, the ghost
//!   value mirrors the first/last node across the wall (zero flux).
//!
//! The Laplacian and the Dirichlet integral `h Σ_edges |D⁺u|²` are a matched
//! pair: on every closure `⟨-Δ_h u, u⟩ = dirichlet_integral(u)` exactly, so the
//! discrete action has the discrete PDE right side as its gradient.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tridiag::TriOp;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least {min} points, got {found}")]
    TooFewPoints { min: usize, found: usize },
    #[error("box half-length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("field has {found} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("sobolev order {0} not supported (0..=4)")]
    SobolevOrder(usize),
    #[error("sobolev exponent must be >= 1, got {0}")]
    SobolevExponent(f64),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const MIN_POINTS: usize = 8;
pub const MAX_SOBOLEV_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Dirichlet0,
    Neumann0,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::Dirichlet0 => "dirichlet0",
            Boundary::Neumann0 => "neumann0",
        })
    }
}

impl FromStr for Boundary {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "dirichlet0" => Ok(Boundary::Dirichlet0),
            "neumann0" => Ok(Boundary::Neumann0),
            other => Err(format!("unknown boundary `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    m: usize,
    h: f64,
    half_length: f64,
    boundary: Boundary,
}

impl SpatialGrid {
    pub fn new(half_length: f64, m: usize, boundary: Boundary) -> Result<Self, GridError> {
        if m < MIN_POINTS {
            return Err(GridError::TooFewPoints { min: MIN_POINTS, found: m });
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(GridError::BadLength(half_length));
        }
        let length = 2.0 * half_length;
        let h = match boundary {
            Boundary::Periodic | Boundary::Neumann0 => length / m as f64,
            Boundary::Dirichlet0 => length / (m + 1) as f64,
        };
        Ok(SpatialGrid { m, h, half_length, boundary })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }

    pub fn x(&self, j: usize) -> f64 {
        let offset = match self.boundary {
            Boundary::Periodic => 0.0,
            Boundary::Dirichlet0 => 1.0,
            Boundary::Neumann0 => 0.5,
        };
        -self.half_length + (j as f64 + offset) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.x(j)).collect()
    }

    /// Matrix of the discrete Laplacian with this grid's closure.
    pub fn laplacian_operator(&self) -> TriOp {
        let m = self.m;
        let s = 1.0 / (self.h * self.h);
        let mut lower = vec![s; m];
        let mut upper = vec![s; m];
        let mut diag = vec![-2.0 * s; m];
        let cyclic = self.boundary == Boundary::Periodic;
        if !cyclic {
            lower[0] = 0.0;
            upper[m - 1] = 0.0;
        }
        if self.boundary == Boundary::Neumann0 {
            diag[0] = -s;
            diag[m - 1] = -s;
        }
        TriOp { lower, diag, upper, cyclic }
    }

    pub fn sample<E>(&self, f: impl Fn(f64) -> Result<f64, E>) -> Result<Field, E> {
        let values = (0..self.m).map(|j| f(self.x(j))).collect::<Result<Vec<_>, E>>()?;
        Ok(Field { grid: *self, values })
    }

    pub fn sample_fn(&self, mut f: impl FnMut(f64) -> f64) -> Field {
        Field { grid: *self, values: (0..self.m).map(|j| f(self.x(j))).collect() }
    }

    pub fn constant(&self, c: f64) -> Field {
        Field { grid: *self, values: vec![c; self.m] }
    }

    pub fn zeros(&self) -> Field {
        self.constant(0.0)
    }
}

/// Samples of a function on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl Field {
    /// Checked constructor: length must match and every value must be finite.
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Field, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch { expected: grid.len(), found: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { index, value });
        }
        Ok(Field { grid, values })
    }

    /// Unchecked constructor for operator outputs; callers that can overflow
    /// check [`Field::is_finite`] themselves.
    pub(crate) fn from_raw(grid: SpatialGrid, values: Vec<f64>) -> Field {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field, GridError> {
        self.same_grid(other)?;
        Ok(Field::from_raw(
            self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub fn same_grid(&self, other: &Field) -> Result<(), GridError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(GridError::GridMismatch)
        }
    }

    pub fn add(&self, other: &Field) -> Result<Field, GridError> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field, GridError> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &Field) -> Result<Field, GridError> {
        self.zip_map(other, |a, b| a + alpha * b)
    }

    pub fn scale(&self, alpha: f64) -> Field {
        self.map(|v| alpha * v)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(self)
    }

    /// Sup distance to another field on the same grid.
    pub fn sup_distance(&self, other: &Field) -> Result<f64, GridError> {
        Ok(self.sub(other)?.sup_norm())
    }

    /// Quadrature inner product `h Σ u_j v_j`.
    pub fn inner(&self, other: &Field) -> Result<f64, GridError> {
        self.same_grid(other)?;
        Ok(self.grid.h * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        writeln!(w, "x,u")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(w, "{:.16e},{:.16e}", self.grid.x(j), v)?;
        }
        Ok(())
    }

    /// Reads a `x,u` snapshot back onto `grid`; node coordinates must agree.
    pub fn read_csv<R: BufRead>(grid: SpatialGrid, r: R) -> Result<Field, GridError> {
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(header)) if header.trim() == "x,u" => {}
            _ => return Err(GridError::Csv("missing `x,u` header".into())),
        }
        let mut values = Vec::with_capacity(grid.len());
        for (j, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (xs, us) = line
                .split_once(',')
                .ok_or_else(|| GridError::Csv(format!("row {j}: expected two columns")))?;
            let x: f64 = xs.trim().parse().map_err(|_| GridError::Csv(format!("row {j}: bad x")))?;
            let u: f64 = us.trim().parse().map_err(|_| GridError::Csv(format!("row {j}: bad u")))?;
            if j >= grid.len() || (x - grid.x(j)).abs() > 1e-9 * grid.length() {
                return Err(GridError::Csv(format!("row {j}: node does not match grid")));
            }
            values.push(u);
        }
        Field::new(grid, values)
    }
}

/// Second central difference with the grid's closure.
pub fn laplacian(u: &Field) -> Field {
    let g = u.grid;
    let m = g.m;
    let v = &u.values;
    let inv_h2 = 1.0 / (g.h * g.h);
    let (left_ghost, right_ghost) = match g.boundary {
        Boundary::Periodic => (v[m - 1], v[0]),
        Boundary::Dirichlet0 => (0.0, 0.0),
        Boundary::Neumann0 => (v[0], v[m - 1]),
    };
    let out = (0..m)
        .map(|j| {
            let left = if j == 0 { left_ghost } else { v[j - 1] };
            let right = if j + 1 == m { right_ghost } else { v[j + 1] };
            (left - 2.0 * v[j] + right) * inv_h2
        })
        .collect();
    Field::from_raw(g, out)
}

/// Centred first difference squared at each node, `((u_{j+1} - u_{j-1}) / 2h)²`.
pub fn gradient_sq(u: &Field) -> Field {
    let g = u.grid;
    let m = g.m;
    let v = &u.values;
    let (left_ghost, right_ghost) = match g.boundary {
        Boundary::Periodic => (v[m - 1], v[0]),
        Boundary::Dirichlet0 => (0.0, 0.0),
        Boundary::Neumann0 => (v[0], v[m - 1]),
    };
    let out = (0..m)
        .map(|j| {
            let left = if j == 0 { left_ghost } else { v[j - 1] };
            let right = if j + 1 == m { right_ghost } else { v[j + 1] };
            let d = (right - left) / (2.0 * g.h);
            d * d
        })
        .collect();
    Field::from_raw(g, out)
}

/// Forward differences `(u_{e+1} - u_e)/h` over every edge the closure has.
pub fn edge_gradients(u: &Field) -> Vec<f64> {
    let g = u.grid;
    let v = &u.values;
    let m = g.m;
    let d = |a: f64, b: f64| (b - a) / g.h;
    match g.boundary {
        Boundary::Periodic => (0..m).map(|j| d(v[j], v[(j + 1) % m])).collect(),
        Boundary::Dirichlet0 => std::iter::once(d(0.0, v[0]))
            .chain(v.windows(2).map(|w| d(w[0], w[1])))
            .chain(std::iter::once(d(v[m - 1], 0.0)))
            .collect(),
        Boundary::Neumann0 => v.windows(2).map(|w| d(w[0], w[1])).collect(),
    }
}

/// `h Σ_edges |D⁺u|²`, equal to `⟨-Δ_h u, u⟩` on every closure.
pub fn dirichlet_integral(u: &Field) -> f64 {
    u.grid.h * edge_gradients(u).iter().map(|d| d * d).sum::<f64>()
}

/// `h Σ_j u_j`. Exact rectangle rule on periodic grids; on the other closures
/// it is the composite rule implied by the ghost values.
pub fn integrate(u: &Field) -> f64 {
    u.grid.h * u.values.iter().sum::<f64>()
}

pub fn sup_norm(u: &Field) -> f64 {
    u.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `j`-fold forward divided difference. Periodic grids wrap and keep `M`
/// values; other closures keep the `M - j` differences that fit in the box.
pub fn forward_difference(u: &Field, order: usize) -> Vec<f64> {
    let h = u.grid.h;
    let periodic = u.grid.boundary == Boundary::Periodic;
    let mut cur = u.values.clone();
    for _ in 0..order {
        let n = cur.len();
        cur = if periodic {
            (0..n).map(|j| (cur[(j + 1) % n] - cur[j]) / h).collect()
        } else {
            cur.windows(2).map(|w| (w[1] - w[0]) / h).collect()
        };
    }
    cur
}

/// `Σ_{j=0}^{k} (h Σ |D^j u|^p)^{1/p}`
pub fn sobolev_norm(u: &Field, k: usize, p: f64) -> Result<f64, GridError> {
    if k > MAX_SOBOLEV_ORDER {
        return Err(GridError::SobolevOrder(k));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(GridError::SobolevExponent(p));
    }
    let h = u.grid.h;
    Ok((0..=k)
        .map(|j| {
            let d = forward_difference(u, j);
            (h * d.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
        })
        .sum())
}

/// `max_{j<=k} ‖D^j u‖∞`
pub fn derivative_sup(u: &Field, k: usize) -> f64 {
    (0..=k)
        .map(|j| forward_difference(u, j).iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0, f64::max)
}
