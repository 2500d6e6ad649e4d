//! Problem instances: degree, coefficient functions, truncated domain and
//! closure, plus the numerical checks on the coefficient hypotheses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::grid::{self, Boundary, Field, GridError, SpatialGrid};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("invalid configuration: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Validation(String),
    #[error("coefficient a_{index}: {source}")]
    Coefficient { index: usize, source: ExprError },
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn default_sup_guard() -> f64 {
    1e6
}

fn default_spatial_dim() -> i64 {
    1
}

/// On-disk form of a [`ProblemSpec`]. Field names are the wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpecDoc {
    #[serde(rename = "N")]
    pub n: i64,
    pub coeffs: Vec<String>,
    pub box_half_length: f64,
    pub grid_points: i64,
    pub boundary: Boundary,
    #[serde(default)]
    pub signed_power: bool,
    #[serde(default = "default_sup_guard")]
    pub sup_guard: f64,
    #[serde(default = "default_spatial_dim")]
    pub spatial_dim: i64,
}

/// A validated problem `u_t = Δu + P(u)` on a truncated 1-D box, with
/// `P(u) = -u^N + Σ_{i<N} a_i(x) u^i` (or `-u|u|^{N-1}` leading term in
/// signed mode).
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    degree: usize,
    coeffs: Vec<Expr>,
    box_half_length: f64,
    grid_points: usize,
    boundary: Boundary,
    signed_power: bool,
    sup_guard: f64,
}

impl ProblemSpec {
    pub fn from_doc(doc: &ProblemSpecDoc) -> Result<ProblemSpec, SpecError> {
        if doc.n < 2 {
            return Err(SpecError::Validation(format!("N ≥ 2 required, got N = {}", doc.n)));
        }
        let degree = doc.n as usize;
        if doc.coeffs.len() != degree {
            return Err(SpecError::Validation(format!(
                "coeffs must list exactly N = {degree} entries a_0..a_{}, got {}",
                degree - 1,
                doc.coeffs.len()
            )));
        }
        if doc.spatial_dim != 1 {
            return Err(SpecError::Validation(format!(
                "spatial_dim must be 1, got {}",
                doc.spatial_dim
            )));
        }
        if doc.grid_points < grid::MIN_POINTS as i64 {
            return Err(SpecError::Validation(format!(
                "grid_points must be at least {}, got {}",
                grid::MIN_POINTS,
                doc.grid_points
            )));
        }
        if !(doc.sup_guard.is_finite() && doc.sup_guard > 0.0) {
            return Err(SpecError::Validation(format!(
                "sup_guard must be positive and finite, got {}",
                doc.sup_guard
            )));
        }
        let coeffs = doc
            .coeffs
            .iter()
            .enumerate()
            .map(|(index, s)| Expr::parse(s).map_err(|source| SpecError::Coefficient { index, source }))
            .collect::<Result<Vec<_>, _>>()?;
        let spec = ProblemSpec {
            degree,
            coeffs,
            box_half_length: doc.box_half_length,
            grid_points: doc.grid_points as usize,
            boundary: doc.boundary,
            signed_power: doc.signed_power,
            sup_guard: doc.sup_guard,
        };
        let g = spec.grid()?;
        for (index, field) in spec.sample_coefficients_on(&g)?.iter().enumerate() {
            check_coefficient_samples(index, field)?;
        }
        Ok(spec)
    }

    pub fn to_doc(&self) -> ProblemSpecDoc {
        ProblemSpecDoc {
            n: self.degree as i64,
            coeffs: self.coeffs.iter().map(|e| e.to_string()).collect(),
            box_half_length: self.box_half_length,
            grid_points: self.grid_points as i64,
            boundary: self.boundary,
            signed_power: self.signed_power,
            sup_guard: self.sup_guard,
            spatial_dim: 1,
        }
    }

    /// Canonical JSON text; loading it reproduces `self`.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("spec serializes")
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[Expr] {
        &self.coeffs
    }

    pub fn box_half_length(&self) -> f64 {
        self.box_half_length
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn signed_power(&self) -> bool {
        self.signed_power
    }

    pub fn sup_guard(&self) -> f64 {
        self.sup_guard
    }

    pub fn grid(&self) -> Result<SpatialGrid, GridError> {
        SpatialGrid::new(self.box_half_length, self.grid_points, self.boundary)
    }

    /// Same problem on a different resolution.
    pub fn with_grid_points(&self, m: usize) -> ProblemSpec {
        ProblemSpec { grid_points: m, ..self.clone() }
    }

    pub fn with_boundary(&self, boundary: Boundary) -> ProblemSpec {
        ProblemSpec { boundary, ..self.clone() }
    }

    pub fn sample_coefficients_on(&self, g: &SpatialGrid) -> Result<Vec<Field>, SpecError> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(index, e)| g.sample(|x| e.eval(x)).map_err(|source| SpecError::Coefficient { index, source }))
            .collect()
    }

    /// Notes where the instance departs from `a_i ∈ L¹ ∩ L∞(ℝ)`: nonzero
    /// constant coefficients are only integrable because the box is finite.
    pub fn hypothesis_notes(&self) -> Vec<String> {
        self.coeffs
            .iter()
            .enumerate()
            .filter_map(|(i, e)| {
                if e.is_constant() && e.eval(0.0).map(|v| v != 0.0).unwrap_or(false) {
                    Some(format!(
                        "a_{i} = {e} is a nonzero constant: not in L1 on the whole line, integrable only on the truncated box"
                    ))
                } else {
                    None
                }
            })
            .collect()
    }
}

fn check_coefficient_samples(index: usize, field: &Field) -> Result<(), SpecError> {
    // Smoothness cannot be verified symbolically; sampled differences up to
    // fourth order must at least stay finite.
    for order in 0..=grid::MAX_SOBOLEV_ORDER {
        if let Some(v) = grid::forward_difference(field, order).iter().find(|v| !v.is_finite()) {
            return Err(SpecError::Validation(format!(
                "a_{index}: non-finite difference of order {order} ({v})"
            )));
        }
    }
    let (l1, linf) = norms_of(field);
    if !(l1.is_finite() && linf.is_finite()) {
        return Err(SpecError::Validation(format!("a_{index}: L1/Linf norm not finite")));
    }
    Ok(())
}

fn norms_of(field: &Field) -> (f64, f64) {
    (grid::integrate(&field.map(f64::abs)), grid::sup_norm(field))
}

pub fn load_spec(config_text: &str) -> Result<ProblemSpec, SpecError> {
    let doc: ProblemSpecDoc = serde_json::from_str(config_text)?;
    ProblemSpec::from_doc(&doc)
}

/// Discrete `(L1, Linf)` of every coefficient on the spec's grid.
pub fn coefficient_norms(spec: &ProblemSpec) -> Result<Vec<(f64, f64)>, SpecError> {
    let g = spec.grid()?;
    Ok(spec.sample_coefficients_on(&g)?.iter().map(norms_of).collect())
}
