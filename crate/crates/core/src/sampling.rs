//! Seeded random smooth fields for property suites.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{self, Field, SpatialGrid};

/// Trigonometric polynomials over the box with decaying random coefficients,
/// rescaled so that `max_{j ≤ derivative_order} ‖D^j u‖∞ ≤ sup_bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothFieldSampler {
    pub modes: usize,
    pub sup_bound: f64,
    pub derivative_order: usize,
}

impl Default for SmoothFieldSampler {
    fn default() -> Self {
        SmoothFieldSampler { modes: 6, sup_bound: 1.0, derivative_order: 2 }
    }
}

impl SmoothFieldSampler {
    /// One field; the scale inside the bound is drawn uniformly from `(0, 1]`.
    pub fn sample<R: Rng + ?Sized>(&self, g: &SpatialGrid, rng: &mut R) -> Field {
        let length = g.length();
        let terms: Vec<(f64, f64, f64)> = (0..=self.modes)
            .map(|m| {
                let w = 1.0 / (1.0 + (m * m) as f64);
                (2.0 * std::f64::consts::PI * m as f64 / length, w * rng.gen_range(-1.0..1.0), w * rng.gen_range(-1.0..1.0))
            })
            .collect();
        let raw = g.sample_fn(|x| terms.iter().map(|(k, a, b)| a * (k * x).cos() + b * (k * x).sin()).sum());
        let size = grid::derivative_sup(&raw, self.derivative_order);
        let fraction = 1.0 - rng.gen_range(0.0..1.0);
        if size == 0.0 {
            return raw;
        }
        raw.scale(self.sup_bound * fraction / size)
    }
}
