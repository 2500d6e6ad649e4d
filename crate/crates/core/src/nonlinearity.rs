//! The reaction term `P(u) = -u^N + Σ_{i<N} a_i(x) u^i`, its derivative in
//! `u`, its antiderivative, and the empirical check of the Sobolev bound
//! `‖P(u) - a_0‖_{k,p} ≤ C' ‖u‖_{k,p}`.
//!
//! Coefficients are sampled once per grid and evaluated by Horner's rule.

use crate::error::{NumericsError, Result};
use crate::expr::Expr;
use crate::grid::{self, Field, SpatialGrid};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone)]
pub struct Nonlinearity {
    degree: usize,
    signed_power: bool,
    leading: bool,
    grid: SpatialGrid,
    exprs: Vec<Expr>,
    samples: Vec<Field>,
}

impl Nonlinearity {
    pub fn new(spec: &ProblemSpec) -> Result<Nonlinearity> {
        let g = spec.grid()?;
        Self::on_grid(spec, g)
    }

    pub fn on_grid(spec: &ProblemSpec, grid: SpatialGrid) -> Result<Nonlinearity> {
        let samples = spec.sample_coefficients_on(&grid)?;
        Ok(Nonlinearity {
            degree: spec.degree(),
            signed_power: spec.signed_power(),
            leading: true,
            grid,
            exprs: spec.coeffs().to_vec(),
            samples,
        })
    }

    /// Drops the `-u^N` term. Only meant for exercising the pure diffusion
    /// part of the integrator.
    pub fn without_leading_term(mut self) -> Nonlinearity {
        self.leading = false;
        self
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn signed_power(&self) -> bool {
        self.signed_power
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn coefficient_samples(&self) -> &[Field] {
        &self.samples
    }

    pub fn coefficient_exprs(&self) -> &[Expr] {
        &self.exprs
    }

    /// Coefficient values when every `a_i` is the same at all nodes.
    pub fn constant_coefficients(&self) -> Result<Vec<f64>> {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let first = f.values()[0];
                let tol = 1e-13 * first.abs().max(1.0);
                if f.values().iter().all(|v| (v - first).abs() <= tol) {
                    Ok(first)
                } else {
                    Err(NumericsError::NonConstantCoefficients(i))
                }
            })
            .collect()
    }

    /// Coefficient values at an arbitrary point, evaluated from the expressions.
    pub fn coefficients_at(&self, x: f64) -> Result<Vec<f64>> {
        self.exprs
            .iter()
            .map(|e| e.eval(x).map_err(|err| NumericsError::Range(err.to_string())))
            .collect()
    }

    fn check_grid(&self, u: &Field) -> Result<()> {
        if *u.grid() == self.grid {
            Ok(())
        } else {
            Err(grid::GridError::GridMismatch.into())
        }
    }

    fn pointwise(&self, u: &Field, what: &str, f: impl Fn(&dyn Fn(usize) -> f64, f64) -> f64) -> Result<Field> {
        self.check_grid(u)?;
        let out: Vec<f64> = u
            .values()
            .iter()
            .enumerate()
            .map(|(j, &v)| f(&|i| self.samples[i].values()[j], v))
            .collect();
        if let Some(bad) = out.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::Range(format!("{what} at node {bad}")));
        }
        Ok(Field::from_raw(self.grid, out))
    }

    pub fn apply_p(&self, u: &Field) -> Result<Field> {
        self.pointwise(u, "P(u)", |a, v| self.p_scalar(a, v))
    }

    pub fn apply_dp(&self, u: &Field) -> Result<Field> {
        self.pointwise(u, "P'(u)", |a, v| self.dp_scalar(a, v))
    }

    pub fn potential(&self, u: &Field) -> Result<Field> {
        self.pointwise(u, "potential", |a, v| self.q_scalar(a, v))
    }

    /// `P` at one value with coefficients supplied by `a(i)`.
    pub fn p_scalar(&self, a: &dyn Fn(usize) -> f64, u: f64) -> f64 {
        let n = self.degree;
        let mut acc = 0.0;
        for i in (0..n).rev() {
            acc = acc * u + a(i);
        }
        if !self.leading {
            return acc;
        }
        if self.signed_power {
            acc - u * u.abs().powi(n as i32 - 1)
        } else {
            acc - u.powi(n as i32)
        }
    }

    pub fn dp_scalar(&self, a: &dyn Fn(usize) -> f64, u: f64) -> f64 {
        let n = self.degree;
        let mut acc = 0.0;
        for i in (1..n).rev() {
            acc = acc * u + i as f64 * a(i);
        }
        if !self.leading {
            return acc;
        }
        let lead = if self.signed_power {
            u.abs().powi(n as i32 - 1)
        } else {
            u.powi(n as i32 - 1)
        };
        acc - n as f64 * lead
    }

    /// Antiderivative in `u` vanishing at `u = 0`.
    pub fn q_scalar(&self, a: &dyn Fn(usize) -> f64, u: f64) -> f64 {
        let n = self.degree;
        let mut acc = 0.0;
        for i in (0..n).rev() {
            acc = acc * u + a(i) / (i + 1) as f64;
        }
        acc *= u;
        if !self.leading {
            return acc;
        }
        let lead = if self.signed_power {
            u.abs().powi(n as i32 + 1)
        } else {
            u.powi(n as i32 + 1)
        };
        acc - lead / (n + 1) as f64
    }

    /// `‖P(u) - a_0‖_{k,p} / ‖u‖_{k,p}`.
    pub fn lemma1_ratio(&self, u: &Field, k: usize, p: f64) -> Result<f64> {
        let denom = grid::sobolev_norm(u, k, p)?;
        if denom == 0.0 {
            return Err(NumericsError::ZeroDenominator);
        }
        let without_constant = self.apply_p(u)?.sub(&self.samples[0])?;
        Ok(grid::sobolev_norm(&without_constant, k, p)? / denom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use crate::problem::ProblemSpecDoc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn instance(coeffs: &[&str], signed: bool, boundary: Boundary) -> Nonlinearity {
        let spec = ProblemSpec::from_doc(&ProblemSpecDoc {
            n: coeffs.len() as i64,
            coeffs: coeffs.iter().map(|s| s.to_string()).collect(),
            box_half_length: 5.0,
            grid_points: 32,
            boundary,
            signed_power: signed,
            sup_guard: 1e6,
            spatial_dim: 1,
        })
        .unwrap();
        Nonlinearity::new(&spec).unwrap()
    }

    fn fisher() -> Nonlinearity {
        instance(&["0", "1"], false, Boundary::Periodic)
    }

    #[test]
    fn p_examples() {
        let nl = fisher();
        let g = *nl.grid();
        assert_eq!(nl.apply_p(&g.constant(0.0)).unwrap().sup_norm(), 0.0);
        assert_eq!(nl.apply_p(&g.constant(1.0)).unwrap().sup_norm(), 0.0);
        let cubic = instance(&["0", "0", "0"], false, Boundary::Periodic);
        let p = cubic.apply_p(&g.constant(2.0)).unwrap();
        assert!(p.values().iter().all(|&v| v == -8.0));
        let signed = instance(&["0", "0"], true, Boundary::Periodic);
        let p = signed.apply_p(&g.constant(-3.0)).unwrap();
        assert!(p.values().iter().all(|&v| v == 9.0));
        let plain = instance(&["0", "0"], false, Boundary::Periodic);
        assert!(plain.apply_p(&g.constant(-3.0)).unwrap().values().iter().all(|&v| v == -9.0));
    }

    #[test]
    fn dp_examples() {
        let g = *fisher().grid();
        assert!(fisher().apply_dp(&g.zeros()).unwrap().values().iter().all(|&v| v == 1.0));
        let cubic = instance(&["0", "0", "0"], false, Boundary::Periodic);
        assert!(cubic.apply_dp(&g.constant(2.0)).unwrap().values().iter().all(|&v| v == -12.0));
        let signed = instance(&["0", "0"], true, Boundary::Periodic);
        assert!(signed.apply_dp(&g.constant(-3.0)).unwrap().values().iter().all(|&v| v == -6.0));
    }

    #[test]
    fn potential_examples() {
        let nl = fisher();
        let g = *nl.grid();
        assert_eq!(nl.potential(&g.zeros()).unwrap().sup_norm(), 0.0);
        let q = nl.potential(&g.constant(1.0)).unwrap();
        assert!(q.values().iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn overflow_is_a_range_error() {
        let nl = instance(&["0", "0", "0"], false, Boundary::Periodic);
        let g = *nl.grid();
        assert!(matches!(nl.apply_p(&g.constant(1e200)), Err(NumericsError::Range(_))));
    }

    fn variable_instances() -> Vec<Nonlinearity> {
        let mut out = Vec::new();
        for signed in [false, true] {
            for b in [Boundary::Periodic, Boundary::Neumann0] {
                out.push(instance(&["0.5*exp(-x^2)", "1", "-0.3*cos(x)"], signed, b));
                out.push(instance(&["0.1*sin(x)", "tanh(x)"], signed, b));
                out.push(instance(&["0", "0.2", "0", "1.5*exp(-x^2)"], signed, b));
            }
        }
        out
    }

    // Central-difference oracle for dP and for the potential's derivative.
    #[test]
    fn derivatives_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eps = 1e-5;
        for nl in variable_instances() {
            let g = *nl.grid();
            for _ in 0..20 {
                let u = g.sample_fn(|_| rng.gen_range(-2.0..2.0));
                let up = u.map(|v| v + eps);
                let um = u.map(|v| v - eps);
                let p = nl.apply_p(&u).unwrap();
                let dp = nl.apply_dp(&u).unwrap();
                let fd_p = nl.apply_p(&up).unwrap().sub(&nl.apply_p(&um).unwrap()).unwrap().scale(0.5 / eps);
                let fd_q = nl.potential(&up).unwrap().sub(&nl.potential(&um).unwrap()).unwrap().scale(0.5 / eps);
                for j in 0..g.len() {
                    assert!((fd_p.values()[j] - dp.values()[j]).abs() < 1e-6);
                    assert!((fd_q.values()[j] - p.values()[j]).abs() < 1e-6);
                }
            }
        }
    }

    // Independent scalar evaluation by explicit powers.
    #[test]
    fn constant_fields_match_scalar_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for signed in [false, true] {
            for coeffs in [&["0", "1"][..], &["0.5", "-1", "2"][..], &["1", "0", "-0.25", "0.5"][..]] {
                let nl = instance(coeffs, signed, Boundary::Periodic);
                let a: Vec<f64> = coeffs.iter().map(|s| s.parse().unwrap()).collect();
                let n = a.len() as i32;
                for _ in 0..25 {
                    let r: f64 = rng.gen_range(-3.0..3.0);
                    let lead = if signed { r * r.abs().powi(n - 1) } else { r.powi(n) };
                    let oracle = -lead + a.iter().enumerate().map(|(i, c)| c * r.powi(i as i32)).sum::<f64>();
                    let p = nl.apply_p(&nl.grid().constant(r)).unwrap();
                    for &v in p.values() {
                        assert!((v - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn constant_coefficient_detection() {
        assert_eq!(fisher().constant_coefficients().unwrap(), vec![0.0, 1.0]);
        let nl = instance(&["0.1*sin(x)", "1"], false, Boundary::Periodic);
        assert!(matches!(nl.constant_coefficients(), Err(NumericsError::NonConstantCoefficients(0))));
    }

    #[test]
    fn lemma1_ratio_examples() {
        let nl = fisher();
        let g = *nl.grid();
        assert!(matches!(nl.lemma1_ratio(&g.zeros(), 1, 2.0), Err(NumericsError::ZeroDenominator)));
        assert_eq!(nl.lemma1_ratio(&g.constant(1.0), 0, 2.0).unwrap(), 0.0);
        // a_0 is removed before taking the norm.
        let shifted = instance(&["3", "1"], false, Boundary::Periodic);
        let r = shifted.lemma1_ratio(&g.constant(1.0), 0, 2.0).unwrap();
        assert!(r.abs() < 1e-15);
    }
}
