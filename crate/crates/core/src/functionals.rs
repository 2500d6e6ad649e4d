//! The action functional, the windowed energy functional, and the residual
//! of the identity `E = A(end) - A(start)` that ties them together along a
//! solution.
//!
//! Sign convention: the implemented action is
//! `A(u) = ∫ -½|∇u|² + Q(x, u) dx` with `∂Q/∂u = P`, so that its L² gradient
//! is `Δu + P(u)` and `d/dt A(u(t)) = ‖u_t‖² ≥ 0` along the flow. The form
//! with `+½|∇u|²` is available as [`action_literal`] for comparison.

use crate::dynamics::Trajectory;
use crate::error::{NumericsError, Result};
use crate::grid::{self, Field};
use crate::nonlinearity::Nonlinearity;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionValue {
    /// `-dirichlet_part + potential_part`
    pub value: f64,
    /// `½ h Σ_edges |D⁺u|²`
    pub dirichlet_part: f64,
    /// `h Σ Q(x_j, u_j)`
    pub potential_part: f64,
    /// `h Σ |Q(x_j, u_j)|`, used as the roundoff scale of `potential_part`.
    pub potential_magnitude: f64,
}

impl ActionValue {
    /// Size of the terms summed into `value`; roundoff in `value` is a small
    /// multiple of `ε · scale`.
    pub fn scale(&self) -> f64 {
        self.dirichlet_part + self.potential_magnitude
    }
}

pub fn action(nl: &Nonlinearity, u: &Field) -> Result<ActionValue> {
    let dirichlet_part = 0.5 * grid::dirichlet_integral(u);
    let q = nl.potential(u)?;
    let potential_part = grid::integrate(&q);
    let potential_magnitude = grid::integrate(&q.map(f64::abs));
    let value = -dirichlet_part + potential_part;
    if !(value.is_finite() && dirichlet_part.is_finite()) {
        return Err(NumericsError::Range("action".into()));
    }
    Ok(ActionValue { value, dirichlet_part, potential_part, potential_magnitude })
}

/// Action with the gradient term entering as `+½|∇u|²`.
pub fn action_literal(nl: &Nonlinearity, u: &Field) -> Result<f64> {
    let a = action(nl, u)?;
    Ok(a.dirichlet_part + a.potential_part)
}

/// Right side of the flow, `Δ_h u + P(u)`; the L² gradient of [`action`].
pub fn flow_field(nl: &Nonlinearity, u: &Field) -> Result<Field> {
    let p = nl.apply_p(u)?;
    Ok(grid::laplacian(u).add(&p)?)
}

/// Running total of the energy `½∫∫ |u_t|² + |Δu + P(u)|² dx dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyAccumulator {
    pub cumulative: f64,
    pub window_start_t: f64,
    pub last_t: f64,
}

impl EnergyAccumulator {
    pub fn new(t0: f64) -> Self {
        EnergyAccumulator { cumulative: 0.0, window_start_t: t0, last_t: t0 }
    }

    /// Adds one step from `u_before` to `u_after`. The elliptic term is taken
    /// at the left endpoint.
    pub fn step(&self, u_before: &Field, u_after: &Field, dt: f64, nl: &Nonlinearity) -> Result<Self> {
        let f = flow_field(nl, u_before)?;
        self.step_with_flow(u_before, u_after, dt, &f)
    }

    pub(crate) fn step_with_flow(&self, u_before: &Field, u_after: &Field, dt: f64, flow_before: &Field) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(NumericsError::Precondition(format!("dt must be positive, got {dt}")));
        }
        let addend = energy_addend(u_before, u_after, dt, flow_before)?;
        Ok(EnergyAccumulator {
            cumulative: self.cumulative + addend,
            window_start_t: self.window_start_t,
            last_t: self.last_t + dt,
        })
    }
}

fn energy_addend(u_before: &Field, u_after: &Field, dt: f64, flow_before: &Field) -> Result<f64> {
    let ut = u_after.sub(u_before)?.scale(1.0 / dt);
    let kinetic = grid::integrate(&ut.map(|v| v * v));
    let elliptic = grid::integrate(&flow_before.map(|v| v * v));
    let addend = 0.5 * dt * (kinetic + elliptic);
    if addend.is_finite() {
        Ok(addend)
    } else {
        Err(NumericsError::Range("energy increment".into()))
    }
}

pub fn energy_step(
    acc: &EnergyAccumulator,
    u_before: &Field,
    u_after: &Field,
    dt: f64,
    nl: &Nonlinearity,
) -> Result<EnergyAccumulator> {
    acc.step(u_before, u_after, dt, nl)
}

/// `E_window - (A(u_end) - A(u_start))`, signed. Zero for an exact solution;
/// for a discrete trajectory it is `½∫∫ (u_t - Δu - P(u))²` up to the
/// quadrature error of the stepping.
pub fn identity_defect(traj: &Trajectory, nl: &Nonlinearity) -> Result<f64> {
    let (first, last) = traj.endpoints();
    let gap = action(nl, last)?.value - action(nl, first)?.value;
    Ok(traj.total_energy() - gap)
}

/// `|E_window - (A(u_end) - A(u_start))|`
pub fn identity_residual(traj: &Trajectory, nl: &Nonlinearity) -> Result<f64> {
    Ok(identity_defect(traj, nl)?.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use crate::problem::{ProblemSpec, ProblemSpecDoc};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nl(coeffs: &[&str], boundary: Boundary, m: usize) -> Nonlinearity {
        let spec = ProblemSpec::from_doc(&ProblemSpecDoc {
            n: coeffs.len() as i64,
            coeffs: coeffs.iter().map(|s| s.to_string()).collect(),
            box_half_length: 5.0,
            grid_points: m as i64,
            boundary,
            signed_power: false,
            sup_guard: 1e6,
            spatial_dim: 1,
        })
        .unwrap();
        Nonlinearity::new(&spec).unwrap()
    }

    #[test]
    fn action_examples() {
        let fisher = nl(&["0", "1"], Boundary::Periodic, 64);
        let g = *fisher.grid();
        assert_eq!(action(&fisher, &g.zeros()).unwrap().value, 0.0);
        let a1 = action(&fisher, &g.constant(1.0)).unwrap();
        assert!((a1.value - 10.0 / 6.0).abs() < 1e-13);
        assert_eq!(a1.dirichlet_part, 0.0);
        assert_eq!(a1.value, -a1.dirichlet_part + a1.potential_part);
    }

    #[test]
    fn literal_sign_differs_only_in_gradient_term() {
        let fisher = nl(&["0", "1"], Boundary::Periodic, 64);
        let u = fisher.grid().sample_fn(|x| 0.5 + 0.1 * x.sin());
        let a = action(&fisher, &u).unwrap();
        let lit = action_literal(&fisher, &u).unwrap();
        assert!((lit - a.value - 2.0 * a.dirichlet_part).abs() < 1e-14);
        assert!(a.dirichlet_part > 0.0);
    }

    #[test]
    fn energy_of_equilibrium_step_is_zero() {
        let fisher = nl(&["0", "1"], Boundary::Neumann0, 32);
        let g = *fisher.grid();
        for c in [0.0, 1.0] {
            let u = g.constant(c);
            let acc = energy_step(&EnergyAccumulator::new(0.0), &u, &u, 0.1, &fisher).unwrap();
            assert_eq!(acc.cumulative, 0.0);
            assert!((acc.last_t - 0.1).abs() < 1e-15);
        }
        assert!(energy_step(&EnergyAccumulator::new(0.0), &g.zeros(), &g.zeros(), 0.0, &fisher).is_err());
    }

    // The identity behind the energy/action relation: the directional
    // derivative of A is ⟨Δ_h u + P(u), v⟩.
    #[test]
    fn action_gradient_is_flow_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for b in [Boundary::Periodic, Boundary::Dirichlet0, Boundary::Neumann0] {
            let n = nl(&["0.3*exp(-x^2)", "1", "-0.5*tanh(x)"], b, 48);
            let g = *n.grid();
            for _ in 0..20 {
                let u = g.sample_fn(|_| rng.gen_range(-1.0..1.0));
                let v = g.sample_fn(|_| rng.gen_range(-1.0..1.0));
                let eps = 1e-5;
                let ap = action(&n, &u.axpy(eps, &v).unwrap()).unwrap().value;
                let am = action(&n, &u.axpy(-eps, &v).unwrap()).unwrap().value;
                let fd = (ap - am) / (2.0 * eps);
                let exact = flow_field(&n, &u).unwrap().inner(&v).unwrap();
                assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0), "{b}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn accumulator_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = nl(&["0", "1", "0"], Boundary::Periodic, 32);
        let g = *n.grid();
        let mut acc = EnergyAccumulator::new(0.0);
        let mut u = g.sample_fn(|_| rng.gen_range(-1.0..1.0));
        for _ in 0..50 {
            let next = u.map(|v| v + rng.gen_range(-0.1..0.1));
            let stepped = acc.step(&u, &next, rng.gen_range(1e-4..1e-1), &n).unwrap();
            assert!(stepped.cumulative >= acc.cumulative);
            acc = stepped;
            u = next;
        }
        assert!(acc.cumulative >= 0.0);
    }
}
