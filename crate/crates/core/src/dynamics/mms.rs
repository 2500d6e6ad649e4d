//! Solver verification with manufactured solutions `u*(t, x) = f(x) g(t)`.
//!
//! The forcing `u*_t - Δu* - P(u*)` is built from high-order finite
//! differences of the sampled expressions (the language has no symbolic
//! derivatives), then the forced problem is integrated at fixed step on two
//! ladders: one refining `dt` on a fixed fine grid, one refining `h` with
//! `dt ∝ h²`. Observed orders come from successive error ratios.

use serde::{Deserialize, Serialize};

use crate::error::{NumericsError, Result};
use crate::expr::Expr;
use crate::grid::{Boundary, Field, SpatialGrid};
use crate::nonlinearity::Nonlinearity;
use crate::problem::ProblemSpec;

use super::{imex_step_with, StepError};

/// `u*(t, x) = space(x) · time(t)`. The time factor is written in the
/// variable `x`, which stands for `t` there.
#[derive(Debug, Clone, PartialEq)]
pub struct Manufactured {
    pub space: Expr,
    pub time: Expr,
}

impl Manufactured {
    pub fn parse(space: &str, time: &str) -> std::result::Result<Self, crate::expr::ExprError> {
        Ok(Manufactured { space: Expr::parse(space)?, time: Expr::parse(time)? })
    }

    fn eval_time(&self, t: f64) -> Result<f64> {
        self.time.eval(t).map_err(|e| NumericsError::Range(e.to_string()))
    }

    fn eval_space(&self, x: f64) -> Result<f64> {
        self.space.eval(x).map_err(|e| NumericsError::Range(e.to_string()))
    }

    fn time_derivative(&self, t: f64) -> Result<f64> {
        let d = 1e-3;
        let f = |s: f64| self.eval_time(s);
        Ok((-f(t + 2.0 * d)? + 8.0 * f(t + d)? - 8.0 * f(t - d)? + f(t - 2.0 * d)?) / (12.0 * d))
    }

    fn space_second_derivative(&self, x: f64) -> Result<f64> {
        let d = 1e-2;
        let f = |s: f64| self.eval_space(s);
        Ok((-f(x + 2.0 * d)? + 16.0 * f(x + d)? - 30.0 * f(x)? + 16.0 * f(x - d)? - f(x - 2.0 * d)?) / (12.0 * d * d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmsLadder {
    pub t_final: f64,
    /// Number of halvings; the ladder has `refinements + 1` levels.
    pub refinements: usize,
    /// Coarsest step of the temporal ladder.
    pub dt0: f64,
    /// Grid of the temporal ladder.
    pub temporal_grid_points: usize,
    /// Coarsest grid of the spatial ladder.
    pub spatial_grid_points: usize,
    /// Spatial ladder uses `dt = dt_per_h2 · h²`.
    pub dt_per_h2: f64,
}

impl Default for MmsLadder {
    fn default() -> Self {
        MmsLadder {
            t_final: 0.5,
            refinements: 3,
            dt0: 0.05,
            temporal_grid_points: 256,
            spatial_grid_points: 32,
            dt_per_h2: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderLevel {
    pub grid_points: usize,
    pub h: f64,
    pub dt: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsReport {
    pub temporal: Vec<LadderLevel>,
    pub spatial: Vec<LadderLevel>,
    /// `log2(e_k / e_{k+1})` for each consecutive pair.
    pub temporal_orders: Vec<f64>,
    pub spatial_orders: Vec<f64>,
    /// Order from the finest pair, or `None` when the errors vanish.
    pub temporal_order: Option<f64>,
    pub spatial_order: Option<f64>,
}

impl MmsReport {
    pub fn max_error(&self) -> f64 {
        self.temporal.iter().chain(&self.spatial).map(|l| l.error).fold(0.0, f64::max)
    }

    /// Temporal order in `[0.8, 1.2]` and spatial order in `[1.7, 2.3]`;
    /// an exactly reproduced solution (all errors zero) also passes.
    pub fn passes(&self) -> bool {
        let in_range = |o: Option<f64>, lo: f64, hi: f64| match o {
            Some(v) => (lo..=hi).contains(&v),
            None => true,
        };
        in_range(self.temporal_order, 0.8, 1.2) && in_range(self.spatial_order, 1.7, 2.3)
    }
}

/// Sup error at `t_final` of the forced fixed-step integration.
pub fn mms_error(spec: &ProblemSpec, u_star: &Manufactured, grid: SpatialGrid, dt: f64, t_final: f64) -> Result<f64> {
    let nl = Nonlinearity::on_grid(spec, grid)?;
    let space = grid.sample(|x| u_star.eval_space(x))?;
    let space_xx = grid.sample(|x| u_star.space_second_derivative(x))?;
    let steps = (t_final / dt).round() as usize;
    if steps == 0 || ((steps as f64) * dt - t_final).abs() > 1e-9 * t_final {
        return Err(NumericsError::Precondition(format!("dt = {dt} does not divide t_final = {t_final}")));
    }
    let exact_at = |t: f64| -> Result<Field> { Ok(space.scale(u_star.eval_time(t)?)) };

    let mut u = exact_at(0.0)?;
    for n in 0..steps {
        let t = n as f64 * dt;
        let u_exact = exact_at(t)?;
        let g_t = u_star.eval_time(t)?;
        let dg_t = u_star.time_derivative(t)?;
        let forcing = space
            .scale(dg_t)
            .axpy(-g_t, &space_xx)?
            .sub(&nl.apply_p(&u_exact)?)?;
        let p = nl.apply_p(&u)?;
        u = imex_step_with(&u, &p, dt, Some(&forcing)).map_err(|e| match e {
            StepError::NonFinite => NumericsError::Range("manufactured run".into()),
            StepError::SolveDegraded(r) => NumericsError::Range(format!("implicit solve residual {r:e}")),
        })?;
    }
    Ok(u.sup_distance(&exact_at(steps as f64 * dt)?)?)
}

fn orders(levels: &[LadderLevel]) -> Vec<f64> {
    levels.windows(2).map(|w| (w[0].error / w[1].error).log2()).collect()
}

fn finest_order(levels: &[LadderLevel]) -> Option<f64> {
    let n = levels.len();
    if n < 2 || levels[n - 1].error == 0.0 || levels[n - 2].error == 0.0 {
        return None;
    }
    Some((levels[n - 2].error / levels[n - 1].error).log2())
}

/// Grid sizes whose spacing halves exactly at each level.
fn spatial_sizes(m0: usize, boundary: Boundary, refinements: usize) -> Vec<usize> {
    (0..=refinements)
        .map(|k| match boundary {
            Boundary::Dirichlet0 => (m0 + 1) * (1 << k) - 1,
            Boundary::Periodic | Boundary::Neumann0 => m0 * (1 << k),
        })
        .collect()
}

pub fn mms_verify(spec: &ProblemSpec, u_star: &Manufactured, refinements: usize) -> Result<MmsReport> {
    mms_verify_with(spec, u_star, &MmsLadder { refinements, ..MmsLadder::default() })
}

pub fn mms_verify_with(spec: &ProblemSpec, u_star: &Manufactured, ladder: &MmsLadder) -> Result<MmsReport> {
    if ladder.refinements == 0 {
        return Err(NumericsError::Precondition("need at least one refinement".into()));
    }
    let half = spec.box_half_length();
    let boundary = spec.boundary();

    let fine = SpatialGrid::new(half, ladder.temporal_grid_points, boundary)?;
    let temporal = (0..=ladder.refinements)
        .map(|k| {
            let dt = ladder.dt0 / (1u64 << k) as f64;
            let error = mms_error(spec, u_star, fine, dt, ladder.t_final)?;
            Ok(LadderLevel { grid_points: fine.len(), h: fine.h(), dt, error })
        })
        .collect::<Result<Vec<_>>>()?;

    let spatial = spatial_sizes(ladder.spatial_grid_points, boundary, ladder.refinements)
        .into_iter()
        .map(|m| {
            let g = SpatialGrid::new(half, m, boundary)?;
            // dt must divide t_final: round the step count up.
            let target = ladder.dt_per_h2 * g.h() * g.h();
            let steps = (ladder.t_final / target).ceil();
            let dt = ladder.t_final / steps;
            let error = mms_error(spec, u_star, g, dt, ladder.t_final)?;
            Ok(LadderLevel { grid_points: m, h: g.h(), dt, error })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MmsReport {
        temporal_orders: orders(&temporal),
        spatial_orders: orders(&spatial),
        temporal_order: finest_order(&temporal),
        spatial_order: finest_order(&spatial),
        temporal,
        spatial,
    })
}
