//! Time integration of `u_t = Δu + P(u)`.
//!
//! One step is first-order IMEX: `(I - dt Δ_h) u_next = u + dt (P(u) + g)`,
//! a single (cyclic) tridiagonal solve. The driver adapts `dt` on the size
//! of the explicit increment, accumulates the energy every step, and ends
//! each run as converged, blown up, or out of time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{NumericsError, Result};
use crate::functionals::{self, EnergyAccumulator};
use crate::grid::{self, Field};
use crate::nonlinearity::Nonlinearity;

pub mod mms;

/// Largest accepted relative residual of the implicit solve.
pub const SOLVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("non-finite right side or solution")]
    NonFinite,
    #[error("implicit solve degraded: relative residual {0:e}")]
    SolveDegraded(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    /// The step is halved while `dt ‖P(u)‖∞ > increment_threshold · max(1, ‖u‖∞)`.
    #[serde(default = "default_increment_threshold")]
    pub increment_threshold: f64,
    #[serde(default = "default_sup_guard")]
    pub sup_guard: f64,
}

fn default_safety() -> f64 {
    0.9
}

fn default_increment_threshold() -> f64 {
    0.1
}

fn default_sup_guard() -> f64 {
    1e6
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            dt_init: 1e-3,
            dt_min: 1e-10,
            dt_max: 1e-2,
            safety: default_safety(),
            increment_threshold: default_increment_threshold(),
            sup_guard: default_sup_guard(),
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_min <= self.dt_init
            && self.dt_init <= self.dt_max
            && self.dt_max.is_finite()
            && self.safety > 0.0
            && self.safety <= 1.0
            && self.increment_threshold > 0.0
            && self.sup_guard > 0.0;
        if ok {
            Ok(())
        } else {
            Err(NumericsError::Precondition(format!("invalid step control {self:?}")))
        }
    }

    /// Fixed step: no adaptation, `dt_min = dt_init = dt_max = dt`.
    pub fn fixed(dt: f64, sup_guard: f64) -> Self {
        StepControl {
            dt_init: dt,
            dt_min: dt,
            dt_max: dt,
            safety: 1.0,
            increment_threshold: f64::INFINITY,
            sup_guard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopRule {
    /// Converged once `‖Δ_h u + P(u)‖∞ < tol_eq`.
    pub tol_eq: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { tol_eq: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub t_max: f64,
    pub stop: StopRule,
    pub snapshot_stride: usize,
}

impl RunOptions {
    pub fn new(t_max: f64) -> Self {
        RunOptions { t_max, stop: StopRule::default(), snapshot_stride: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Converged,
    BlowUp,
    TMaxReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub dt: f64,
    pub sup_norm: f64,
    pub action: f64,
    pub energy_cum: f64,
    pub ut_sup: f64,
    #[serde(skip)]
    pub action_scale: f64,
}

pub const DIAGNOSTICS_HEADER: &str = "t,dt,sup_norm,action,energy_cum,ut_sup";

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field,
    pub ut_sup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    snapshots: Vec<Snapshot>,
    diagnostics: Vec<DiagnosticRow>,
    status: RunStatus,
    blow_up_time: Option<f64>,
    blow_up_sign: Option<f64>,
    final_state: Field,
    initial_state: Field,
}

impl Trajectory {
    fn start(u0: &Field, row: DiagnosticRow) -> Self {
        Trajectory {
            snapshots: vec![Snapshot { t: row.t, field: u0.clone(), ut_sup: row.ut_sup }],
            diagnostics: vec![row],
            status: RunStatus::Running,
            blow_up_time: None,
            blow_up_sign: None,
            final_state: u0.clone(),
            initial_state: u0.clone(),
        }
    }

    /// Builds a trajectory from given snapshots, accumulating the energy
    /// between consecutive pairs as if each were one step.
    pub fn from_snapshots(nl: &Nonlinearity, snaps: &[(f64, Field)]) -> Result<Self> {
        let (t0, u0) = snaps
            .first()
            .ok_or_else(|| NumericsError::Precondition("need at least one snapshot".into()))?;
        let row = diagnostic_row(nl, u0, *t0, 0.0, 0.0, &functionals::flow_field(nl, u0)?)?;
        let mut traj = Trajectory::start(u0, row);
        let mut acc = EnergyAccumulator::new(*t0);
        for pair in snaps.windows(2) {
            let (ta, ua) = &pair[0];
            let (tb, ub) = &pair[1];
            if tb <= ta {
                return Err(NumericsError::Precondition("snapshot times must increase".into()));
            }
            acc = acc.step(ua, ub, tb - ta, nl)?;
            let flow = functionals::flow_field(nl, ub)?;
            let row = diagnostic_row(nl, ub, *tb, tb - ta, acc.cumulative, &flow)?;
            traj.snapshots.push(Snapshot { t: *tb, field: ub.clone(), ut_sup: row.ut_sup });
            traj.diagnostics.push(row);
            traj.final_state = ub.clone();
        }
        traj.status = RunStatus::TMaxReached;
        Ok(traj)
    }

    fn finish(&mut self, status: RunStatus) {
        debug_assert_eq!(self.status, RunStatus::Running, "status is final once set");
        self.status = status;
    }

    pub fn status(&self) -> RunStatus {
        self.status
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn diagnostics(&self) -> &[DiagnosticRow] {
        &self.diagnostics
    }

    pub fn final_state(&self) -> &Field {
        &self.final_state
    }

    pub fn initial_state(&self) -> &Field {
        &self.initial_state
    }

    pub fn endpoints(&self) -> (&Field, &Field) {
        (&self.initial_state, &self.final_state)
    }

    pub fn final_time(&self) -> f64 {
        self.diagnostics.last().map(|r| r.t).unwrap_or(0.0)
    }

    pub fn total_energy(&self) -> f64 {
        self.diagnostics.last().map(|r| r.energy_cum).unwrap_or(0.0)
    }

    pub fn last_row(&self) -> &DiagnosticRow {
        self.diagnostics.last().expect("trajectory has a first row")
    }

    /// Time at which blow-up was declared.
    pub fn blow_up_time(&self) -> Option<f64> {
        self.blow_up_time
    }

    /// Sign of the extremum that escaped when blow-up was declared.
    pub fn blow_up_sign(&self) -> Option<f64> {
        self.blow_up_sign
    }

    pub fn accepted_steps(&self) -> usize {
        self.diagnostics.len() - 1
    }

    pub fn write_diagnostics_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{DIAGNOSTICS_HEADER}")?;
        for r in &self.diagnostics {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.dt, r.sup_norm, r.action, r.energy_cum, r.ut_sup
            )?;
        }
        Ok(())
    }
}

fn diagnostic_row(nl: &Nonlinearity, u: &Field, t: f64, dt: f64, energy_cum: f64, flow: &Field) -> Result<DiagnosticRow> {
    let a = functionals::action(nl, u)?;
    Ok(DiagnosticRow {
        t,
        dt,
        sup_norm: u.sup_norm(),
        action: a.value,
        energy_cum,
        ut_sup: flow.sup_norm(),
        action_scale: a.scale(),
    })
}

/// One IMEX step `(I - dt Δ_h) u_next = u + dt (P(u) + forcing)`.
pub fn imex_step(u: &Field, dt: f64, nl: &Nonlinearity, forcing: Option<&Field>) -> Result<Field, StepError> {
    let p = nl.apply_p(u).map_err(|_| StepError::NonFinite)?;
    imex_step_with(u, &p, dt, forcing)
}

pub(crate) fn imex_step_with(u: &Field, p: &Field, dt: f64, forcing: Option<&Field>) -> Result<Field, StepError> {
    let g = *u.grid();
    let rhs: Vec<f64> = match forcing {
        Some(f) => u
            .values()
            .iter()
            .zip(p.values())
            .zip(f.values())
            .map(|((a, b), c)| a + dt * (b + c))
            .collect(),
        None => u.values().iter().zip(p.values()).map(|(a, b)| a + dt * b).collect(),
    };
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(StepError::NonFinite);
    }
    let op = g.laplacian_operator().scaled(-dt).shifted(1.0);
    let x = op.solve(&rhs).map_err(|_| StepError::NonFinite)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StepError::NonFinite);
    }
    let res = op.relative_residual(&x, &rhs);
    if res > SOLVE_TOL {
        return Err(StepError::SolveDegraded(res));
    }
    Ok(Field::from_raw(g, x))
}

fn escaping_sign(u: &Field) -> f64 {
    let v = u
        .values()
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Integrates from `u0` until convergence, blow-up, or `t_max`.
pub fn run(nl: &Nonlinearity, u0: &Field, ctrl: &StepControl, opts: &RunOptions) -> Result<Trajectory> {
    ctrl.validate()?;
    if !(opts.t_max > 0.0) {
        return Err(NumericsError::Precondition("t_max must be positive".into()));
    }
    if !u0.is_finite() {
        return Err(NumericsError::Precondition("initial field must be finite".into()));
    }
    let stride = opts.snapshot_stride.max(1);
    let mut u = u0.clone();
    let mut t = 0.0;

    let blow_up_now = |traj: &mut Trajectory, u: &Field, t: f64| {
        traj.blow_up_time = Some(t);
        traj.blow_up_sign = Some(escaping_sign(u));
        traj.finish(RunStatus::BlowUp);
    };

    let mut p = match nl.apply_p(&u) {
        Ok(p) => p,
        Err(_) => {
            let mut traj = Trajectory::start(&u, blank_row(&u));
            blow_up_now(&mut traj, &u, t);
            return Ok(traj);
        }
    };
    let mut flow = grid::laplacian(&u).add(&p)?;
    let mut traj = Trajectory::start(&u, diagnostic_row(nl, &u, t, 0.0, 0.0, &flow)?);
    let mut acc = EnergyAccumulator::new(t);
    let mut dt = ctrl.dt_init;
    let mut smooth_steps = 0usize;
    let mut steps = 0usize;

    loop {
        let ut_sup = traj.last_row().ut_sup;
        if ut_sup < opts.stop.tol_eq {
            traj.finish(RunStatus::Converged);
            break;
        }
        if t >= opts.t_max * (1.0 - 1e-12) {
            traj.finish(RunStatus::TMaxReached);
            break;
        }
        if u.sup_norm() > ctrl.sup_guard {
            blow_up_now(&mut traj, &u, t);
            break;
        }

        let allowed = ctrl.increment_threshold * u.sup_norm().max(1.0);
        let p_sup = p.sup_norm();
        while dt * p_sup > allowed && dt >= ctrl.dt_min {
            dt *= 0.5;
            smooth_steps = 0;
        }
        if dt < ctrl.dt_min {
            blow_up_now(&mut traj, &u, t);
            break;
        }
        let step_dt = dt.min(opts.t_max - t);

        let next = match imex_step_with(&u, &p, step_dt, None) {
            Ok(next) => next,
            Err(StepError::SolveDegraded(_)) => {
                dt *= 0.5;
                smooth_steps = 0;
                continue;
            }
            Err(StepError::NonFinite) => {
                blow_up_now(&mut traj, &u, t + step_dt);
                break;
            }
        };
        if next.sup_norm() > ctrl.sup_guard {
            blow_up_now(&mut traj, &next, t + step_dt);
            break;
        }
        let next_p = match nl.apply_p(&next) {
            Ok(p) => p,
            Err(_) => {
                blow_up_now(&mut traj, &next, t + step_dt);
                break;
            }
        };
        acc = match acc.step_with_flow(&u, &next, step_dt, &flow) {
            Ok(a) => a,
            Err(_) => {
                blow_up_now(&mut traj, &next, t + step_dt);
                break;
            }
        };
        let increment = step_dt * p_sup;
        t += step_dt;
        steps += 1;
        u = next;
        p = next_p;
        flow = grid::laplacian(&u).add(&p)?;
        let row = diagnostic_row(nl, &u, t, step_dt, acc.cumulative, &flow)?;
        if steps % stride == 0 {
            traj.snapshots.push(Snapshot { t, field: u.clone(), ut_sup: row.ut_sup });
        }
        traj.diagnostics.push(row);
        traj.final_state = u.clone();

        if increment <= 0.5 * ctrl.safety * allowed {
            smooth_steps += 1;
            if smooth_steps >= 10 {
                dt = (2.0 * dt).min(ctrl.dt_max);
                smooth_steps = 0;
            }
        } else {
            smooth_steps = 0;
        }
    }

    if traj.snapshots.last().map(|s| s.t) != Some(traj.final_time()) {
        let last = traj.last_row().clone();
        traj.snapshots.push(Snapshot { t: last.t, field: traj.final_state.clone(), ut_sup: last.ut_sup });
    }
    Ok(traj)
}

fn blank_row(u: &Field) -> DiagnosticRow {
    DiagnosticRow {
        t: 0.0,
        dt: 0.0,
        sup_norm: u.sup_norm(),
        action: f64::NAN,
        energy_cum: 0.0,
        ut_sup: f64::INFINITY,
        action_scale: f64::NAN,
    }
}

/// A step where the action dropped by more than the roundoff allowance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityViolation {
    pub step: usize,
    pub t: f64,
    pub decrease: f64,
    pub allowed: f64,
}

/// Roundoff allowance for one action difference: `10 · M · ε · scale`, where
/// `scale` is the magnitude of the terms summed into the two action values.
pub fn action_roundoff_allowance(grid_points: usize, scale_before: f64, scale_after: f64) -> f64 {
    10.0 * grid_points as f64 * f64::EPSILON * (scale_before + scale_after).max(1.0)
}

/// Every accepted step on which the discrete action decreased by more than
/// `allowance(row_before, row_after)`.
pub fn action_decreases(
    traj: &Trajectory,
    allowance: impl Fn(&DiagnosticRow, &DiagnosticRow) -> f64,
) -> Vec<MonotonicityViolation> {
    traj.diagnostics
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| {
            let decrease = w[0].action - w[1].action;
            let allowed = allowance(&w[0], &w[1]);
            (decrease > allowed).then_some(MonotonicityViolation { step: i + 1, t: w[1].t, decrease, allowed })
        })
        .collect()
}

/// Action decreases beyond roundoff on this trajectory's grid.
pub fn monotonicity_violations(traj: &Trajectory) -> Vec<MonotonicityViolation> {
    let m = traj.final_state.grid().len();
    action_decreases(traj, |a, b| action_roundoff_allowance(m, a.action_scale, b.action_scale))
}

/// Pairs of distinct snapshot times whose states coincide to `1e-10` while the
/// earlier one is not stationary and the trajectory travelled at least twice
/// that distance in between, i.e. it returned rather than drifted. A gradient
/// flow has no such recurrences.
pub fn recurrence_violations(traj: &Trajectory, tol_eq: f64) -> Vec<(f64, f64)> {
    let rows = &traj.diagnostics;
    // path[k] = Σ_{i ≤ k} dt_i · ut_sup_{i-1}, the sup-norm path length up to row k.
    let mut path = vec![0.0; rows.len()];
    for k in 1..rows.len() {
        path[k] = path[k - 1] + rows[k].dt * rows[k - 1].ut_sup;
    }
    let path_at = |t: f64| path[rows.partition_point(|r| r.t < t).min(rows.len() - 1)];
    let snaps = &traj.snapshots;
    let mut out = Vec::new();
    for i in 0..snaps.len() {
        for j in i + 1..snaps.len() {
            if snaps[i].t == snaps[j].t || snaps[i].ut_sup < tol_eq {
                continue;
            }
            let Ok(d) = snaps[i].field.sup_distance(&snaps[j].field) else { continue };
            if d < 1e-10 && d < 0.5 * (path_at(snaps[j].t) - path_at(snaps[i].t)) {
                out.push((snaps[i].t, snaps[j].t));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use crate::problem::{ProblemSpec, ProblemSpecDoc};
    use std::f64::consts::PI;

    pub(crate) fn nl(coeffs: &[&str], boundary: Boundary, m: usize, half: f64) -> Nonlinearity {
        let spec = ProblemSpec::from_doc(&ProblemSpecDoc {
            n: coeffs.len() as i64,
            coeffs: coeffs.iter().map(|s| s.to_string()).collect(),
            box_half_length: half,
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
    fn zero_stays_zero() {
        let n = nl(&["0", "1"], Boundary::Dirichlet0, 32, 5.0);
        let next = imex_step(&n.grid().zeros(), 0.1, &n, None).unwrap();
        assert_eq!(next.sup_norm(), 0.0);
    }

    #[test]
    fn pure_diffusion_damps_eigenmode() {
        let n = nl(&["0", "0"], Boundary::Periodic, 64, 5.0).without_leading_term();
        let g = *n.grid();
        let l = g.length();
        let u = g.sample_fn(|x| (2.0 * PI * x / l).sin());
        let h = g.h();
        let lambda = (2.0 / (h * h)) * (1.0 - (2.0 * PI * h / l).cos());
        for dt in [1e-3, 0.1, 2.0] {
            let next = imex_step(&u, dt, &n, None).unwrap();
            let factor = 1.0 / (1.0 + dt * lambda);
            for (a, b) in next.values().iter().zip(u.values()) {
                assert!((a - factor * b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_fisher_step_is_scalar_euler() {
        for b in [Boundary::Periodic, Boundary::Neumann0] {
            let n = nl(&["0", "1"], b, 40, 5.0);
            let g = *n.grid();
            for (u0, dt) in [(0.5, 0.01), (0.1, 0.3), (1.7, 0.05)] {
                let next = imex_step(&g.constant(u0), dt, &n, None).unwrap();
                let oracle = u0 + dt * u0 * (1.0 - u0);
                for &v in next.values() {
                    assert!((v - oracle).abs() < 1e-14, "{b} {v} {oracle}");
                }
            }
        }
    }

    #[test]
    fn forcing_enters_explicitly() {
        let n = nl(&["0", "0"], Boundary::Periodic, 16, 1.0).without_leading_term();
        let g = *n.grid();
        let next = imex_step(&g.constant(1.0), 0.5, &n, Some(&g.constant(2.0))).unwrap();
        assert!(next.values().iter().all(|v| (v - 2.0).abs() < 1e-14));
    }

    #[test]
    fn fisher_equilibrium_converges_immediately() {
        let n = nl(&["0", "1"], Boundary::Periodic, 32, 5.0);
        let traj = run(&n, &n.grid().constant(1.0), &StepControl::default(), &RunOptions::new(10.0)).unwrap();
        assert_eq!(traj.status(), RunStatus::Converged);
        assert_eq!(traj.accepted_steps(), 0);
        assert_eq!(traj.last_row().ut_sup, 0.0);
    }

    #[test]
    fn fisher_half_converges_to_one() {
        let n = nl(&["0", "1"], Boundary::Periodic, 32, 5.0);
        let traj = run(&n, &n.grid().constant(0.5), &StepControl::default(), &RunOptions::new(100.0)).unwrap();
        assert_eq!(traj.status(), RunStatus::Converged);
        assert!(traj.final_state().sup_distance(&n.grid().constant(1.0)).unwrap() < 1e-6);
        assert!(monotonicity_violations(&traj).is_empty());
        assert!(recurrence_violations(&traj, 1e-8).is_empty());
    }

    #[test]
    fn recurrence_detector_flags_returns_only() {
        let n = nl(&["0", "1"], Boundary::Periodic, 32, 5.0);
        let g = *n.grid();
        let a = g.sample_fn(|x| 0.5 + 0.1 * (0.6283185307179586 * x).sin());
        let b = a.map(|v| v + 0.05);
        let back = Trajectory::from_snapshots(&n, &[(0.0, a.clone()), (1.0, b.clone()), (2.0, a.clone())]).unwrap();
        assert_eq!(recurrence_violations(&back, 1e-8), vec![(0.0, 2.0)]);
        let onward = Trajectory::from_snapshots(&n, &[(0.0, a.clone()), (1.0, b.clone()), (2.0, b.map(|v| v + 0.05))]).unwrap();
        assert!(recurrence_violations(&onward, 1e-8).is_empty());
    }

    #[test]
    fn quadratic_blow_up_time() {
        let n = nl(&["0", "0"], Boundary::Periodic, 16, 1.0);
        for c in [1.0, 2.0] {
            let traj = run(&n, &n.grid().constant(-c), &StepControl::default(), &RunOptions::new(10.0)).unwrap();
            assert_eq!(traj.status(), RunStatus::BlowUp);
            let t = traj.blow_up_time().unwrap();
            assert!((t - 1.0 / c).abs() < 0.05 / c, "c={c} t={t}");
            assert_eq!(traj.blow_up_sign(), Some(-1.0));
        }
    }

    #[test]
    fn deterministic() {
        let n = nl(&["0", "1", "0"], Boundary::Neumann0, 48, 4.0);
        let u0 = n.grid().sample_fn(|x| 0.3 * (1.3 * x).sin() + 0.1);
        let a = run(&n, &u0, &StepControl::default(), &RunOptions::new(3.0)).unwrap();
        let b = run(&n, &u0, &StepControl::default(), &RunOptions::new(3.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn times_increase_and_status_final() {
        let n = nl(&["0", "1", "0"], Boundary::Periodic, 32, 3.0);
        let u0 = n.grid().sample_fn(|x| 0.5 * x.cos());
        let traj = run(&n, &u0, &StepControl::default(), &RunOptions { t_max: 2.0, stop: StopRule::default(), snapshot_stride: 7 }).unwrap();
        assert_eq!(traj.status(), RunStatus::TMaxReached);
        assert!((traj.final_time() - 2.0).abs() < 1e-12);
        assert!(traj.diagnostics().windows(2).all(|w| w[1].t > w[0].t));
        assert!(traj.snapshots().windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(traj.snapshots().last().unwrap().field, *traj.final_state());
        let mut csv = Vec::new();
        traj.write_diagnostics_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with(DIAGNOSTICS_HEADER));
        assert_eq!(text.lines().count(), traj.diagnostics().len() + 1);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let n = nl(&["0", "1"], Boundary::Periodic, 16, 1.0);
        let g = *n.grid();
        let bad = StepControl { dt_min: 1.0, ..StepControl::default() };
        assert!(run(&n, &g.zeros(), &bad, &RunOptions::new(1.0)).is_err());
        assert!(run(&n, &g.zeros(), &StepControl::default(), &RunOptions::new(0.0)).is_err());
    }

    #[test]
    fn large_fixed_step_breaks_monotonicity() {
        let n = nl(&["0", "1"], Boundary::Periodic, 16, 2.0);
        let traj = run(&n, &n.grid().constant(0.5), &StepControl::fixed(3.0, 1e6), &RunOptions::new(30.0)).unwrap();
        assert!(!monotonicity_violations(&traj).is_empty());
    }
}
