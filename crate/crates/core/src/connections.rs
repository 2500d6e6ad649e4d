//! Connecting orbits between equilibria, launched forward from a small
//! perturbation along the leading eigenvector, and the finite-energy test:
//! runs that settle on a catalog member carry finite energy equal to the
//! action gap, while travelling fronts accumulate energy linearly in time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::dynamics::{self, RunOptions, RunStatus, StepControl, StopRule, Trajectory};
use crate::equilibria::{self, Catalog, Equilibrium, EquilibriumSource, TOL_EQ};
use crate::error::{NumericsError, Result};
use crate::expr::Expr;
use crate::functionals;
use crate::grid::{Boundary, Field, SpatialGrid};
use crate::nonlinearity::Nonlinearity;
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionStatus {
    Connected,
    BlowUp,
    Undecided,
}

impl ConnectionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ConnectionStatus::Connected => "connected",
            ConnectionStatus::BlowUp => "blow_up",
            ConnectionStatus::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConnectionSettings {
    pub control: StepControl,
    pub stop: StopRule,
    pub t_max: f64,
    pub snapshot_stride: usize,
    /// Sup distance below which a polished final state matches a catalog entry.
    pub match_tol: f64,
    /// Largest trailing energy rate of a connected run.
    pub tail_tol: f64,
    /// Trailing share of the run used for the tail rate.
    pub tail_fraction: f64,
    /// Trailing share of the run used for the linear energy fit.
    pub growth_window: f64,
    /// Coefficient of determination above which energy growth counts as linear.
    pub growth_fit: f64,
    /// Relative part of the identity tolerance `max(rel · |gap|, 10 · dt_max)`.
    pub identity_rel_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for ConnectionSettings {
    fn default() -> Self {
        ConnectionSettings {
            control: StepControl { dt_init: 1e-3, dt_max: 1e-3, ..StepControl::default() },
            stop: StopRule::default(),
            t_max: 200.0,
            snapshot_stride: 64,
            match_tol: 1e-4,
            tail_tol: 1e-8,
            tail_fraction: 0.1,
            growth_window: 0.5,
            growth_fit: 0.99,
            identity_rel_tol: 0.02,
            newton_max_iter: 50,
        }
    }
}

impl ConnectionSettings {
    pub fn identity_tolerance(&self, action_gap: f64) -> f64 {
        (self.identity_rel_tol * action_gap.abs()).max(10.0 * self.control.dt_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionReport {
    pub status: ConnectionStatus,
    pub run_status: RunStatus,
    /// Catalog index of the launch equilibrium; `None` for free runs.
    pub from: Option<usize>,
    pub to: Option<usize>,
    pub match_distance: Option<f64>,
    pub total_energy: f64,
    /// `A(to) - A(from)` over catalog entries.
    pub action_gap: Option<f64>,
    pub identity_residual: Option<f64>,
    pub identity_tolerance: Option<f64>,
    pub tail_energy_rate: f64,
    pub final_time: f64,
    pub final_ut_sup: f64,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct LaunchOutcome {
    pub report: ConnectionReport,
    pub trajectory: Trajectory,
}

/// Energy added per unit time over the trailing `fraction` of the run.
pub fn tail_energy_rate(traj: &Trajectory, fraction: f64) -> f64 {
    let rows = traj.diagnostics();
    let (t0, t1) = (rows[0].t, traj.final_time());
    let span = t1 - t0;
    if span <= 0.0 {
        return 0.0;
    }
    let cut = t1 - fraction * span;
    let first = rows.iter().rev().find(|r| r.t <= cut).unwrap_or(&rows[0]);
    let dt = t1 - first.t;
    if dt <= 0.0 {
        return 0.0;
    }
    (traj.total_energy() - first.energy_cum) / dt
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrowth {
    /// Least-squares slope of cumulative energy against time.
    pub rate: f64,
    /// Coefficient of determination of the fit; 0 when the energy is flat.
    pub fit_quality: f64,
    pub rows: usize,
}

pub const MIN_GROWTH_ROWS: usize = 100;

/// Linear fit of cumulative energy against time over the trailing
/// `window_fraction` of the run.
pub fn energy_growth_diagnostic(traj: &Trajectory, window_fraction: f64) -> Result<EnergyGrowth> {
    let rows = traj.diagnostics();
    let t1 = traj.final_time();
    let t_lo = t1 - window_fraction * (t1 - rows[0].t);
    energy_growth_between(traj, t_lo, t1)
}

/// Linear fit of cumulative energy against time over rows with `t ∈ [t_lo, t_hi]`.
pub fn energy_growth_between(traj: &Trajectory, t_lo: f64, t_hi: f64) -> Result<EnergyGrowth> {
    if traj.diagnostics().len() < MIN_GROWTH_ROWS {
        return Err(NumericsError::TooFewRows { need: MIN_GROWTH_ROWS, have: traj.diagnostics().len() });
    }
    let pts: Vec<(f64, f64)> = traj
        .diagnostics()
        .iter()
        .filter(|r| r.t >= t_lo && r.t <= t_hi)
        .map(|r| (r.t, r.energy_cum))
        .collect();
    if pts.len() < 2 {
        return Err(NumericsError::TooFewRows { need: 2, have: pts.len() });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let me = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt = pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    let ste = pts.iter().map(|p| (p.0 - mt) * (p.1 - me)).sum::<f64>();
    let see = pts.iter().map(|p| (p.1 - me).powi(2)).sum::<f64>();
    if stt == 0.0 {
        return Err(NumericsError::Precondition("energy window has zero duration".into()));
    }
    let rate = ste / stt;
    let fit_quality = if see > 0.0 {
        let ss_res: f64 = pts.iter().map(|p| (p.1 - me - rate * (p.0 - mt)).powi(2)).sum();
        (1.0 - ss_res / see).max(0.0)
    } else {
        0.0
    };
    Ok(EnergyGrowth { rate, fit_quality, rows: pts.len() })
}

/// Left-most crossing of `level` by linear interpolation between nodes.
pub fn front_position(u: &Field, level: f64) -> Option<f64> {
    let g = u.grid();
    let v = u.values();
    (0..v.len() - 1).find_map(|j| {
        let (a, b) = (v[j] - level, v[j + 1] - level);
        (a == 0.0 || a * b < 0.0).then(|| g.x(j) + g.h() * a / (a - b))
    })
}

/// Classifies a finished trajectory against the catalog.
fn assess(nl: &Nonlinearity, catalog: &Catalog, from: Option<usize>, traj: Trajectory, s: &ConnectionSettings) -> LaunchOutcome {
    let tail = tail_energy_rate(&traj, s.tail_fraction);
    let last = traj.last_row();
    let mut report = ConnectionReport {
        status: ConnectionStatus::Undecided,
        run_status: traj.status(),
        from,
        to: None,
        match_distance: None,
        total_energy: traj.total_energy(),
        action_gap: None,
        identity_residual: None,
        identity_tolerance: None,
        tail_energy_rate: tail,
        final_time: last.t,
        final_ut_sup: last.ut_sup,
        note: String::new(),
    };
    match traj.status() {
        RunStatus::BlowUp => {
            report.status = ConnectionStatus::BlowUp;
            report.note = format!("blow-up at t = {:.6}", traj.blow_up_time().unwrap_or(f64::NAN));
            return LaunchOutcome { report, trajectory: traj };
        }
        RunStatus::Converged => {}
        _ => {
            report.note = "no convergence before t_max".into();
            return LaunchOutcome { report, trajectory: traj };
        }
    }

    let polished = equilibria::newton_solve(nl, traj.final_state(), s.newton_max_iter, TOL_EQ)
        .map(|t| t.field)
        .unwrap_or_else(|_| traj.final_state().clone());
    let Some((to, dist)) = catalog.nearest(&polished) else {
        report.note = "empty catalog".into();
        return LaunchOutcome { report, trajectory: traj };
    };
    report.match_distance = Some(dist);
    if !(dist < s.match_tol) {
        report.note = format!("nearest catalog entry {to} at sup distance {dist:.3e}");
        return LaunchOutcome { report, trajectory: traj };
    }
    report.to = Some(to);

    let end_action = catalog.entries[to].action;
    let start_action = match from {
        Some(i) => catalog.entries[i].action,
        None => functionals::action(nl, traj.initial_state()).map(|a| a.value).unwrap_or(f64::NAN),
    };
    let gap = end_action - start_action;
    let residual = (report.total_energy - gap).abs();
    let tolerance = s.identity_tolerance(gap);
    report.action_gap = Some(gap);
    report.identity_residual = Some(residual);
    report.identity_tolerance = Some(tolerance);

    if !(tail < s.tail_tol) {
        report.note = format!("tail rate {tail:.3e} not below {:.1e}", s.tail_tol);
    } else if !(residual <= tolerance) {
        report.note = format!("identity residual {residual:.3e} exceeds {tolerance:.3e}");
    } else if !report.total_energy.is_finite() {
        report.note = "energy not finite".into();
    } else {
        report.status = ConnectionStatus::Connected;
    }
    LaunchOutcome { report, trajectory: traj }
}

fn run_opts(s: &ConnectionSettings, t_max: f64) -> RunOptions {
    RunOptions { t_max, stop: s.stop, snapshot_stride: s.snapshot_stride }
}

/// Default launch amplitude: `1e-3 · max(1, ‖eq‖∞)`.
pub fn default_amplitude(eq: &Equilibrium) -> f64 {
    1e-3 * eq.field.sup_norm().max(1.0)
}

/// Runs from `catalog[from] + amplitude · direction` and classifies the
/// outcome. The orbit's past limit is the launch equilibrium by construction.
pub fn launch_connection(
    nl: &Nonlinearity,
    catalog: &Catalog,
    from: usize,
    direction: &Field,
    amplitude: f64,
    settings: &ConnectionSettings,
) -> Result<LaunchOutcome> {
    let eq = catalog
        .entries
        .get(from)
        .ok_or_else(|| NumericsError::Precondition(format!("no catalog entry {from}")))?;
    let u0 = eq.field.axpy(amplitude, direction)?;
    let traj = dynamics::run(nl, &u0, &settings.control, &run_opts(settings, settings.t_max))?;
    Ok(assess(nl, catalog, Some(from), traj, settings))
}

/// Runs from arbitrary data; classified the same way, with no launch equilibrium.
pub fn free_run(nl: &Nonlinearity, catalog: &Catalog, u0: &Field, settings: &ConnectionSettings) -> Result<LaunchOutcome> {
    let traj = dynamics::run(nl, u0, &settings.control, &run_opts(settings, settings.t_max))?;
    Ok(assess(nl, catalog, None, traj, settings))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridOverride {
    pub box_half_length: Option<f64>,
    pub grid_points: Option<usize>,
    pub boundary: Option<Boundary>,
}

/// One entry of a launch batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LaunchPlan {
    /// Perturb catalog entry `from` along its leading eigenvector.
    Equilibrium {
        from: usize,
        #[serde(default)]
        amplitude: Option<f64>,
        #[serde(default)]
        grid: Option<GridOverride>,
        #[serde(default)]
        t_max: Option<f64>,
    },
    /// Start from an expression in `x`.
    Free {
        initial_condition: String,
        #[serde(default)]
        grid: Option<GridOverride>,
        #[serde(default)]
        t_max: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Connected with finite energy and vanishing tail.
    Pass,
    /// Linear energy growth and no catalog match at the final state.
    PassGrowth,
    Fail,
    /// Blow-up: outside the global-solution hypothesis.
    Excluded,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::PassGrowth => "pass(growth)",
            Verdict::Fail => "fail",
            Verdict::Excluded => "excluded",
        }
    }

    pub fn is_failure(self) -> bool {
        self == Verdict::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryRow {
    pub launch_id: usize,
    pub report: ConnectionReport,
    pub growth: Option<EnergyGrowth>,
    pub verdict: Verdict,
}

impl CorollaryRow {
    pub fn fit_quality(&self) -> Option<f64> {
        self.growth.map(|g| g.fit_quality)
    }
}

fn verdict_for(report: &ConnectionReport, growth: Option<EnergyGrowth>, catalog: &Catalog, final_state: &Field, s: &ConnectionSettings) -> Verdict {
    match report.status {
        ConnectionStatus::BlowUp => Verdict::Excluded,
        ConnectionStatus::Connected => Verdict::Pass,
        ConnectionStatus::Undecided => {
            let growing = report.run_status == RunStatus::TMaxReached
                && growth.is_some_and(|g| g.rate > s.tail_tol && g.fit_quality > s.growth_fit);
            let unmatched = catalog
                .nearest(final_state)
                .map_or(true, |(_, d)| !(d < s.match_tol));
            if growing && unmatched {
                Verdict::PassGrowth
            } else {
                Verdict::Fail
            }
        }
    }
}

/// Catalog on another grid: constant entries carry over, others are dropped.
fn catalog_on(nl: &Nonlinearity, base: &Catalog) -> Catalog {
    let mut out = Catalog::new();
    for e in base.entries.iter().filter(|e| e.is_constant()) {
        let c = e.field.values()[0];
        if let Ok(eq) = Equilibrium::certify(nl, nl.grid().constant(c), EquilibriumSource::Constant, TOL_EQ) {
            out.entries.push(eq);
        }
    }
    out
}

fn run_plan(spec: &ProblemSpec, nl: &Nonlinearity, catalog: &Catalog, id: usize, plan: &LaunchPlan, s: &ConnectionSettings) -> Result<CorollaryRow> {
    let (grid_override, t_max) = match plan {
        LaunchPlan::Equilibrium { grid, t_max, .. } | LaunchPlan::Free { grid, t_max, .. } => (grid, t_max),
    };
    let settings = ConnectionSettings { t_max: t_max.unwrap_or(s.t_max), ..*s };

    let local;
    let local_catalog;
    let (nl, catalog) = match grid_override {
        Some(o) => {
            let g = SpatialGrid::new(
                o.box_half_length.unwrap_or(spec.box_half_length()),
                o.grid_points.unwrap_or(spec.grid_points()),
                o.boundary.unwrap_or(spec.boundary()),
            )?;
            local = Nonlinearity::on_grid(spec, g)?;
            local_catalog = catalog_on(&local, catalog);
            (&local, &local_catalog)
        }
        None => (nl, catalog),
    };

    let outcome = match plan {
        LaunchPlan::Equilibrium { from, amplitude, .. } => {
            let eq = catalog
                .entries
                .get(*from)
                .ok_or_else(|| NumericsError::Precondition(format!("launch {id}: no catalog entry {from}")))?;
            let dir = equilibria::unstable_direction(nl, eq)?;
            let amp = amplitude.unwrap_or_else(|| default_amplitude(eq));
            launch_connection(nl, catalog, *from, &dir.direction, amp, &settings)?
        }
        LaunchPlan::Free { initial_condition, .. } => {
            let e = Expr::parse(initial_condition).map_err(|e| NumericsError::Precondition(format!("launch {id}: {e}")))?;
            let u0 = nl.grid().sample(|x| e.eval(x)).map_err(|e| NumericsError::Precondition(format!("launch {id}: {e}")))?;
            free_run(nl, catalog, &u0, &settings)?
        }
    };
    let growth = energy_growth_diagnostic(&outcome.trajectory, settings.growth_window).ok();
    let verdict = verdict_for(&outcome.report, growth, catalog, outcome.trajectory.final_state(), &settings);
    Ok(CorollaryRow { launch_id: id, report: outcome.report, growth, verdict })
}

/// Executes the launch plan in parallel; rows come back in plan order.
pub fn verify_corollary(spec: &ProblemSpec, catalog: &Catalog, plan: &[LaunchPlan], settings: &ConnectionSettings) -> Result<Vec<CorollaryRow>> {
    let nl = Nonlinearity::new(spec)?;
    plan.par_iter()
        .enumerate()
        .map(|(i, p)| run_plan(spec, &nl, catalog, i, p, settings))
        .collect()
}

pub const SUMMARY_HEADER: &str = "launch_id,status,from,to,total_energy,action_gap,identity_residual,tail_rate,fit_quality";

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

fn opt_idx(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_summary_csv<W: Write>(rows: &[CorollaryRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        let c = &r.report;
        writeln!(
            w,
            "{},{},{},{},{:.10e},{},{},{:.10e},{}",
            r.launch_id,
            c.status.as_str(),
            opt_idx(c.from),
            opt_idx(c.to),
            c.total_energy,
            opt_num(c.action_gap),
            opt_num(c.identity_residual),
            c.tail_energy_rate,
            opt_num(r.fit_quality()),
        )?;
    }
    Ok(())
}

pub fn write_verdicts_csv<W: Write>(rows: &[CorollaryRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "launch_id,verdict,note")?;
    for r in rows {
        writeln!(w, "{},{},\"{}\"", r.launch_id, r.verdict.as_str(), r.report.note.replace('"', "'"))?;
    }
    Ok(())
}
