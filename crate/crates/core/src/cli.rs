//! The four commands behind the `gradflow` binary. Each returns an
//! [`Outcome`] whose code is the process exit status.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::json;

use crate::config::{EquilibriaSettings, Loaded, RunConfig};
use crate::connections::{self, Verdict};
use crate::dynamics::{self, RunOptions, RunStatus};
use crate::equilibria::{self, Catalog, Equilibrium};
use crate::expr::Expr;
use crate::nonlinearity::Nonlinearity;
use crate::verify;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    ConfigError,
    BlowUp,
    VerificationFailed,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::ConfigError => 1,
            Outcome::BlowUp => 2,
            Outcome::VerificationFailed => 3,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CliOptions {
    pub output_dir: Option<PathBuf>,
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Equilibria,
    Connect,
    Verify,
}

/// Runs `command` on the config at `path`; errors are printed to stderr and
/// mapped to [`Outcome::ConfigError`].
pub fn execute(command: Command, path: &Path, opts: &CliOptions) -> Outcome {
    let result = RunConfig::load(path).and_then(|loaded| {
        let out = opts.output_dir.clone().unwrap_or_else(|| loaded.config.output_dir.clone());
        fs::create_dir_all(&out).with_context(|| format!("cannot create output directory {}", out.display()))?;
        let ctx = Ctx { out, quiet: opts.quiet };
        match command {
            Command::Simulate => cmd_simulate(&loaded, &ctx),
            Command::Equilibria => cmd_equilibria(&loaded, &ctx),
            Command::Connect => cmd_connect(&loaded, &ctx),
            Command::Verify => cmd_verify(&loaded, &ctx),
        }
    });
    match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            Outcome::ConfigError
        }
    }
}

struct Ctx {
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn create(&self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let p = self.out.join(name);
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("cannot write {}", p.display()))?))
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> anyhow::Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

fn snapshot_name(t: f64) -> String {
    format!("snap_{t:.6}.csv")
}

fn cmd_simulate(l: &Loaded, ctx: &Ctx) -> anyhow::Result<Outcome> {
    let c = &l.config;
    let nl = Nonlinearity::new(&l.spec)?;
    let u0 = nl.grid().sample(|x| l.initial_condition.eval(x)).context("initial_condition")?;
    let opts = RunOptions { t_max: c.t_max, stop: c.stop, snapshot_stride: c.snapshot_stride };
    let traj = dynamics::run(&nl, &u0, &c.control, &opts)?;

    let mut w = ctx.create("diagnostics.csv")?;
    traj.write_diagnostics_csv(&mut w)?;
    w.flush()?;
    let mut names = Vec::new();
    for s in traj.snapshots() {
        let name = snapshot_name(s.t);
        let mut w = ctx.create(&name)?;
        s.field.write_csv(&mut w)?;
        w.flush()?;
        names.push(name);
    }
    let last = traj.last_row();
    let summary = json!({
        "status": traj.status(),
        "t_final": last.t,
        "steps": traj.accepted_steps(),
        "final_sup_norm": last.sup_norm,
        "final_action": last.action,
        "final_ut_sup": last.ut_sup,
        "total_energy": traj.total_energy(),
        "blow_up_time": traj.blow_up_time(),
        "blow_up_sign": traj.blow_up_sign(),
        "monotonicity_violations": dynamics::monotonicity_violations(&traj).len(),
        "recurrence_violations": dynamics::recurrence_violations(&traj, c.stop.tol_eq).len(),
        "hypothesis_notes": l.spec.hypothesis_notes(),
        "spec": serde_json::from_str::<serde_json::Value>(&l.spec.to_canonical_json())?,
        "snapshots": names,
    });
    ctx.write_json("run_summary.json", &summary)?;
    ctx.say(format!("status {:?} at t = {:.6} after {} steps", traj.status(), last.t, traj.accepted_steps()));
    Ok(match traj.status() {
        RunStatus::BlowUp => Outcome::BlowUp,
        _ => Outcome::Success,
    })
}

/// Catalog plus one message per failed candidate.
pub fn build_catalog(nl: &Nonlinearity, s: &EquilibriaSettings) -> anyhow::Result<(Catalog, Vec<serde_json::Value>)> {
    let mut catalog = Catalog::new();
    let mut errors = Vec::new();
    let add = |catalog: &mut Catalog, mut eq: Equilibrium| {
        (eq.bounded_below, eq.bounded_above) = equilibria::classify_boundedness(&eq, s.thresholds);
        catalog.insert(eq, s.dedup_tol);
    };
    if s.constant_roots {
        match equilibria::constant_equilibria_report(nl) {
            Ok((found, rejected)) => {
                found.into_iter().for_each(|e| add(&mut catalog, e));
                for r in rejected {
                    errors.push(json!({"origin": format!("constant root {}", r.value), "message": r.reason}));
                }
            }
            Err(e) => errors.push(json!({"origin": "constant roots", "message": e.to_string()})),
        }
    }
    for (i, text) in s.newton_guesses.iter().enumerate() {
        let expr = Expr::parse(text)?;
        let found = nl
            .grid()
            .sample(|x| expr.eval(x))
            .map_err(|e| e.to_string())
            .and_then(|g| equilibria::newton_refine(nl, &g, s.newton_max_iter).map_err(|e| e.to_string()));
        match found {
            Ok(e) => add(&mut catalog, e),
            Err(msg) => errors.push(json!({"origin": format!("newton guess {i}: {text}"), "message": msg})),
        }
    }
    if let Some(scan) = &s.shooting {
        let results = equilibria::shooting_scan(nl, &scan.u_lefts, scan.slope_left, scan.u_max, s.newton_max_iter);
        for (u, r) in scan.u_lefts.iter().zip(results) {
            match r {
                Ok(e) => add(&mut catalog, e),
                Err(e) => errors.push(json!({"origin": format!("shooting from u = {u}"), "message": e.to_string()})),
            }
        }
    }
    catalog.sort();
    Ok((catalog, errors))
}

fn write_catalog(nl: &Nonlinearity, catalog: &Catalog, errors: &[serde_json::Value], ctx: &Ctx) -> anyhow::Result<()> {
    let mut entries = Vec::new();
    for (i, e) in catalog.entries.iter().enumerate() {
        let name = format!("equilibrium_{i}.csv");
        let mut w = ctx.create(&name)?;
        e.field.write_csv(&mut w)?;
        w.flush()?;
        let lead = equilibria::unstable_direction(nl, e).ok();
        entries.push(json!({
            "index": i,
            "source": e.source,
            "constant_value": e.is_constant().then(|| e.field.values()[0]),
            "min": e.field.min(),
            "max": e.field.max(),
            "residual": e.residual,
            "action": e.action,
            "bounded_below": e.bounded_below,
            "bounded_above": e.bounded_above,
            "leading_eigenvalue": lead.as_ref().map(|d| d.eigenvalue),
            "snapshot": name,
        }));
    }
    ctx.write_json("equilibria.json", &json!({"entries": entries, "errors": errors}))
}

fn cmd_equilibria(l: &Loaded, ctx: &Ctx) -> anyhow::Result<Outcome> {
    let nl = Nonlinearity::new(&l.spec)?;
    let (catalog, errors) = build_catalog(&nl, &l.config.equilibria)?;
    write_catalog(&nl, &catalog, &errors, ctx)?;
    ctx.say(format!("{} equilibria, {} failed candidates", catalog.len(), errors.len()));
    Ok(Outcome::Success)
}

fn cmd_connect(l: &Loaded, ctx: &Ctx) -> anyhow::Result<Outcome> {
    let nl = Nonlinearity::new(&l.spec)?;
    let (catalog, errors) = build_catalog(&nl, &l.config.equilibria)?;
    write_catalog(&nl, &catalog, &errors, ctx)?;
    let sec = &l.config.connect;
    let rows = connections::verify_corollary(&l.spec, &catalog, &sec.plan, &sec.settings)?;
    let mut w = ctx.create("summary.csv")?;
    connections::write_summary_csv(&rows, &mut w)?;
    w.flush()?;
    let mut w = ctx.create("verdicts.csv")?;
    connections::write_verdicts_csv(&rows, &mut w)?;
    w.flush()?;
    for r in &rows {
        ctx.say(format!("launch {}: {} ({})", r.launch_id, r.report.status.as_str(), r.verdict.as_str()));
    }
    let failed = rows.iter().any(|r| r.verdict == Verdict::Fail);
    Ok(if failed { Outcome::VerificationFailed } else { Outcome::Success })
}

fn cmd_verify(l: &Loaded, ctx: &Ctx) -> anyhow::Result<Outcome> {
    let report = verify::run_suites(l.config.seed, &l.config.verify)?;
    ctx.write_json("verify_report.json", &serde_json::to_value(&report)?)?;
    for s in &report.suites {
        ctx.say(format!("{}: {}", s.name, if s.passed { "pass" } else { "fail" }));
    }
    Ok(if report.passed { Outcome::Success } else { Outcome::VerificationFailed })
}
