//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use gradflow::cli::build_catalog;
use gradflow::config::EquilibriaSettings;
use gradflow::connections::{self, ConnectionSettings, ConnectionStatus};
use gradflow::dynamics::{self, mms, DiagnosticRow, RunOptions, RunStatus, StepControl};
use gradflow::equilibria::{self, Catalog};
use gradflow::functionals::{action, flow_field};
use gradflow::problem::ProblemSpecDoc;
use gradflow::sampling::SmoothFieldSampler;
use gradflow::verify::{self, Lemma1Fixture, VerifySettings};
use gradflow::{Boundary, Expr, Field, Nonlinearity, ProblemSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_261_016;

struct Outcome {
    pass: bool,
    detail: String,
}

fn spec(n: i64, coeffs: &[&str], boundary: Boundary, m: i64, half: f64) -> ProblemSpec {
    ProblemSpec::from_doc(&ProblemSpecDoc {
        n,
        coeffs: coeffs.iter().map(|s| s.to_string()).collect(),
        box_half_length: half,
        grid_points: m,
        boundary,
        signed_power: false,
        sup_guard: 1e6,
        spatial_dim: 1,
    })
    .unwrap()
}

fn nl_of(s: &ProblemSpec) -> Nonlinearity {
    Nonlinearity::new(s).unwrap()
}

fn sample(nl: &Nonlinearity, text: &str) -> Field {
    let e = Expr::parse(text).unwrap();
    nl.grid().sample(|x| e.eval(x)).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// Composite Simpson rule on [a, b] with n (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

// Energy of the scalar logistic orbit u' = u(1 - u) from u0 to 1 - 1e-12,
// integrating ½(u'² + u'²) = u'² in time with RK4.
fn logistic_energy(u0: f64) -> f64 {
    let f = |u: f64| u * (1.0 - u);
    let (mut u, mut e, h) = (u0, 0.0, 1e-3);
    while 1.0 - u > 1e-12 {
        let k1 = f(u);
        let k2 = f(u + 0.5 * h * k1);
        let k3 = f(u + 0.5 * h * k2);
        let k4 = f(u + h * k3);
        let g = |v: f64| f(v) * f(v);
        e += h / 6.0 * (g(u) + 2.0 * g(u + 0.5 * h * k1) + 2.0 * g(u + 0.5 * h * k2) + g(u + h * k3));
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    e
}

fn fisher_catalog(nl: &Nonlinearity) -> Catalog {
    build_catalog(nl, &EquilibriaSettings::default()).unwrap().0
}

fn criterion_1() -> (Outcome, f64) {
    let length = 10.0;
    let s = spec(2, &["0", "1"], Boundary::Periodic, 256, length / 2.0);
    let nl = nl_of(&s);
    let catalog = fisher_catalog(&nl);
    let settings = ConnectionSettings::default();
    let amp = connections::default_amplitude(&catalog.entries[0]);
    let dir = equilibria::unstable_direction(&nl, &catalog.entries[0]).unwrap();
    let out = connections::launch_connection(&nl, &catalog, 0, &dir.direction, amp, &settings).unwrap();
    let r = &out.report;

    let oracle = length * simpson(|u| u * (1.0 - u), 0.0, 1.0, 64);
    let scalar = length * logistic_energy(amp);
    let e_err = rel(r.total_energy, oracle);
    let gap_err = r.action_gap.map_or(f64::INFINITY, |g| rel(g, oracle));
    let id_err = match (r.identity_residual, r.action_gap) {
        (Some(res), Some(gap)) => res / gap.abs(),
        _ => f64::INFINITY,
    };
    let pass = r.status == ConnectionStatus::Connected
        && r.to == Some(1)
        && settings.control.dt_max <= 1e-3
        && e_err <= 0.02
        && gap_err <= 1e-3
        && id_err <= 0.02;
    let detail = format!(
        "E = {:.6} (oracle {oracle:.6}, scalar ODE {scalar:.6}, rel {e_err:.2e} <= 2e-2); \
         gap rel {gap_err:.2e} <= 1e-3; identity rel {id_err:.2e} <= 2e-2; M = 256, dt_max = {:.0e}",
        r.total_energy, settings.control.dt_max
    );
    (Outcome { pass, detail }, r.tail_energy_rate)
}

fn criterion_2() -> Outcome {
    let settings = VerifySettings { randomized_runs: 20, run_t_max: 10.0, ..VerifySettings::default() };
    let runs = verify::randomized_runs(SEED, &settings).unwrap();
    let literal = |a: &DiagnosticRow, b: &DiagnosticRow| 10.0 * b.dt * a.action.abs().max(b.action.abs());
    let (mut hard, mut steps, mut roundoff_only) = (0, 0, 0);
    for (_, traj) in &runs {
        steps += traj.accepted_steps();
        let m = traj.final_state().grid().len();
        let round = |a: &DiagnosticRow, b: &DiagnosticRow| dynamics::action_roundoff_allowance(m, a.action_scale, b.action_scale);
        let beyond_literal = dynamics::action_decreases(traj, literal);
        let beyond_round = dynamics::action_decreases(traj, round);
        hard += beyond_literal.iter().filter(|v| beyond_round.iter().any(|w| w.step == v.step)).count();
        roundoff_only += beyond_round.len();
    }
    Outcome {
        pass: runs.len() == 20 && hard == 0,
        detail: format!(
            "{} runs (10 Fisher, 10 cubic), {steps} accepted steps; hard violations {hard} (tolerance 10*dt*|A|); \
             decreases beyond roundoff {roundoff_only}",
            runs.len()
        ),
    }
}

fn criterion_3() -> Outcome {
    let c: f64 = 1.0;
    let oracle = 1.0 / c;
    let s = spec(2, &["0", "0"], Boundary::Periodic, 64, 5.0);
    let nl = nl_of(&s);
    let traj = dynamics::run(&nl, &nl.grid().constant(-c), &StepControl::default(), &RunOptions::new(10.0)).unwrap();
    let t = traj.blow_up_time().unwrap_or(f64::NAN);
    let err = rel(t, oracle);
    Outcome {
        pass: traj.status() == RunStatus::BlowUp && err <= 0.05 && traj.blow_up_sign() == Some(-1.0),
        detail: format!("t_blow = {t:.5} vs oracle {oracle}, rel {err:.2e} <= 5e-2, escaping sign {:?}", traj.blow_up_sign()),
    }
}

fn criterion_4(contrast_tail: f64) -> Outcome {
    let start = Instant::now();
    let s = spec(2, &["0", "1"], Boundary::Neumann0, 2048, 100.0);
    let nl = nl_of(&s);
    let catalog = fisher_catalog(&nl);
    let t_max = 40.0;
    let settings = ConnectionSettings { t_max, ..ConnectionSettings::default() };
    let out = connections::free_run(&nl, &catalog, &sample(&nl, "0.5*(1-tanh(x))"), &settings).unwrap();
    let g = connections::energy_growth_between(&out.trajectory, 0.25 * t_max, 0.75 * t_max).unwrap();

    // Front speed from the u = 1/2 level set over the same window.
    let snaps = out.trajectory.snapshots();
    let at = |t: f64| snaps.iter().min_by(|a, b| (a.t - t).abs().partial_cmp(&(b.t - t).abs()).unwrap()).unwrap();
    let (a, b) = (at(0.25 * t_max), at(0.75 * t_max));
    let speed = (connections::front_position(&b.field, 0.5).unwrap() - connections::front_position(&a.field, 0.5).unwrap()) / (b.t - a.t);
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: g.rate > 0.0 && g.fit_quality > 0.99 && contrast_tail < 1e-8 && secs <= 300.0,
        detail: format!(
            "front slope {:.4} > 0, fit R^2 {:.6} > 0.99 over t in [{}, {}], level-set speed {speed:.3}; \
             contrast tail rate {contrast_tail:.2e} < 1e-8; {secs:.1} s <= 300 s",
            g.rate,
            g.fit_quality,
            0.25 * t_max,
            0.75 * t_max
        ),
    }
}

fn criterion_5() -> Outcome {
    let cases: [(&str, i64, &[&str], Vec<f64>); 2] = [
        // roots of u - u²
        ("Fisher", 2, &["0", "1"], vec![0.0, 1.0]),
        // roots of u - u³ = u(1 - u)(1 + u)
        ("cubic", 3, &["0", "1", "0"], vec![-1.0, 0.0, 1.0]),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, n, coeffs, oracle) in cases {
        let nl = nl_of(&spec(n, coeffs, Boundary::Periodic, 256, 5.0));
        let catalog = fisher_catalog(&nl);
        let values: Vec<f64> = catalog.entries.iter().map(|e| e.field.values()[0]).collect();
        let worst = catalog.entries.iter().map(|e| e.residual).fold(0.0, f64::max);
        let same = values.len() == oracle.len()
            && catalog.entries.iter().all(|e| e.is_constant())
            && values.iter().zip(&oracle).all(|(v, o)| (v - o).abs() <= 1e-12);
        pass &= same && worst < 1e-10;
        parts.push(format!("{name} {values:?} (expected {oracle:?}), max residual {worst:.1e} < 1e-10"));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn criterion_6() -> Outcome {
    let fixture = Lemma1Fixture::frozen().unwrap();
    let s = ProblemSpec::from_doc(&fixture.spec).unwrap();
    let nl = nl_of(&s);
    let sampler: SmoothFieldSampler = fixture.sampler;
    let mut rng = ChaCha8Rng::seed_from_u64(fixture.seed);
    let mut exceed = 0;
    let mut worst = vec![0.0f64; fixture.constants.len()];
    let mut bound_ok = true;
    for _ in 0..1000 {
        let u = sampler.sample(nl.grid(), &mut rng);
        bound_ok &= gradflow::grid::derivative_sup(&u, 2) <= 1.0 + 1e-12;
        for (i, c) in fixture.constants.iter().enumerate() {
            let r = nl.lemma1_ratio(&u, c.k, c.p).unwrap();
            worst[i] = worst[i].max(r);
            if r > c.max_ratio * (1.0 + verify::LEMMA1_SLACK) {
                exceed += 1;
            }
        }
    }
    let pairs: Vec<String> = fixture
        .constants
        .iter()
        .zip(&worst)
        .map(|(c, w)| format!("(k={},p={}) {w:.6} <= {:.6}", c.k, c.p, c.max_ratio))
        .collect();
    Outcome {
        pass: fixture.constants.len() == 4 && fixture.fields == 1000 && exceed == 0 && bound_ok,
        detail: format!("1000 fields, sup bound C = 1; {}; exceedances {exceed}", pairs.join(", ")),
    }
}

fn criterion_7() -> Outcome {
    let periodic = spec(2, &["0", "1"], Boundary::Periodic, 64, 5.0);
    let t_case = mms::Manufactured::parse("sin(0.6283185307179586*x)", "exp(-x)").unwrap();
    let t_rep = mms::mms_verify(&periodic, &t_case, 3).unwrap();
    let dirichlet = spec(2, &["0", "1"], Boundary::Dirichlet0, 64, 5.0);
    let s_case = mms::Manufactured::parse("tanh(x)*cos(0.3141592653589793*x)", "1+x").unwrap();
    let s_rep = mms::mms_verify(&dirichlet, &s_case, 3).unwrap();
    let (to, so) = (t_rep.temporal_order.unwrap_or(f64::NAN), s_rep.spatial_order.unwrap_or(f64::NAN));
    Outcome {
        pass: (0.8..=1.2).contains(&to) && (1.7..=2.3).contains(&so),
        detail: format!(
            "temporal order {to:.3} in [0.8, 1.2] (ladder {:?}); spatial order {so:.3} in [1.7, 2.3] (ladder {:?})",
            t_rep.temporal_orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>(),
            s_rep.spatial_orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>()
        ),
    }
}

fn criterion_8() -> Outcome {
    let eps = 1e-5;
    let instances = [
        spec(2, &["0", "1"], Boundary::Periodic, 128, 5.0),
        spec(3, &["0.5*exp(-x^2)", "1", "0.3*cos(0.6283185307179586*x)"], Boundary::Dirichlet0, 128, 5.0),
        spec(3, &["0", "1", "-0.5*tanh(x)"], Boundary::Neumann0, 128, 5.0),
        spec(4, &["0.1", "1", "0.2*sin(x)", "0"], Boundary::Periodic, 128, 5.0),
    ];
    let sampler = SmoothFieldSampler { derivative_order: 0, ..SmoothFieldSampler::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let nl = nl_of(&instances[i % instances.len()]);
        let u = sampler.sample(nl.grid(), &mut rng);
        let v = sampler.sample(nl.grid(), &mut rng);
        let plus = action(&nl, &u.axpy(eps, &v).unwrap()).unwrap().value;
        let minus = action(&nl, &u.axpy(-eps, &v).unwrap()).unwrap().value;
        let fd = (plus - minus) / (2.0 * eps);
        let exact = flow_field(&nl, &u).unwrap().inner(&v).unwrap();
        worst = worst.max((fd - exact).abs());
    }
    Outcome { pass: worst <= 1e-6, detail: format!("100 pairs, eps = 1e-5, max |dA - <grad, v>| = {worst:.2e} <= 1e-6") }
}

fn criterion_9() -> Outcome {
    let kinks = EquilibriaSettings {
        newton_guesses: vec!["tanh(x/1.4142135623730951)".into(), "-tanh(x/1.4142135623730951)".into()],
        ..EquilibriaSettings::default()
    };
    let setups: Vec<(ProblemSpec, EquilibriaSettings, Vec<&str>)> = vec![
        (spec(2, &["0", "1"], Boundary::Periodic, 128, 5.0), EquilibriaSettings::default(), vec!["0.5", "0.1+0.05*sin(0.6283185307179586*x)", "2.5"]),
        (spec(2, &["0", "1"], Boundary::Neumann0, 128, 5.0), EquilibriaSettings::default(), vec!["0.5*(1-tanh(x))", "exp(-x^2)"]),
        (spec(3, &["0", "1", "0"], Boundary::Periodic, 128, 5.0), EquilibriaSettings::default(), vec!["0.3", "-0.4+0.1*cos(0.6283185307179586*x)", "1.8"]),
        (spec(3, &["0", "1", "0"], Boundary::Neumann0, 128, 5.0), kinks, vec!["0.8*tanh(2*x)", "-0.5*tanh(x)", "0.3+0.1*cos(x)"]),
    ];
    let (mut converged, mut bad, mut worst_ut, mut worst_d) = (0, 0, 0.0f64, 0.0f64);
    for (s, eq_settings, inits) in &setups {
        let nl = nl_of(s);
        let catalog = build_catalog(&nl, eq_settings).unwrap().0;
        for text in inits {
            let traj = dynamics::run(&nl, &sample(&nl, text), &StepControl::default(), &RunOptions::new(300.0)).unwrap();
            if traj.status() != RunStatus::Converged {
                continue;
            }
            converged += 1;
            let ut = traj.last_row().ut_sup;
            let d = equilibria::newton_solve(&nl, traj.final_state(), 50, equilibria::TOL_EQ)
                .map(|t| catalog.nearest(&t.field).map_or(f64::INFINITY, |(_, d)| d))
                .unwrap_or(f64::INFINITY);
            worst_ut = worst_ut.max(ut);
            worst_d = worst_d.max(d);
            if !(ut < 1e-8 && d < 1e-4) {
                bad += 1;
            }
        }
    }
    Outcome {
        pass: converged >= 10 && bad == 0,
        detail: format!("{converged} converged runs; max final ut_sup {worst_ut:.3e} < 1e-8; max distance to polished catalog member {worst_d:.2e} < 1e-4"),
    }
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, o: Outcome| {
        println!("{} [{id}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    let (c1, contrast_tail) = criterion_1();
    report(1, "logistic connection energy", c1);
    report(2, "action monotonicity", criterion_2());
    report(3, "blow-up timing", criterion_3());
    report(4, "travelling-wave energy growth", criterion_4(contrast_tail));
    report(5, "equilibrium catalog", criterion_5());
    report(6, "lemma1 ratio regression", criterion_6());
    report(7, "MMS solver verification", criterion_7());
    report(8, "discrete-gradient consistency", criterion_8());
    report(9, "convergence-to-equilibrium detection", criterion_9());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
