//! Equilibria `Δu + P(u) = 0`: constant roots, Newton on the grid, shooting
//! in the `(u, u')` phase plane, boundedness classification, and the leading
//! eigenpair of the linearisation.

use serde::{Deserialize, Serialize};

use crate::error::{NumericsError, Result};
use crate::functionals::{self, flow_field};
use crate::grid::{Boundary, Field};
use crate::nonlinearity::Nonlinearity;
use crate::tridiag::SolveError;

/// Residual bound for constant and Newton equilibria.
pub const TOL_EQ: f64 = 1e-10;
/// Residual bound for equilibria projected from shooting paths.
pub const TOL_EQ_SHOOTING: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumSource {
    Constant,
    Newton,
    Shooting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub field: Field,
    /// `‖Δ_h u + P(u)‖∞`
    pub residual: f64,
    pub action: f64,
    pub bounded_below: bool,
    pub bounded_above: bool,
    pub source: EquilibriumSource,
}

impl Equilibrium {
    /// Wraps a field after checking its residual and that its action is finite.
    pub fn certify(nl: &Nonlinearity, field: Field, source: EquilibriumSource, tol: f64) -> Result<Equilibrium> {
        let residual = flow_field(nl, &field)?.sup_norm();
        if !(residual <= tol) {
            return Err(NumericsError::Precondition(format!(
                "residual {residual:e} exceeds {tol:e}"
            )));
        }
        let action = functionals::action(nl, &field)
            .map_err(|_| NumericsError::Range("equilibrium action is not finite".into()))?
            .value;
        let bound = f64::MAX;
        let (bounded_below, bounded_above) = bounds_of(&field, (-bound, bound));
        Ok(Equilibrium { field, residual, action, bounded_below, bounded_above, source })
    }

    pub fn is_constant(&self) -> bool {
        self.field.max() - self.field.min() <= 1e-12 * self.field.sup_norm().max(1.0)
    }
}

fn bounds_of(field: &Field, (lower, upper): (f64, f64)) -> (bool, bool) {
    (field.min() >= lower, field.max() <= upper)
}

/// `(bounded_below, bounded_above)` of the samples against `(lower, upper)`.
pub fn classify_boundedness(eq: &Equilibrium, thresholds: (f64, f64)) -> (bool, bool) {
    bounds_of(&eq.field, thresholds)
}

// Polynomials as coefficient vectors, lowest degree first.

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(i, a)| i as f64 * a).collect()
}

fn poly_scale(c: &[f64], x: f64) -> f64 {
    c.iter().enumerate().map(|(i, a)| a.abs() * x.abs().powi(i as i32)).sum::<f64>().max(1.0)
}

fn bisect(c: &[f64], mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = poly_eval(c, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-14 * mid.abs().max(1.0) {
            break;
        }
        let f_mid = poly_eval(c, mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Newton steps from a bracketed root while the residual keeps shrinking.
fn polish(c: &[f64], mut x: f64, a: f64, b: f64) -> f64 {
    let dc = poly_derivative(c);
    let mut fx = poly_eval(c, x).abs();
    for _ in 0..8 {
        if fx == 0.0 {
            break;
        }
        let next = x - poly_eval(c, x) / poly_eval(&dc, x);
        let fn_ = poly_eval(c, next).abs();
        if !(next >= a && next <= b && fn_ < fx) {
            break;
        }
        x = next;
        fx = fn_;
    }
    x
}

/// Real roots of `c` in `[lo, hi]`. The critical points (roots of the
/// derivative, found recursively) split the interval into monotone pieces,
/// each holding at most one simple root; tangent roots are the critical
/// points where the polynomial vanishes to roundoff.
fn real_roots(c: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut c = c.to_vec();
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    if c.len() <= 1 {
        return Vec::new();
    }
    let crit = real_roots(&poly_derivative(&c), lo, hi);
    let mut knots = vec![lo];
    knots.extend(crit.iter().copied().filter(|&x| x > lo && x < hi));
    knots.push(hi);

    let mut roots = Vec::new();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (poly_eval(&c, a), poly_eval(&c, b));
        if fa.abs() <= 1e-13 * poly_scale(&c, a) {
            roots.push(a);
        } else if fa * fb < 0.0 && fb.abs() > 1e-13 * poly_scale(&c, b) {
            roots.push(polish(&c, bisect(&c, a, b), a, b));
        }
    }
    if poly_eval(&c, hi).abs() <= 1e-13 * poly_scale(&c, hi) {
        roots.push(hi);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * a.abs().max(1.0));
    roots
}

/// Real roots of the scalar reaction `p(c) = -c^N + Σ a_i c^i` (or its
/// signed-power variant), for spatially constant coefficients.
pub fn constant_roots(nl: &Nonlinearity) -> Result<Vec<f64>> {
    let a = nl.constant_coefficients()?;
    let n = nl.degree();
    let radius = 1.0 + a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let with_leading = |lead: f64| {
        let mut c = a.clone();
        c.push(lead);
        c
    };
    if !nl.signed_power() || n % 2 == 1 {
        return Ok(real_roots(&with_leading(-1.0), -radius, radius));
    }
    // -c|c|^{N-1} with N even is -c^N for c ≥ 0 and +c^N for c < 0.
    let mut roots = real_roots(&with_leading(1.0), -radius, 0.0);
    roots.extend(real_roots(&with_leading(-1.0), 0.0, radius));
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * a.abs().max(1.0));
    Ok(roots)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRoot {
    pub value: f64,
    pub reason: String,
}

/// Constant roots wrapped as equilibria, plus the roots that fail the
/// residual bound on this grid (nonzero constants under a zero Dirichlet
/// closure, for instance).
pub fn constant_equilibria_report(nl: &Nonlinearity) -> Result<(Vec<Equilibrium>, Vec<RejectedRoot>)> {
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for c in constant_roots(nl)? {
        match Equilibrium::certify(nl, nl.grid().constant(c), EquilibriumSource::Constant, TOL_EQ) {
            Ok(eq) => accepted.push(eq),
            Err(e) => rejected.push(RejectedRoot { value: c, reason: e.to_string() }),
        }
    }
    Ok((accepted, rejected))
}

pub fn constant_equilibria(nl: &Nonlinearity) -> Result<Vec<Equilibrium>> {
    Ok(constant_equilibria_report(nl)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonTrace {
    pub field: Field,
    /// Sup residual before the first iteration and after each one.
    pub residuals: Vec<f64>,
}

/// Damped Newton on `F(u) = Δ_h u + P(u)` with Jacobian `Δ_h + diag(P'(u))`.
pub fn newton_solve(nl: &Nonlinearity, guess: &Field, max_iter: usize, tol: f64) -> Result<NewtonTrace> {
    if !guess.is_finite() {
        return Err(NumericsError::Precondition("Newton guess has non-finite entries".into()));
    }
    let lap = nl.grid().laplacian_operator();
    let residual_of = |u: &Field| flow_field(nl, u).map(|f| f.sup_norm()).unwrap_or(f64::INFINITY);
    let mut u = guess.clone();
    let mut f = flow_field(nl, &u)?;
    let mut residuals = vec![f.sup_norm()];
    for _ in 0..max_iter {
        let r = *residuals.last().unwrap();
        if r < tol {
            return Ok(NewtonTrace { field: u, residuals });
        }
        let jac = lap.clone().plus_diagonal(nl.apply_dp(&u)?.values());
        let rhs: Vec<f64> = f.values().iter().map(|v| -v).collect();
        let delta = match jac.solve(&rhs) {
            Ok(d) => Field::from_raw(*nl.grid(), d),
            Err(SolveError::Singular { pivot }) => return Err(NumericsError::SingularJacobian { pivot }),
            Err(e) => return Err(e.into()),
        };
        let mut alpha = 1.0;
        let mut trial = u.axpy(alpha, &delta)?;
        let mut r_trial = residual_of(&trial);
        let mut halvings = 0;
        while !(r_trial < r) && halvings < 8 {
            alpha *= 0.5;
            halvings += 1;
            trial = u.axpy(alpha, &delta)?;
            r_trial = residual_of(&trial);
        }
        if !r_trial.is_finite() {
            return Err(NumericsError::NoConvergence { iterations: residuals.len(), residual: r });
        }
        u = trial;
        f = flow_field(nl, &u)?;
        residuals.push(f.sup_norm());
    }
    let r = *residuals.last().unwrap();
    if r < tol {
        Ok(NewtonTrace { field: u, residuals })
    } else {
        Err(NumericsError::NoConvergence { iterations: max_iter, residual: r })
    }
}

pub fn newton_refine(nl: &Nonlinearity, guess: &Field, max_iter: usize) -> Result<Equilibrium> {
    let trace = newton_solve(nl, guess, max_iter, TOL_EQ)?;
    Equilibrium::certify(nl, trace.field, EquilibriumSource::Newton, TOL_EQ)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Escape {
    pub x: f64,
    /// `+1` when `u → +∞`, `-1` when `u → -∞`.
    pub direction: f64,
}

/// A solution of `u'' = -P(x, u)` as `(x, u, v = u')` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePath {
    pub xs: Vec<f64>,
    pub us: Vec<f64>,
    pub vs: Vec<f64>,
    pub escape: Option<Escape>,
    /// `max |H - H(start)|` for `H = v²/2 + Q(u)`; only for constant coefficients.
    pub h_drift: Option<f64>,
}

/// RK4 for the steady equation written as `u' = v, v' = -P(x, u)`, starting
/// at `(x_span.0, u_left, slope_left)` and stopping early if `|u| > u_max`.
pub fn shoot(
    nl: &Nonlinearity,
    u_left: f64,
    slope_left: f64,
    x_span: (f64, f64),
    h_ode: f64,
    u_max: f64,
) -> Result<PhasePath> {
    let (x0, x1) = x_span;
    if !(h_ode > 0.0 && x1 > x0) {
        return Err(NumericsError::Precondition("need h_ode > 0 and a non-empty span".into()));
    }
    let constant = nl.constant_coefficients().ok();
    let coeffs_at = |x: f64| -> Result<Vec<f64>> {
        match &constant {
            Some(c) => Ok(c.clone()),
            None => nl.coefficients_at(x),
        }
    };
    let accel = |x: f64, u: f64| -> Result<f64> {
        let a = coeffs_at(x)?;
        Ok(-nl.p_scalar(&|i| a[i], u))
    };
    let energy = |u: f64, v: f64| {
        let a = constant.as_ref().expect("constant coefficients");
        0.5 * v * v + nl.q_scalar(&|i| a[i], u)
    };

    let steps = ((x1 - x0) / h_ode).round().max(1.0) as usize;
    let h = (x1 - x0) / steps as f64;
    let mut path = PhasePath {
        xs: vec![x0],
        us: vec![u_left],
        vs: vec![slope_left],
        escape: None,
        h_drift: constant.as_ref().map(|_| 0.0),
    };
    let h0 = constant.as_ref().map(|_| energy(u_left, slope_left));
    let (mut u, mut v) = (u_left, slope_left);
    for k in 0..steps {
        let x = x0 + k as f64 * h;
        let k1u = v;
        let k1v = accel(x, u)?;
        let k2u = v + 0.5 * h * k1v;
        let k2v = accel(x + 0.5 * h, u + 0.5 * h * k1u)?;
        let k3u = v + 0.5 * h * k2v;
        let k3v = accel(x + 0.5 * h, u + 0.5 * h * k2u)?;
        let k4u = v + h * k3v;
        let k4v = accel(x + h, u + h * k3u)?;
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        let x_next = x0 + (k + 1) as f64 * h;
        path.xs.push(x_next);
        path.us.push(u);
        path.vs.push(v);
        if !u.is_finite() || u.abs() > u_max {
            let direction = if u.is_nan() { path.us[k].signum() } else { u.signum() };
            path.escape = Some(Escape { x: x_next, direction });
            break;
        }
        if let (Some(h0), Some(d)) = (h0, path.h_drift.as_mut()) {
            *d = d.max((energy(u, v) - h0).abs());
        }
    }
    Ok(path)
}

/// Shoots across the box from each `u_left` with slope `slope_left` at
/// `h_ode = h/4`, samples non-escaping paths at the grid nodes and projects
/// them onto equilibria with Newton.
pub fn shooting_scan(nl: &Nonlinearity, u_lefts: &[f64], slope_left: f64, u_max: f64, max_iter: usize) -> Vec<Result<Equilibrium>> {
    let g = *nl.grid();
    let half = g.half_length();
    let (offset, stride) = match g.boundary() {
        Boundary::Periodic => (0, 4),
        Boundary::Dirichlet0 => (4, 4),
        Boundary::Neumann0 => (2, 4),
    };
    u_lefts
        .iter()
        .map(|&u0| {
            let path = shoot(nl, u0, slope_left, (-half, half), g.h() / 4.0, u_max)?;
            if let Some(esc) = path.escape {
                return Err(NumericsError::Precondition(format!(
                    "shot from u = {u0} escaped at x = {:.4} towards {}",
                    esc.x,
                    if esc.direction > 0.0 { "+inf" } else { "-inf" }
                )));
            }
            let values: Vec<f64> = (0..g.len()).map(|j| path.us[offset + stride * j]).collect();
            let guess = Field::new(g, values)?;
            let trace = newton_solve(nl, &guess, max_iter, TOL_EQ_SHOOTING.min(TOL_EQ))?;
            Equilibrium::certify(nl, trace.field, EquilibriumSource::Shooting, TOL_EQ_SHOOTING)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnstableDirection {
    pub eigenvalue: f64,
    /// Normalised to sup-norm 1 with its largest entry positive.
    pub direction: Field,
    /// Set when the leading eigenvalue is zero to `1e-8`.
    pub degenerate: bool,
    pub iterations: usize,
}

pub const EIGEN_MAX_ITER: usize = 10_000;

/// Leading eigenpair of the linearisation `J = Δ_h + diag(P'(u))` at `eq`.
///
/// Power iteration on `(σ I - J)⁻¹`, with `σ` just above the Gershgorin upper
/// bound of `J`: every eigenvalue of the inverse is positive and the largest
/// belongs to the largest eigenvalue of `J`. Starts from the constant field.
pub fn unstable_direction(nl: &Nonlinearity, eq: &Equilibrium) -> Result<UnstableDirection> {
    let g = *nl.grid();
    let jac = g.laplacian_operator().plus_diagonal(nl.apply_dp(&eq.field)?.values());
    let upper = jac.gershgorin_upper();
    let sigma = upper + 1e-3 * upper.abs().max(1.0);
    let resolvent = jac.clone().scaled(-1.0).shifted(sigma);
    let jac_norm = jac.norm_inf().max(1.0);

    let norm2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut v = vec![1.0; g.len()];
    let mut lambda = f64::NAN;
    for it in 1..=EIGEN_MAX_ITER {
        let w = resolvent.solve(&v)?;
        let n = norm2(&w);
        if !(n.is_finite() && n > 0.0) {
            return Err(NumericsError::Range("eigenvector iterate".into()));
        }
        v = w.iter().map(|x| x / n).collect();
        let jv = jac.apply(&v);
        lambda = v.iter().zip(&jv).map(|(a, b)| a * b).sum::<f64>();
        let res = norm2(&jv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect::<Vec<_>>());
        if res <= 1e-10 * jac_norm {
            let (imax, _) = v
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bi, bm), (i, x)| if x.abs() > bm + 1e-12 { (i, x.abs()) } else { (bi, bm) });
            let scale = 1.0 / v[imax];
            let direction = Field::from_raw(g, v.iter().map(|x| x * scale).collect());
            return Ok(UnstableDirection { eigenvalue: lambda, direction, degenerate: lambda.abs() < 1e-8, iterations: it });
        }
    }
    Err(NumericsError::NoConvergence { iterations: EIGEN_MAX_ITER, residual: lambda })
}

/// Equilibria found so far, de-duplicated by sup distance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    pub entries: Vec<Equilibrium>,
}

impl Catalog {
    pub fn new() -> Self {
        Catalog::default()
    }

    /// Adds `eq` unless an entry lies within `tol`; returns its index.
    pub fn insert(&mut self, eq: Equilibrium, tol: f64) -> usize {
        if let Some((i, d)) = self.nearest(&eq.field) {
            if d < tol {
                return i;
            }
        }
        self.entries.push(eq);
        self.entries.len() - 1
    }

    /// Closest entry and its sup distance.
    pub fn nearest(&self, field: &Field) -> Option<(usize, f64)> {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.field.sup_distance(field).ok().map(|d| (i, d)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorts constant entries by value, others after them in insertion order.
    pub fn sort(&mut self) {
        self.entries.sort_by(|a, b| {
            let key = |e: &Equilibrium| if e.is_constant() { (0, e.field.values()[0]) } else { (1, 0.0) };
            let (ka, kb) = (key(a), key(b));
            ka.0.cmp(&kb.0).then(ka.1.partial_cmp(&kb.1).unwrap())
        });
    }
}
