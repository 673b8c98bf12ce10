//! Numerical side of the toolkit: trajectory integration of the
//! projected fields, invariant-manifold shooting from proper impasse
//! points, the improper-impasse trichotomy, limit estimation and phase
//! portraits.
//!
//! The integrator is an embedded Runge-Kutta 5(4) pair with adaptive
//! steps; event locations are refined by bisection on a cubic Hermite
//! interpolant of the accepted step.

mod limits;
mod portrait;

pub use limits::{estimate_limit_powerlaw, estimate_limit_resonant, fit_holder_exponent, LimitEstimate};
pub use portrait::{portrait, Portrait, PortraitOptions, StationaryPoint};

use thiserror::Error;

use crate::classify::{classify_impasse, ImpasseClass, VectorFieldSpec, TAU_ON};
use crate::expr::{EvalError, Expr, JetPoint, Var};
use crate::ivp::{IvpError, SecondOrderIvp, TAU_RES};
use crate::jet::{compute_h, QuasiLinearEq};
use crate::scalar::{Real, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("field is not finite at the start point")]
    NonFiniteField,
    #[error("point is not an improper impasse point")]
    NotImproperImpasse,
    #[error("transversal eigenvector has vanishing x-component")]
    NonTransversal,
    #[error("resonance at order {0} blocks the requested construction")]
    ResonanceBelow(u32),
    #[error("trajectory does not approach the base point closely enough")]
    InsufficientApproach,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ivp(#[from] IvpError),
    #[error(transparent)]
    Classify(#[from] crate::classify::ClassifyError),
}

/// Why the integrator flagged or stopped at a given time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// The tracked function `g` changed sign across a step.
    GSignChange,
    /// Step size collapsed: the trajectory converges to a stationary
    /// point.
    StationaryApproach,
    /// State norm exceeded the blow-up threshold.
    Blowup,
    /// Domain error in the field or exit from the configured window.
    LeftDomain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub field: String,
    pub tol: f64,
    pub normalized: bool,
}

/// A numerically integrated trajectory in jet coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<R = f64> {
    /// `(t, state)` pairs; `state` holds `(x, u, u1, ...)`.
    pub states: Vec<(R, Vec<R>)>,
    pub events: Vec<Event>,
    pub meta: TrajectoryMeta,
}

impl<R: Real> Trajectory<R> {
    /// Linear interpolation of coordinate `col` as a function of the
    /// x-coordinate (column 0); None outside the sampled x-range or on
    /// non-monotone segments.
    pub fn sample_by_x(&self, x: f64, col: usize) -> Option<f64> {
        for w in self.states.windows(2) {
            let (x0, x1) = (fl(w[0].1[0]), fl(w[1].1[0]));
            let (lo, hi) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
            if x >= lo && x <= hi && x1 != x0 {
                let s = (x - x0) / (x1 - x0);
                let (y0, y1) = (fl(w[0].1[col]), fl(w[1].1[col]));
                return Some(y0 + s * (y1 - y0));
            }
        }
        None
    }

    /// States re-sorted by the x-coordinate, turning the time
    /// parameterization into solution-graph samples.
    pub fn solution_graph(&self) -> Vec<Vec<f64>> {
        let mut rows: Vec<Vec<f64>> = self
            .states
            .iter()
            .map(|(_, s)| s.iter().map(|v| fl(*v)).collect())
            .collect();
        rows.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        rows
    }
}

/// Integration controls; `Default` gives a plain run to `tmax = 1`.
#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub tmax: f64,
    pub tol: f64,
    pub max_steps: usize,
    /// Rescale time by the field norm (unit-speed trajectories); the
    /// invariant curves are unchanged.
    pub normalized: bool,
    /// Function whose sign changes should be recorded as events.
    pub g_event: Option<Expr>,
    /// Stop (recording a LeftDomain event) when the x-coordinate
    /// leaves this window.
    pub x_window: Option<(f64, f64)>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            tmax: 1.0,
            tol: 1e-10,
            max_steps: 100_000,
            normalized: false,
            g_event: None,
            x_window: None,
        }
    }
}

pub const BLOWUP_NORM: f64 = 1e12;
pub const MIN_STEP: f64 = 1e-14;

fn fl<R: Real>(v: R) -> f64 {
    Scalar::to_f64(&v)
}

fn var_slot(v: Var) -> usize {
    match v {
        Var::X => 0,
        Var::U(k) => k as usize + 1,
    }
}

struct OdeField<'a, R> {
    field: &'a VectorFieldSpec,
    slots: Vec<usize>,
    normalized: bool,
    _marker: std::marker::PhantomData<R>,
}

impl<'a, R: Real> OdeField<'a, R> {
    fn new(field: &'a VectorFieldSpec, normalized: bool) -> Self {
        OdeField {
            field,
            slots: field.vars.iter().map(|v| var_slot(*v)).collect(),
            normalized,
            _marker: std::marker::PhantomData,
        }
    }

    fn eval(&self, state: &[R]) -> Result<Vec<R>, EvalError> {
        let p = JetPoint::new(state.to_vec());
        let mut out = vec![<R as Scalar>::zero(); state.len()];
        for (slot, comp) in self.slots.iter().zip(&self.field.components) {
            out[*slot] = comp.eval(&p)?;
        }
        if self.normalized {
            let norm = out
                .iter()
                .fold(<R as Scalar>::zero(), |acc, v| acc + *v * *v)
                .sqrt();
            if fl(norm) > 1e-12 {
                for v in out.iter_mut() {
                    *v = *v / norm;
                }
            }
        }
        Ok(out)
    }
}

// Dormand-Prince 5(4) tableau (autonomous fields, so no c-column)
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

fn axpy<R: Real>(y: &[R], h: R, ks: &[Vec<R>], coeffs: &[f64]) -> Vec<R> {
    let mut out = y.to_vec();
    for (k, c) in ks.iter().zip(coeffs) {
        if *c == 0.0 {
            continue;
        }
        let c = R::cast(*c);
        for (o, kv) in out.iter_mut().zip(k) {
            *o = *o + h * c * *kv;
        }
    }
    out
}

fn norm_inf<R: Real>(v: &[R]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(fl(*x).abs()))
}

fn hermite<R: Real>(y0: &[R], y1: &[R], f0: &[R], f1: &[R], h: R, s: f64) -> Vec<R> {
    let s = R::cast(s);
    let one = <R as Scalar>::one();
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = R::cast(2.0) * s3 - R::cast(3.0) * s2 + one;
    let h10 = s3 - R::cast(2.0) * s2 + s;
    let h01 = R::cast(-2.0) * s3 + R::cast(3.0) * s2;
    let h11 = s3 - s2;
    y0.iter()
        .zip(y1)
        .zip(f0.iter().zip(f1))
        .map(|((a, b), (da, db))| h00 * *a + h10 * h * *da + h01 * *b + h11 * h * *db)
        .collect()
}

/// Integrates `field` from `start` over `[0, opts.tmax]` (negative
/// `tmax` integrates backward).  See [`IntegrateOptions`] for the
/// termination and event rules.
pub fn integrate<R: Real>(
    field: &VectorFieldSpec,
    start: &JetPoint<R>,
    opts: &IntegrateOptions,
) -> Result<Trajectory<R>, DynamicsError> {
    let ode = OdeField::<R>::new(field, opts.normalized);
    let mut y: Vec<R> = start.coords().to_vec();
    let f0 = ode.eval(&y).map_err(|_| DynamicsError::NonFiniteField)?;
    if f0.iter().any(|v| !fl(*v).is_finite()) {
        return Err(DynamicsError::NonFiniteField);
    }

    let dir = if opts.tmax < 0.0 { -1.0 } else { 1.0 };
    let t_end = opts.tmax.abs();
    let mut t = 0.0f64;
    let mut h = (t_end / 100.0).min(1e-3).max(MIN_STEP * 10.0);
    let mut dy = f0;

    let g_at = |state: &[R]| -> Option<f64> {
        opts.g_event.as_ref().and_then(|g| {
            g.eval(&JetPoint::new(state.to_vec()))
                .ok()
                .map(|v: R| fl(v))
        })
    };
    let mut g_prev = g_at(&y);

    let mut states = vec![(R::cast(0.0), y.clone())];
    let mut events = Vec::new();
    let meta = TrajectoryMeta {
        field: format!("{}-dim field", field.dim()),
        tol: opts.tol,
        normalized: opts.normalized,
    };
    let finish = |states, events| {
        Ok(Trajectory {
            states,
            events,
            meta,
        })
    };

    for _ in 0..opts.max_steps {
        if t >= t_end {
            break;
        }
        h = h.min(t_end - t);
        let hr = R::cast(dir * h);

        // one embedded step
        let mut ks: Vec<Vec<R>> = vec![dy.clone()];
        let mut failed = false;
        for stage in 0..6 {
            let yi = axpy(&y, hr, &ks, DP_A[stage]);
            match ode.eval(&yi) {
                Ok(k) => ks.push(k),
                Err(_) => {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            // shrink toward the domain boundary; give up at MIN_STEP
            h *= 0.5;
            if h < MIN_STEP {
                events.push(Event {
                    t: dir * t,
                    kind: EventKind::LeftDomain,
                });
                return finish(states, events);
            }
            continue;
        }
        let y_new = axpy(&y, hr, &ks, DP_A[5]);
        let mut err = 0.0f64;
        for i in 0..y.len() {
            let mut e = <R as Scalar>::zero();
            for (k, c) in ks.iter().zip(DP_E.iter()) {
                e = e + R::cast(*c) * k[i];
            }
            let scale = 1.0 + fl(y[i]).abs().max(fl(y_new[i]).abs());
            err = err.max(fl(hr * e).abs() / scale);
        }
        if err > opts.tol && h > MIN_STEP {
            h *= (0.9 * (opts.tol / err).powf(0.2)).clamp(0.1, 1.0);
            continue;
        }

        // accepted
        let dy_new = ks.last().unwrap().clone();
        let t_new = t + h;
        if let Some(g1) = g_at(&y_new) {
            if let Some(g0) = g_prev {
                if g0 != 0.0 && g1 != 0.0 && g0.signum() != g1.signum() {
                    // bisect on the Hermite interpolant of this step
                    let (mut lo, mut hi) = (0.0f64, 1.0f64);
                    for _ in 0..80 {
                        let mid = 0.5 * (lo + hi);
                        let ym = hermite(&y, &y_new, &dy, &dy_new, hr, mid);
                        let gm = g_at(&ym).unwrap_or(0.0);
                        if gm == 0.0 || (hi - lo) * h < opts.tol {
                            lo = mid;
                            break;
                        }
                        if gm.signum() == g0.signum() {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    events.push(Event {
                        t: dir * (t + 0.5 * (lo + hi) * h),
                        kind: EventKind::GSignChange,
                    });
                }
            }
            g_prev = Some(g1);
        }
        y = y_new;
        dy = dy_new;
        t = t_new;
        states.push((R::cast(dir * t), y.clone()));

        if norm_inf(&y) > BLOWUP_NORM {
            events.push(Event {
                t: dir * t,
                kind: EventKind::Blowup,
            });
            return finish(states, events);
        }
        if let Some((lo, hi)) = opts.x_window {
            let x = fl(y[0]);
            if x < lo || x > hi {
                events.push(Event {
                    t: dir * t,
                    kind: EventKind::LeftDomain,
                });
                return finish(states, events);
            }
        }
        let next = h * (0.9 * (opts.tol / err.max(1e-300)).powf(0.2)).clamp(0.2, 5.0);
        if next < MIN_STEP {
            events.push(Event {
                t: dir * t,
                kind: EventKind::StationaryApproach,
            });
            return finish(states, events);
        }
        h = next;
    }
    finish(states, events)
}

/// The extension of the projected field to higher jets whose Jacobian
/// is triangular at the lifted initial point: components
/// `(g, g u1, f, ...)` with the prolongation remainders filling the
/// slots above order one.
pub fn hat_field(eq: &QuasiLinearEq, q: u32) -> Result<VectorFieldSpec, DynamicsError> {
    assert!(q >= 2);
    let gp = eq.g.diff(Var::X);
    let fu1 = eq.f.diff(Var::U(1));
    let mut vars = vec![Var::X, Var::U(0), Var::U(1)];
    let mut components = vec![
        eq.g.clone(),
        Expr::mul(eq.g.clone(), Expr::u(1)).simplify(),
        eq.f.clone(),
    ];
    for k in 3..=q {
        let h = compute_h(eq, k).map_err(IvpError::from)?;
        let coef = Expr::sub(
            Expr::mul(Expr::int(k as i64 - 2), gp.clone()),
            fu1.clone(),
        );
        components.push(Expr::sub(h, Expr::mul(coef, Expr::u(k - 1))).simplify());
        vars.push(Var::U(k - 1));
    }
    Ok(VectorFieldSpec { vars, components })
}

/// Traces the invariant manifold tangent to the delta-eigenvector at
/// the lifted initial point: starts at `rho_{q-1} + side*eps*v` and
/// integrates away from the stationary point.
pub fn shoot_manifold(
    ivp: &SecondOrderIvp<f64>,
    q: u32,
    side: i8,
    eps: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory, DynamicsError> {
    let spec = ivp.jacobian_spectrum(q, TAU_RES)?;
    let v = spec
        .delta_eigenvector
        .ok_or(DynamicsError::ResonanceBelow(q - 1))?;
    let norm = v.iter().fold(0.0f64, |a, x| a + x * x).sqrt();
    let v: Vec<f64> = v.iter().map(|x| x / norm).collect();
    if v[0].abs() <= 1e-12 {
        return Err(DynamicsError::NonTransversal);
    }
    let chain = ivp.taylor_coefficients(q - 1, TAU_RES)?;
    let base = chain.coeffs();
    let mut coords = vec![ivp.y];
    coords.extend_from_slice(base);
    for (c, vi) in coords.iter_mut().zip(&v) {
        *c += side as f64 * eps * vi;
    }
    let field = hat_field(&ivp.eq, q)?;
    let delta = spec.relevant[0];
    let mut o = opts.clone();
    // forward time expands the delta-direction when delta > 0
    o.tmax = opts.tmax.abs() * delta.signum();
    if o.x_window.is_none() {
        let r = 0.5 * ivp.y.abs().max(1.0);
        o.x_window = Some((ivp.y - r, ivp.y + r));
    }
    integrate(&field, &JetPoint::new(coords), &o)
}

/// The trichotomy of trajectory behaviour through an improper impasse
/// point: the x-coordinate is frozen (a vertical-line solution), or
/// `g` keeps or changes its sign along the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImproperBehavior {
    /// `g` vanishes identically along the trajectory: the geometric
    /// solution is a vertical line over a single x.
    VerticalLine,
    /// One continuation with reduced regularity.
    NoSignChange,
    /// `g` goes from negative to positive: x has a local minimum,
    /// two solutions start at the base x.
    SignChangePlus,
    /// `g` goes from positive to negative: two solutions end there.
    SignChangeMinus,
}

const VERTICAL_WINDOW: f64 = 1e-10;

/// Classifies the unique trajectory through an improper impasse point
/// by integrating a short arc in both time directions.
pub fn improper_impasse_behavior(
    eq: &QuasiLinearEq,
    rho: &JetPoint<f64>,
    tol: f64,
) -> Result<ImproperBehavior, DynamicsError> {
    if classify_impasse(eq, rho, TAU_ON)? != ImpasseClass::ImproperImpasse {
        return Err(DynamicsError::NotImproperImpasse);
    }
    let field = crate::classify::project_field(eq);
    let opts = IntegrateOptions {
        tmax: 0.5,
        tol,
        normalized: true,
        ..IntegrateOptions::default()
    };
    let back = {
        let mut o = opts.clone();
        o.tmax = -0.5;
        integrate(&field, rho, &o)?
    };
    let fwd = integrate(&field, rho, &opts)?;

    let x_bar = *rho.x();
    let x_dev = fwd
        .states
        .iter()
        .chain(back.states.iter())
        .fold(0.0f64, |m, (_, s)| m.max((s[0] - x_bar).abs()));
    if x_dev <= VERTICAL_WINDOW {
        return Ok(ImproperBehavior::VerticalLine);
    }

    // sign of g at the far ends of the arc, oriented by trajectory time
    let g_of = |s: &[f64]| eq.g.eval(&JetPoint::new(s.to_vec())).unwrap_or(f64::NAN);
    let g_before = back
        .states
        .iter()
        .rev()
        .map(|(_, s)| g_of(s))
        .find(|g| g.abs() > TAU_ON)
        .unwrap_or(0.0);
    let g_after = fwd
        .states
        .iter()
        .rev()
        .map(|(_, s)| g_of(s))
        .find(|g| g.abs() > TAU_ON)
        .unwrap_or(0.0);
    if g_before < 0.0 && g_after > 0.0 {
        Ok(ImproperBehavior::SignChangePlus)
    } else if g_before > 0.0 && g_after < 0.0 {
        Ok(ImproperBehavior::SignChangeMinus)
    } else {
        Ok(ImproperBehavior::NoSignChange)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn field2(xs: &str, us: &str) -> VectorFieldSpec {
        VectorFieldSpec {
            vars: vec![Var::X, Var::U(0)],
            components: vec![parse(xs).unwrap(), parse(us).unwrap()],
        }
    }

    #[test]
    fn linear_field_is_exponential() {
        let f = field2("x", "u");
        let traj = integrate(
            &f,
            &JetPoint::new(vec![1.0f64, 2.0]),
            &IntegrateOptions::default(),
        )
        .unwrap();
        for (t, s) in &traj.states {
            assert!((s[0] - t.exp()).abs() < 1e-8);
            assert!((s[1] - 2.0 * t.exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_field_is_constant() {
        let f = field2("0", "0");
        let traj = integrate(
            &f,
            &JetPoint::new(vec![0.3, -0.7]),
            &IntegrateOptions::default(),
        )
        .unwrap();
        for (_, s) in &traj.states {
            assert_eq!(s, &vec![0.3, -0.7]);
        }
    }

    #[test]
    fn gamma_zero_model_closed_form() {
        // xdot = x, udot = x*v, vdot = d v^3 has v(t) = (c - 2 d t)^(-1/2)
        let field = VectorFieldSpec {
            vars: vec![Var::X, Var::U(0), Var::U(1)],
            components: vec![
                parse("x").unwrap(),
                parse("x*u1").unwrap(),
                parse("-2*u1^3").unwrap(),
            ],
        };
        let (a, c, d) = (0.5f64, 4.0f64, -2.0f64);
        let v0 = c.powf(-0.5);
        let traj = integrate(
            &field,
            &JetPoint::new(vec![a, 0.0, v0]),
            &IntegrateOptions {
                tol: 1e-10,
                ..IntegrateOptions::default()
            },
        )
        .unwrap();
        for (t, s) in &traj.states {
            let want_x = a * t.exp();
            let want_v = (c - 2.0 * d * t).powf(-0.5);
            assert!((s[0] - want_x).abs() < 1e-6, "x at t={t}");
            assert!((s[2] - want_v).abs() < 1e-6, "v at t={t}");
        }
    }

    #[test]
    fn halving_tol_reduces_error() {
        let field = VectorFieldSpec {
            vars: vec![Var::X, Var::U(0), Var::U(1)],
            components: vec![
                parse("x").unwrap(),
                parse("x*u1").unwrap(),
                parse("-2*u1^3").unwrap(),
            ],
        };
        let start = JetPoint::new(vec![0.5f64, 0.0, 0.5]);
        let err_at = |tol: f64| {
            let traj = integrate(
                &field,
                &start,
                &IntegrateOptions {
                    tol,
                    ..IntegrateOptions::default()
                },
            )
            .unwrap();
            let (t, s) = traj.states.last().unwrap();
            let want = (4.0 + 4.0 * t).powf(-0.5f64);
            (s[2] - want).abs()
        };
        let (e1, e2) = (err_at(1e-6), err_at(5e-7));
        assert!(e2 <= 0.5 * e1 + 1e-15, "e1={e1} e2={e2}");
    }

    #[test]
    fn contact_residual_along_trajectories() {
        // du/dt = u1 dx/dt holds along trajectories of the projected field
        let eq = QuasiLinearEq::new(
            parse("x").unwrap(),
            parse("u1^2+x-1/4").unwrap(),
            2,
        )
        .unwrap();
        let field = crate::classify::project_field(&eq);
        let tol = 1e-10;
        let traj = integrate(
            &field,
            &JetPoint::new(vec![0.2, 0.1, -0.4]),
            &IntegrateOptions {
                tol,
                ..IntegrateOptions::default()
            },
        )
        .unwrap();
        // per-state residual of the contact identity du/dt = u1 dx/dt
        for (_, s) in &traj.states {
            let p = JetPoint::new(s.clone());
            let rates = field.eval_at::<f64>(&p).unwrap();
            assert!((rates[1] - s[2] * rates[0]).abs() <= 10.0 * tol);
        }
        // and the step increments satisfy it to the quadrature order
        for w in traj.states.windows(2) {
            let dt: f64 = w[1].0 - w[0].0;
            let du = w[1].1[1] - w[0].1[1];
            let dx = w[1].1[0] - w[0].1[0];
            let u1 = 0.5 * (w[0].1[2] + w[1].1[2]);
            assert!((du - u1 * dx).abs() <= 10.0 * tol + dt.powi(3));
        }
    }

    #[test]
    fn g_sign_change_event_is_recorded() {
        // x(t) = t - 1 crosses zero at t = 1
        let field = field2("1", "0");
        let traj = integrate(
            &field,
            &JetPoint::new(vec![-1.0, 0.0]),
            &IntegrateOptions {
                tmax: 2.0,
                g_event: Some(parse("x").unwrap()),
                ..IntegrateOptions::default()
            },
        )
        .unwrap();
        let ev: Vec<&Event> = traj
            .events
            .iter()
            .filter(|e| e.kind == EventKind::GSignChange)
            .collect();
        assert_eq!(ev.len(), 1);
        assert!((ev[0].t - 1.0).abs() < 1e-8);
    }

    #[test]
    fn blowup_detection() {
        let field = field2("x^2", "0");
        let traj = integrate(
            &field,
            &JetPoint::new(vec![1.0, 0.0]),
            &IntegrateOptions {
                tmax: 2.0,
                ..IntegrateOptions::default()
            },
        )
        .unwrap();
        assert!(traj
            .events
            .iter()
            .any(|e| matches!(e.kind, EventKind::Blowup | EventKind::StationaryApproach)));
    }

    #[test]
    fn shooting_reproduces_taylor_coefficients() {
        let ivp = SecondOrderIvp::new(
            parse("x").unwrap(),
            parse("u1^2+x-1/4").unwrap(),
            0.0,
            0.0,
            -0.5,
        )
        .unwrap();
        for side in [1i8, -1] {
            let traj = shoot_manifold(&ivp, 3, side, 1e-6, &IntegrateOptions {
                tmax: 20.0,
                tol: 1e-12,
                ..IntegrateOptions::default()
            })
            .unwrap();
            // divided differences of u' at |x| = 1e-3 give c2, c3
            let h = 1e-3 * side as f64;
            let u1 = |x: f64| traj.sample_by_x(x, 2).unwrap();
            let c2 = (u1(h) - u1(0.5 * h)) / (0.5 * h) - (u1(h) - 2.0 * u1(0.5 * h) - -0.5) / h;
            // simpler: forward difference from the initial slope
            let c2b = (u1(h) + 0.5) / h;
            assert!((c2b - 0.5).abs() < 1e-3, "side {side}: c2 {c2b} ({c2})");
            let c3 = 2.0 * (u1(h) + 0.5 - 0.5 * h) / (h * h);
            assert!((c3 - 1.0 / 6.0).abs() < 2e-2, "side {side}: c3 {c3}");
        }
    }

    #[test]
    fn shooting_power_law_family() {
        // x u'' = (3/2) u' + x: u'(x) = -2x + C x^(3/2)
        let ivp = SecondOrderIvp::new(
            parse("x").unwrap(),
            parse("(3/2)*u1+x").unwrap(),
            0.0,
            0.0,
            0.0,
        )
        .unwrap();
        let traj = shoot_manifold(&ivp, 2, 1, 1e-6, &IntegrateOptions {
            tmax: 20.0,
            tol: 1e-12,
            ..IntegrateOptions::default()
        })
        .unwrap();
        let u1 = |x: f64| traj.sample_by_x(x, 2).unwrap();
        // fit C at one x, check at another
        let x0 = 0.01;
        let c = (u1(x0) + 2.0 * x0) / x0.powf(1.5);
        let x1 = 0.04;
        assert!((u1(x1) - (-2.0 * x1 + c * x1.powf(1.5))).abs() < 1e-6);
    }

    #[test]
    fn shooting_refuses_resonance() {
        let ivp = SecondOrderIvp::new(
            parse("x").unwrap(),
            parse("u1").unwrap(),
            0.0,
            0.0,
            0.0,
        )
        .unwrap();
        assert!(matches!(
            shoot_manifold(&ivp, 2, 1, 1e-6, &IntegrateOptions::default()),
            Err(DynamicsError::ResonanceBelow(1))
        ));
    }

    #[test]
    fn improper_trichotomy() {
        // g=u, f=1: u=t along the flow, g goes - to +
        let eq = QuasiLinearEq::new(parse("u").unwrap(), parse("1").unwrap(), 1).unwrap();
        assert_eq!(
            improper_impasse_behavior(&eq, &JetPoint::new(vec![0.4, 0.0]), 1e-10).unwrap(),
            ImproperBehavior::SignChangePlus
        );
        // g=u^2 stays non-negative
        let eq = QuasiLinearEq::new(parse("u^2").unwrap(), parse("1").unwrap(), 1).unwrap();
        assert_eq!(
            improper_impasse_behavior(&eq, &JetPoint::new(vec![0.4, 0.0]), 1e-10).unwrap(),
            ImproperBehavior::NoSignChange
        );
        // g=x^2, f=u^2+x: x frozen at 0, vertical line
        let eq = QuasiLinearEq::new(parse("x^2").unwrap(), parse("u^2+x").unwrap(), 1).unwrap();
        assert_eq!(
            improper_impasse_behavior(&eq, &JetPoint::new(vec![0.0, 0.7]), 1e-10).unwrap(),
            ImproperBehavior::VerticalLine
        );
        // g=-u, f=1 flips the direction
        let eq = QuasiLinearEq::new(parse("-u").unwrap(), parse("1").unwrap(), 1).unwrap();
        assert_eq!(
            improper_impasse_behavior(&eq, &JetPoint::new(vec![0.4, 0.0]), 1e-10).unwrap(),
            ImproperBehavior::SignChangeMinus
        );
        // regular point is rejected
        let eq = QuasiLinearEq::new(parse("u").unwrap(), parse("1").unwrap(), 1).unwrap();
        assert!(matches!(
            improper_impasse_behavior(&eq, &JetPoint::new(vec![0.4, 1.0]), 1e-10),
            Err(DynamicsError::NotImproperImpasse)
        ));
    }
}
