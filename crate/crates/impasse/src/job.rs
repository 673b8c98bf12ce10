//! Batch front end: a TOML job description names an equation, a point
//! and a set of analyses; `run` executes them in dependency order and
//! collects everything into a deterministic, loss-free report.
//!
//! Task-level failures are embedded in the report as data; only a
//! malformed job description is an error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::classify::{
    classify_impasse, classify_point, fiber_case, jacobian_at, project_field, vessiot_generator,
    FiberRoots, ImpasseClass, JacobianAnalysis, VectorFieldSpec, TAU_ON,
};
use crate::dynamics::{
    estimate_limit_powerlaw, estimate_limit_resonant, fit_holder_exponent, hat_field,
    improper_impasse_behavior, integrate, portrait, shoot_manifold, IntegrateOptions,
    LimitEstimate, PortraitOptions, Trajectory,
};
use crate::expr::{parse, Expr, JetPoint, Var};
use crate::ivp::{
    DiagnoseOptions, DiagnosisCase, IvpDiagnosis, LimitDescriptor, Regularity, SecondOrderIvp,
    SolutionCount, TaylorChain, KMAX_DEFAULT, TAU_RES,
};
use crate::jet::QuasiLinearEq;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid job at `{path}`: {message}")]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

fn invalid(path: &str, message: impl Into<String>) -> ValidationError {
    ValidationError {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EquationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    /// Implicit left-hand side `F(x, u, ..., u^(q)) = 0`; mutually
    /// exclusive with the quasi-linear `g`/`f` pair.
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub implicit: Option<String>,
    pub order: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub q: u32,
    #[serde(default = "default_sides")]
    pub sides: Vec<i8>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_sides() -> Vec<i8> {
    vec![1, -1]
}

fn default_epsilon() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PortraitSpec {
    #[serde(default = "default_window")]
    pub window: [f64; 4],
    #[serde(default = "default_seeds")]
    pub seeds: usize,
}

fn default_window() -> [f64; 4] {
    [-1.0, 1.0, -1.0, 1.0]
}

fn default_seeds() -> usize {
    5
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TaskSpec {
    pub classify: bool,
    pub fiber: bool,
    pub diagnose: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taylor: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceSpec>,
    pub improper: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub portrait: Option<PortraitSpec>,
    pub limits: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_on: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_res: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<u32>,
}

/// One batch job: an equation, a point and the requested analyses.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub equation: EquationSpec,
    /// Coordinate map: keys `x`, `u`, `u1`, `u2`, ...
    pub point: BTreeMap<String, f64>,
    #[serde(default)]
    pub tasks: TaskSpec,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
}

impl JobSpec {
    pub fn from_toml(text: &str) -> Result<JobSpec, ValidationError> {
        toml::from_str(text).map_err(|e| invalid("", e.to_string()))
    }
}

/// The report, ready for serialization.  All rational quantities are
/// stored as numerator/denominator strings alongside their decimal
/// renderings, so nothing is lost.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub job: Value,
    pub results: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct NamedTrajectory {
    pub file_name: String,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub traces: Vec<NamedTrajectory>,
}

struct ParsedJob {
    ql: Option<QuasiLinearEq>,
    implicit: crate::jet::ImplicitEq,
    coords: Vec<f64>,
    tau_on: f64,
    tau_res: f64,
    tol: f64,
    kmax: u32,
}

fn parse_expr(path: &str, text: &str) -> Result<Expr, ValidationError> {
    parse(text).map_err(|e| invalid(path, e.to_string()))
}

fn parse_point(map: &BTreeMap<String, f64>) -> Result<Vec<f64>, ValidationError> {
    let mut coords = Vec::new();
    let x = map
        .get("x")
        .ok_or_else(|| invalid("point.x", "missing coordinate"))?;
    coords.push(*x);
    coords.push(
        *map.get("u")
            .ok_or_else(|| invalid("point.u", "missing coordinate"))?,
    );
    for (key, _) in map.iter() {
        if key == "x" || key == "u" {
            continue;
        }
        let Some(k) = key.strip_prefix('u').and_then(|s| s.parse::<u32>().ok()) else {
            return Err(invalid(
                &format!("point.{key}"),
                "unknown coordinate (expected x, u, u1, u2, ...)",
            ));
        };
        if k == 0 {
            return Err(invalid("point.u0", "write the zeroth derivative as `u`"));
        }
    }
    for k in 1.. {
        match map.get(&format!("u{k}")) {
            Some(v) => coords.push(*v),
            None => break,
        }
    }
    if map.len() != coords.len() {
        return Err(invalid("point", "derivative coordinates must be contiguous"));
    }
    Ok(coords)
}

fn validate(job: &JobSpec) -> Result<ParsedJob, ValidationError> {
    let eq = &job.equation;
    if eq.order == 0 {
        return Err(invalid("equation.order", "order must be at least 1"));
    }
    let quasi = eq.g.is_some() || eq.f.is_some();
    if quasi == eq.implicit.is_some() {
        return Err(invalid(
            "equation",
            "give either g and f, or F, but not both",
        ));
    }
    let (ql, implicit) = if quasi {
        let g_text = eq
            .g
            .as_deref()
            .ok_or_else(|| invalid("equation.g", "missing (f without g)"))?;
        let f_text = eq
            .f
            .as_deref()
            .ok_or_else(|| invalid("equation.f", "missing (g without f)"))?;
        let g = parse_expr("equation.g", g_text)?;
        let f = parse_expr("equation.f", f_text)?;
        let ql = QuasiLinearEq::new(g, f, eq.order)
            .map_err(|e| invalid("equation", e.to_string()))?;
        let implicit = ql.implicit();
        (Some(ql), implicit)
    } else {
        let f_expr = parse_expr("equation.F", eq.implicit.as_deref().unwrap())?;
        let implicit = crate::jet::ImplicitEq::new(f_expr, eq.order)
            .map_err(|e| invalid("equation.F", e.to_string()))?;
        (None, implicit)
    };

    let section8 = ql.as_ref().is_some_and(|q| {
        q.order == 2 && q.g.vars().iter().all(|v| *v == Var::X)
    });
    let needs_s8: &[(&str, bool)] = &[
        ("tasks.diagnose", job.tasks.diagnose),
        ("tasks.taylor", job.tasks.taylor.is_some()),
        ("tasks.trace", job.tasks.trace.is_some()),
        ("tasks.limits", job.tasks.limits),
    ];
    for (path, requested) in needs_s8 {
        if *requested && !section8 {
            return Err(invalid(
                path,
                "requires a second-order quasi-linear equation g(x) u'' = f",
            ));
        }
    }
    for (path, requested) in [
        ("tasks.fiber", job.tasks.fiber),
        ("tasks.improper", job.tasks.improper),
        ("tasks.portrait", job.tasks.portrait.is_some()),
    ] {
        if requested && ql.is_none() {
            return Err(invalid(path, "requires the quasi-linear g/f form"));
        }
    }
    if let Some(trace) = &job.tasks.trace {
        if trace.q < 2 {
            return Err(invalid("tasks.trace.q", "q must be at least 2"));
        }
        if trace.sides.iter().any(|s| *s != 1 && *s != -1) {
            return Err(invalid("tasks.trace.sides", "sides must be 1 or -1"));
        }
        if !(trace.epsilon > 0.0) {
            return Err(invalid("tasks.trace.epsilon", "epsilon must be positive"));
        }
    }

    let coords = parse_point(&job.point)?;
    Ok(ParsedJob {
        ql,
        implicit,
        coords,
        tau_on: job.tolerances.tau_on.unwrap_or(TAU_ON),
        tau_res: job.tolerances.tau_res.unwrap_or(TAU_RES),
        tol: job.tolerances.tol.unwrap_or(1e-10),
        kmax: job.tolerances.kmax.unwrap_or(KMAX_DEFAULT),
    })
}

// ---- report value builders ----

fn err_value(e: impl std::fmt::Display) -> Value {
    json!({ "error": e.to_string() })
}

fn rational(r: &num::BigRational) -> Value {
    json!({
        "num": r.numer().to_string(),
        "den": r.denom().to_string(),
        "decimal": crate::scalar::Scalar::to_f64(r),
    })
}

fn complex(re: f64, im: f64) -> Value {
    json!({ "re": re, "im": im })
}

fn spectrum_value(an: &JacobianAnalysis) -> Value {
    let entries: Vec<Value> = an
        .spectrum
        .iter()
        .map(|e| {
            let mut v = serde_json::Map::new();
            v.insert("value".into(), complex(e.value.re, e.value.im));
            v.insert("multiplicity".into(), json!(e.multiplicity));
            if let Some(x) = &e.exact {
                v.insert("exact".into(), rational(x));
            }
            if let Some(vec) = &e.eigenvector {
                v.insert("eigenvector".into(), json!(vec));
            }
            if let Some(t) = e.tangent_to_equation {
                v.insert("tangent_to_equation".into(), json!(t));
            }
            if let Some(t) = e.transversal {
                v.insert("transversal".into(), json!(t));
            }
            Value::Object(v)
        })
        .collect();
    json!(entries)
}

fn family_value(d: &IvpDiagnosis<f64>) -> Value {
    match &d.family {
        None => Value::Null,
        Some(f) => json!({
            "count": match f.count {
                SolutionCount::One => "One",
                SolutionCount::OneParameter => "OneParameter",
            },
            "two_sided": f.two_sided,
            "regularity": match f.regularity {
                Regularity::Smooth => json!("Smooth"),
                Regularity::CkNotCk1(k) => json!({ "ck_not_ck1": k }),
            },
        }),
    }
}

fn limit_value(l: &LimitDescriptor) -> Value {
    match l {
        LimitDescriptor::None => Value::Null,
        LimitDescriptor::PowerLaw(lam) => json!({ "kind": "PowerLaw", "exponent": lam }),
        LimitDescriptor::LogExp(delta) => json!({ "kind": "LogExp", "delta": delta }),
    }
}

/// Integer-looking values print without a fraction part; used in the
/// human-readable verdict lines.
fn fmt_short(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn verdict(d: &IvpDiagnosis<f64>) -> String {
    match d.case {
        DiagnosisCase::NoStrongSolution => {
            "no strong solution: f does not vanish at the initial point".into()
        }
        DiagnosisCase::GammaZero => "gamma = 0: unique smooth two-sided solution".into(),
        DiagnosisCase::SmoothResonance => format!(
            "smooth resonance at order k={} (A=0): one-parameter smooth family",
            d.k.unwrap()
        ),
        DiagnosisCase::CriticalResonance => format!(
            "critical resonance at order k={} (A={})",
            d.k.unwrap(),
            fmt_short(d.resonance_parameter.unwrap())
        ),
        DiagnosisCase::NegativeProduct => {
            "delta*gamma < 0: unique smooth two-sided solution".into()
        }
        DiagnosisCase::PositiveProduct => format!(
            "delta*gamma > 0: one-parameter family of class C^{} with one smooth member",
            d.k.unwrap()
        ),
    }
}

fn diagnosis_value(d: &IvpDiagnosis<f64>) -> Value {
    json!({
        "case": format!("{:?}", d.case),
        "verdict": verdict(d),
        "delta": d.delta,
        "gamma": d.gamma,
        "k": d.k,
        "resonance_parameter": d.resonance_parameter,
        "taylor": d.taylor,
        "family": family_value(d),
        "limit": limit_value(&d.limit),
        "near_resonance": d.near_resonance,
        "notes": d.notes,
    })
}

// ---- task execution ----

fn jet_point(coords: &[f64], len: usize) -> Result<JetPoint<f64>, String> {
    if coords.len() < len {
        Err(format!(
            "point has {} coordinates but this task needs {} (x, u, ..., u{})",
            coords.len(),
            len,
            len - 2
        ))
    } else {
        Ok(JetPoint::new(coords[..len].to_vec()))
    }
}

fn run_classify(job: &ParsedJob) -> Value {
    let q = job.implicit.order;
    let p = match jet_point(&job.coords, q as usize + 2) {
        Ok(p) => p,
        Err(e) => return err_value(e),
    };
    let class = match classify_point(&job.implicit, &p, job.tau_on) {
        Ok(c) => c,
        Err(e) => return err_value(e),
    };
    let field = vessiot_generator(&job.implicit);
    let mut out = serde_json::Map::new();
    out.insert("class".into(), json!(format!("{class:?}")));
    match jacobian_at(&field, &p, Some(&job.implicit.f_expr)) {
        Ok(an) => {
            out.insert("spectrum".into(), spectrum_value(&an));
        }
        Err(e) => {
            out.insert("spectrum".into(), err_value(e));
        }
    }
    Value::Object(out)
}

fn run_fiber(job: &ParsedJob) -> Value {
    let ql = job.ql.as_ref().unwrap();
    let p = match jet_point(&job.coords, ql.order as usize + 1) {
        Ok(p) => p,
        Err(e) => return err_value(e),
    };
    let class = match classify_impasse(ql, &p, job.tau_on) {
        Ok(c) => c,
        Err(e) => return err_value(e),
    };
    let mut out = serde_json::Map::new();
    out.insert("impasse_class".into(), json!(format!("{class:?}")));
    match class {
        ImpasseClass::Regular => {
            out.insert(
                "note".into(),
                json!("regular point: the projected field is transversal, no fiber analysis"),
            );
        }
        ImpasseClass::ImproperImpasse => {
            out.insert(
                "note".into(),
                json!(
                    "improper impasse point: the fibre contains no point of the equation, \
                     hence no irregular singularity; the obstruction is genuinely quasi-linear"
                ),
            );
        }
        ImpasseClass::ProperImpasse => {
            match fiber_case(ql, &p, job.tau_on) {
                Ok(an) => {
                    out.insert("case".into(), json!(format!("{:?}", an.case)));
                    out.insert(
                        "discriminant".into(),
                        an.discriminant.map_or(Value::Null, |d| json!(d)),
                    );
                    out.insert(
                        "roots".into(),
                        match an.roots {
                            FiberRoots::RealPair(a, b) => json!({ "kind": "RealPair", "values": [a, b] }),
                            FiberRoots::ComplexPair { re, im } => {
                                json!({ "kind": "ComplexPair", "value": complex(re, im) })
                            }
                            FiberRoots::Single(a) => json!({ "kind": "Single", "value": a }),
                            FiberRoots::None => json!({ "kind": "None" }),
                            FiberRoots::WholeFiber => json!({ "kind": "WholeFiber" }),
                        },
                    );
                }
                Err(e) => {
                    out.insert("case".into(), err_value(e));
                }
            }
            match jacobian_at(&project_field(ql), &p, None) {
                Ok(an) => {
                    out.insert("spectrum".into(), spectrum_value(&an));
                }
                Err(e) => {
                    out.insert("spectrum".into(), err_value(e));
                }
            }
        }
    }
    Value::Object(out)
}

fn make_ivp(job: &ParsedJob) -> Result<SecondOrderIvp<f64>, String> {
    let ql = job.ql.as_ref().unwrap();
    if job.coords.len() < 3 {
        return Err("initial value problem needs point coordinates x, u, u1".into());
    }
    SecondOrderIvp::new(
        ql.g.clone(),
        ql.f.clone(),
        job.coords[0],
        job.coords[1],
        job.coords[2],
    )
    .map_err(|e| e.to_string())
}

fn run_taylor(job: &ParsedJob, n: u32) -> Value {
    let ivp = match make_ivp(job) {
        Ok(i) => i,
        Err(e) => return err_value(e),
    };
    match ivp.taylor_coefficients(n, job.tau_res) {
        Ok(TaylorChain::Complete(c)) => json!({ "coefficients": c }),
        Ok(TaylorChain::Halted { k, coeffs }) => json!({
            "coefficients": coeffs,
            "halted_at": k,
            "note": "recursion divides by zero at the resonance order",
        }),
        Err(e) => err_value(e),
    }
}

fn csv_header(ncols: usize) -> String {
    let mut h = String::from("t,x,u");
    for k in 1..ncols.saturating_sub(1) {
        let _ = write!(h, ",u{k}");
    }
    h.push_str(",event");
    h
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let ncols = traj.states.first().map_or(0, |(_, s)| s.len());
    let mut out = csv_header(ncols);
    out.push('\n');
    // events are labelled on the stored row closest in time
    let mut labels: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for ev in &traj.events {
        let idx = traj
            .states
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (a.0 - ev.t)
                    .abs()
                    .partial_cmp(&(b.0 - ev.t).abs())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        labels.entry(idx).or_default().push(format!("{:?}", ev.kind));
    }
    for (i, (t, s)) in traj.states.iter().enumerate() {
        let mut row = fmt_g17(*t);
        for v in s {
            row.push(',');
            row.push_str(&fmt_g17(*v));
        }
        row.push(',');
        if let Some(l) = labels.get(&i) {
            row.push_str(&l.join(";"));
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}

fn sample_diff(a: &Trajectory, b: &Trajectory, x: f64, col: usize) -> Option<f64> {
    Some((a.sample_by_x(x, col)? - b.sample_by_x(x, col)?).abs())
}

fn run_trace(
    job: &ParsedJob,
    spec: &TraceSpec,
    skip_reason: Option<&str>,
    traces: &mut Vec<NamedTrajectory>,
) -> Value {
    if let Some(reason) = skip_reason {
        return json!({ "skipped": reason });
    }
    let ivp = match make_ivp(job) {
        Ok(i) => i,
        Err(e) => return err_value(e),
    };
    let opts = IntegrateOptions {
        tmax: 30.0,
        tol: job.tol,
        ..IntegrateOptions::default()
    };
    let mut out = serde_json::Map::new();
    for side in &spec.sides {
        let label = if *side > 0 { "+" } else { "-" };
        let key = format!("side{label}");
        let full = shoot_manifold(&ivp, spec.q, *side, spec.epsilon, &opts);
        let half = shoot_manifold(&ivp, spec.q, *side, 0.5 * spec.epsilon, &opts);
        match (full, half) {
            (Ok(t_full), Ok(t_half)) => {
                // two-offset agreement at |x - y| = 1e-3 scale
                let probe = ivp.y + *side as f64 * 1e-3 * ivp.y.abs().max(1.0);
                let diff = sample_diff(&t_full, &t_half, probe, 2);
                let stable = diff.is_some_and(|d| d < 1e-5);
                let file = format!("trace_q{}_side{}.csv", spec.q, label);
                out.insert(
                    key,
                    json!({
                        "file": file,
                        "epsilon": spec.epsilon,
                        "samples": t_full.states.len(),
                        "stable": stable,
                        "offset_agreement": diff,
                    }),
                );
                traces.push(NamedTrajectory {
                    file_name: file,
                    trajectory: t_full,
                });
            }
            (Err(e), _) | (_, Err(e)) => {
                out.insert(key, err_value(e));
            }
        }
    }
    Value::Object(out)
}

fn run_improper(job: &ParsedJob) -> Value {
    let ql = job.ql.as_ref().unwrap();
    let p = match jet_point(&job.coords, ql.order as usize + 1) {
        Ok(p) => p,
        Err(e) => return err_value(e),
    };
    match improper_impasse_behavior(ql, &p, job.tol) {
        Ok(b) => json!({ "behavior": format!("{b:?}") }),
        Err(e) => err_value(e),
    }
}

/// The closed planar subsystem used for portraits: `(x, u)` for first
/// order, `(x, u')` when a second-order right-hand side does not
/// involve `u`.
fn planar_subsystem(ql: &QuasiLinearEq) -> Result<VectorFieldSpec, String> {
    if ql.order == 1 {
        return Ok(VectorFieldSpec {
            vars: vec![Var::X, Var::U(0)],
            components: vec![ql.g.clone(), ql.f.clone()],
        });
    }
    if ql.order == 2 && !ql.f.depends_on(Var::U(0)) && ql.g.vars().iter().all(|v| *v == Var::X)
    {
        return Ok(VectorFieldSpec {
            vars: vec![Var::X, Var::U(1)],
            components: vec![ql.g.clone(), ql.f.clone()],
        });
    }
    Err("no closed planar subsystem: need order 1, or order 2 with f independent of u".into())
}

fn run_portrait(
    job: &ParsedJob,
    spec: &PortraitSpec,
    traces: &mut Vec<NamedTrajectory>,
) -> Value {
    let ql = job.ql.as_ref().unwrap();
    let field = match planar_subsystem(ql) {
        Ok(f) => f,
        Err(e) => return err_value(e),
    };
    let result = match portrait(
        &field,
        &PortraitOptions {
            window: (spec.window[0], spec.window[1], spec.window[2], spec.window[3]),
            seeds: spec.seeds,
            tol: job.tol,
            ..PortraitOptions::default()
        },
    ) {
        Ok(p) => p,
        Err(e) => return err_value(e),
    };
    let stationary: Vec<Value> = result
        .stationary
        .iter()
        .map(|s| {
            json!({
                "location": s.location,
                "eigenvalues": [
                    complex(s.eigenvalues[0].re, s.eigenvalues[0].im),
                    complex(s.eigenvalues[1].re, s.eigenvalues[1].im),
                ],
            })
        })
        .collect();
    let mut files = Vec::new();
    for (i, t) in result.trajectories.into_iter().enumerate() {
        let file = format!("portrait_{i}.csv");
        files.push(file.clone());
        traces.push(NamedTrajectory {
            file_name: file,
            trajectory: t,
        });
    }
    json!({
        "stationary": stationary,
        "trajectories": files.len(),
        "files": files,
        "coordinates": [format!("{:?}", field.vars[0]), format!("{:?}", field.vars[1])],
    })
}

fn estimate_value(est: &LimitEstimate) -> Value {
    json!({
        "value": est.value,
        "convergence": est.convergence,
        "converged": est.converged,
    })
}

/// Trace one family member of a critical resonance from just below the
/// estimation ladder outward, starting on the eta = 1 approximation of
/// the logarithmic profile.
fn resonant_member_trace(
    ivp: &SecondOrderIvp<f64>,
    k: u32,
    coeffs: &[f64],
    c_k: f64,
    delta: f64,
    side: f64,
    tol: f64,
) -> Result<Trajectory, crate::dynamics::DynamicsError> {
    let scale = ivp.y.abs().max(1.0);
    let x0 = side * 5e-6 * scale;
    let field = hat_field(&ivp.eq, k + 1)?;
    let mut coords = vec![ivp.y + x0];
    for (j, _) in coeffs.iter().enumerate() {
        // Taylor value of u^(j) at x0 from the shared chain
        let mut v = 0.0;
        let mut fact = 1.0;
        for (i, c) in coeffs[j..].iter().enumerate() {
            v += c * x0.powi(i as i32) / fact;
            fact *= (i + 1) as f64;
        }
        coords.push(v);
    }
    coords.push(c_k + (x0 / delta) * x0.abs().ln());
    let lo = (ivp.y - 1.5e-2 * scale).min(ivp.y + x0 * 2.0);
    let hi = (ivp.y + 1.5e-2 * scale).max(ivp.y + x0 * 2.0);
    integrate(
        &field,
        &JetPoint::new(coords),
        &IntegrateOptions {
            tmax: if delta > 0.0 { 10.0 } else { -10.0 },
            tol,
            x_window: Some((lo, hi)),
            ..IntegrateOptions::default()
        },
    )
}

fn run_limits(job: &ParsedJob, diag: Option<&IvpDiagnosis<f64>>) -> Value {
    let ivp = match make_ivp(job) {
        Ok(i) => i,
        Err(e) => return err_value(e),
    };
    let diag_owned;
    let diag = match diag {
        Some(d) => d,
        None => match ivp.diagnose(&DiagnoseOptions {
            kmax: job.kmax,
            tau_res: job.tau_res,
            ..DiagnoseOptions::default()
        }) {
            Ok(d) => {
                diag_owned = d;
                &diag_owned
            }
            Err(e) => return err_value(e),
        },
    };
    match diag.case {
        DiagnosisCase::PositiveProduct => {
            let k = diag.k.unwrap();
            let lam = match diag.limit {
                LimitDescriptor::PowerLaw(l) => l,
                _ => return err_value("missing power-law descriptor"),
            };
            let chain = match ivp.taylor_coefficients(k, job.tau_res) {
                Ok(c) => c.coeffs().to_vec(),
                Err(e) => return err_value(e),
            };
            let c_k = chain[k as usize];
            let opts = IntegrateOptions {
                tmax: 30.0,
                tol: job.tol,
                ..IntegrateOptions::default()
            };
            let mut out = serde_json::Map::new();
            out.insert("kind".into(), json!("PowerLaw"));
            out.insert("k".into(), json!(k));
            out.insert("exponent".into(), json!(lam));
            for side in [1i8, -1] {
                let key = format!("side{}", if side > 0 { "+" } else { "-" });
                let traced = shoot_manifold(&ivp, k + 1, side, 1e-6, &opts);
                let entry = match traced {
                    Ok(t) => {
                        let est = estimate_limit_powerlaw(&t, k, c_k, lam, ivp.y);
                        let holder = fit_holder_exponent(&t, k, c_k, ivp.y);
                        json!({
                            "limit": est.map(|e| estimate_value(&e)).unwrap_or_else(err_value),
                            "holder_exponent": holder.unwrap_or(f64::NAN),
                        })
                    }
                    Err(e) => err_value(e),
                };
                out.insert(key, entry);
            }
            Value::Object(out)
        }
        DiagnosisCase::CriticalResonance => {
            let k = diag.k.unwrap();
            if job.coords.len() < k as usize + 2 {
                return err_value(format!(
                    "resonant limit needs the u{k} coordinate of the initial point"
                ));
            }
            let c_k = job.coords[k as usize + 1];
            let coeffs = &diag.taylor[..k as usize];
            let mut out = serde_json::Map::new();
            out.insert("kind".into(), json!("LogExp"));
            out.insert("k".into(), json!(k));
            for side in [1.0, -1.0] {
                let key = format!("side{}", if side > 0.0 { "+" } else { "-" });
                let entry = match resonant_member_trace(
                    &ivp, k, coeffs, c_k, diag.delta, side, job.tol,
                ) {
                    Ok(t) => match estimate_limit_resonant(&t, k, c_k, diag.delta, ivp.y) {
                        Ok(e) => estimate_value(&e),
                        Err(e) => err_value(e),
                    },
                    Err(e) => err_value(e),
                };
                out.insert(key, entry);
            }
            Value::Object(out)
        }
        _ => json!({
            "skipped": format!(
                "no characterizing limit in the {:?} case",
                diag.case
            ),
        }),
    }
}

/// Executes a job.  Only a malformed description fails; task-level
/// problems become `error` entries in the corresponding result.
pub fn run(job: &JobSpec) -> Result<RunOutput, ValidationError> {
    let parsed = validate(job)?;
    let mut results = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut traces = Vec::new();

    if let Some(ql) = &parsed.ql {
        if ql.reduced_form_warning {
            warnings.push(
                "g and f share a nonconstant polynomial factor; the equation is not in reduced form"
                    .to_string(),
            );
        }
    }

    if job.tasks.classify {
        results.insert("classify".into(), run_classify(&parsed));
    }
    if job.tasks.fiber {
        results.insert("fiber".into(), run_fiber(&parsed));
    }
    let mut diagnosis: Option<IvpDiagnosis<f64>> = None;
    if job.tasks.diagnose || job.tasks.limits || job.tasks.trace.is_some() {
        if let Ok(ivp) = make_ivp(&parsed) {
            match ivp.diagnose(&DiagnoseOptions {
                kmax: parsed.kmax,
                tau_res: parsed.tau_res,
                ..DiagnoseOptions::default()
            }) {
                Ok(d) => diagnosis = Some(d),
                Err(e) => {
                    if job.tasks.diagnose {
                        results.insert("diagnose".into(), err_value(e));
                    }
                }
            }
        } else if job.tasks.diagnose {
            results.insert("diagnose".into(), err_value(make_ivp(&parsed).unwrap_err()));
        }
    }
    if let Some(d) = &diagnosis {
        if job.tasks.diagnose {
            results.insert("diagnose".into(), diagnosis_value(d));
        }
        if let Some(k) = d.near_resonance {
            warnings.push(format!(
                "gamma/delta is within the near-resonance band of the integer {k}; \
                 verdicts may be sensitive to tau_res"
            ));
        }
    }
    if let Some(n) = job.tasks.taylor {
        results.insert("taylor".into(), run_taylor(&parsed, n));
    }
    if let Some(spec) = &job.tasks.trace {
        let skip = diagnosis.as_ref().and_then(|d| {
            (d.case == DiagnosisCase::NoStrongSolution)
                .then_some("no strong solution exists at this point; nothing to trace")
        });
        results.insert(
            "trace".into(),
            run_trace(&parsed, spec, skip, &mut traces),
        );
    }
    if job.tasks.improper {
        results.insert("improper".into(), run_improper(&parsed));
    }
    if let Some(spec) = &job.tasks.portrait {
        results.insert("portrait".into(), run_portrait(&parsed, spec, &mut traces));
    }
    if job.tasks.limits {
        results.insert("limits".into(), run_limits(&parsed, diagnosis.as_ref()));
    }

    let report = Report {
        job: serde_json::to_value(job).expect("job serializes"),
        results,
        warnings,
    };
    Ok(RunOutput { report, traces })
}

// ---- serialization ----

/// `%.17g`-style rendering: 17 significant digits, trailing zeros
/// trimmed, positional form for moderate exponents.  A fraction part
/// is always kept so the value reparses as a float.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0.0".into()
        } else {
            "0.0".into()
        };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "null".into()
        } else if x > 0.0 {
            "1e999".into()
        } else {
            "-1e999".into()
        };
    }
    // shortest mantissa that reparses exactly (at most 17 digits)
    let mut sci = format!("{x:.16e}");
    for prec in 0..16usize {
        let s = format!("{x:.prec$e}");
        if s.parse::<f64>() == Ok(x) {
            sci = s;
            break;
        }
    }
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let neg = mant.starts_with('-');
    let all: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = all.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if (-4..17).contains(&exp) {
        if exp >= 0 {
            let ip = exp as usize + 1;
            if digits.len() > ip {
                out.push_str(&digits[..ip]);
                out.push('.');
                out.push_str(&digits[ip..]);
            } else {
                out.push_str(digits);
                out.push_str(&"0".repeat(ip - digits.len()));
                out.push_str(".0");
            }
        } else {
            out.push_str("0.");
            out.push_str(&"0".repeat((-exp - 1) as usize));
            out.push_str(digits);
        }
    } else {
        out.push_str(&digits[..1]);
        out.push('.');
        if digits.len() > 1 {
            out.push_str(&digits[1..]);
        } else {
            out.push('0');
        }
        let _ = write!(out, "e{exp}");
    }
    out
}

fn write_json(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    let pad1 = "  ".repeat(indent + 1);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Number(n) => {
            if let Some(f) = n.as_f64().filter(|_| n.is_f64()) {
                out.push_str(&fmt_g17(f));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => {
            let _ = write!(out, "{}", Value::String(s.clone()));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&pad1);
                write_json(item, indent + 1, out);
            }
            out.push('\n');
            out.push_str(&pad);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            // serde_json maps iterate in key order
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&pad1);
                let _ = write!(out, "{}: ", Value::String(k.clone()));
                write_json(item, indent + 1, out);
            }
            out.push('\n');
            out.push_str(&pad);
            out.push('}');
        }
    }
}

/// Deterministic JSON: keys sorted, floats rendered with `fmt_g17`.
pub fn to_json(report: &Report) -> String {
    let v = serde_json::to_value(report).expect("report serializes");
    let mut out = String::new();
    write_json(&v, 0, &mut out);
    out.push('\n');
    out
}

pub fn to_text(report: &Report) -> String {
    let mut out = String::new();
    if let Some(eq) = report.job.get("equation") {
        let _ = writeln!(out, "equation: {}", serde_json::to_string(eq).unwrap());
    }
    if let Some(p) = report.job.get("point") {
        let _ = writeln!(out, "point: {}", serde_json::to_string(p).unwrap());
    }
    for (task, value) in &report.results {
        match value.get("verdict").and_then(Value::as_str) {
            Some(v) => {
                let _ = writeln!(out, "[{task}] {v}");
            }
            None => {
                let _ = writeln!(out, "[{task}]");
            }
        }
        let mut body = String::new();
        write_json(value, 1, &mut body);
        let _ = writeln!(out, "  {body}");
    }
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

/// Writes the report (`report.json` or `report.txt`) and all
/// trajectory CSV files into `dir`; returns the paths written.
pub fn emit(output: &RunOutput, format: Format, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let (name, body) = match format {
        Format::Json => ("report.json", to_json(&output.report)),
        Format::Text => ("report.txt", to_text(&output.report)),
    };
    let path = dir.join(name);
    std::fs::File::create(&path)?.write_all(body.as_bytes())?;
    written.push(path);
    for trace in &output.traces {
        let path = dir.join(&trace.file_name);
        std::fs::File::create(&path)?.write_all(trajectory_csv(&trace.trajectory).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
