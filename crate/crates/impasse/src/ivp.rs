//! Existence/uniqueness/regularity diagnosis for singular initial value
//! problems `g(x) u'' = f(x, u, u')`, `u(y) = c0`, `u'(y) = c1` posed at
//! a simple zero of `g`.
//!
//! Everything is driven by the two numbers `delta = g'(y)` and
//! `gamma = f_{u'}(y, c0, c1)`.  The Taylor coefficients of a candidate
//! solution satisfy the linear recursion
//! `c_q = h_{q+1}(rho_{q-1}) / ((q-1) delta - gamma)`,
//! which breaks down exactly at a resonance `k delta = gamma`; the sign
//! of `delta * gamma` and the resonance parameter `A_k` then separate
//! the qualitatively different solution families.

use thiserror::Error;

use crate::classify::{classify_impasse, ImpasseClass, TAU_ON};
use crate::expr::{EvalError, Expr, JetPoint, Var};
use crate::jet::{compute_h, JetError, QuasiLinearEq};
use crate::scalar::Scalar;

/// Default relative tolerance of the resonance test on the float path.
pub const TAU_RES: f64 = 1e-9;

/// Relative distances to a resonance inside `(TAU_RES, NEAR_RES)` are
/// flagged as near-resonant but not treated as resonances.
pub const NEAR_RES: f64 = 1e-4;

/// Default cap on the resonance order search.
pub const KMAX_DEFAULT: u32 = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IvpError {
    #[error("y is not a zero of g (|g(y)| = {0:e})")]
    NotAZero(f64),
    #[error("y is not a simple zero of g (|g'(y)| = {0:e})")]
    NotSimpleZero(f64),
    #[error(transparent)]
    Shape(#[from] JetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("initial point is not a proper impasse point (f(y,c0,c1) != 0)")]
    ImproperPoint,
    #[error("resonance at order {0} below the requested prolongation order")]
    ResonanceBelow(u32),
}

/// A second-order singular initial value problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderIvp<T> {
    pub eq: QuasiLinearEq,
    pub y: T,
    pub c0: T,
    pub c1: T,
}

/// The two linearisation parameters at the initial point.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpasseParameters<T> {
    pub delta: T,
    pub gamma: T,
    /// True when `f` also vanishes at the initial point.
    pub proper: bool,
}

/// Result of the resonance scan over integer orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResonanceScan {
    /// Smallest k in `[1, kmax]` with `k delta = gamma`.
    pub k: Option<u32>,
    /// Order whose residual fell inside the near-resonance band.
    pub near: Option<u32>,
}

/// Outcome of the Taylor recursion.
#[derive(Debug, Clone, PartialEq)]
pub enum TaylorChain<T> {
    /// Coefficients `c_0 ... c_n` (derivative values, not divided by
    /// factorials).
    Complete(Vec<T>),
    /// The recursion divided by zero at order `k + 1`; `coeffs` holds
    /// `c_0 ... c_k`.
    Halted { k: u32, coeffs: Vec<T> },
}

impl<T: Clone> TaylorChain<T> {
    pub fn coeffs(&self) -> &[T] {
        match self {
            TaylorChain::Complete(c) => c,
            TaylorChain::Halted { coeffs, .. } => coeffs,
        }
    }
}

/// Kind of a detected resonance, separated by the resonance parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonanceKind {
    /// `A_k = 0`: the obstruction vanishes.
    Smooth,
    /// `A_k != 0`: logarithmic terms are unavoidable.
    Critical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceInfo<T> {
    pub k: u32,
    pub a_k: T,
    pub kind: ResonanceKind,
}

/// Spectrum of the linearised prolonged field at order `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianSpectrum<T> {
    /// All eigenvalues: `delta, 0, gamma, gamma - delta, ...,
    /// gamma - (q-2) delta`.
    pub full: Vec<T>,
    /// The three eigenvalues that control the local analysis:
    /// `delta, 0, gamma - (q-2) delta`.
    pub relevant: [T; 3],
    /// Eigenvector of `delta`: `(1, c1, ..., c_{q-1}, c_q)`; absent at
    /// a resonance `gamma = (q-1) delta`.
    pub delta_eigenvector: Option<Vec<T>>,
}

/// Which theorem applies to the initial value problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosisCase {
    /// `f(y,c0,c1) != 0`: not even a weak geometric solution exists.
    NoStrongSolution,
    /// `gamma = 0`: unique two-sided smooth solution.
    GammaZero,
    /// Resonance with `A_k = 0`: one-parameter smooth family.
    SmoothResonance,
    /// Resonance with `A_k != 0`: one-parameter family in
    /// `C^k` but not `C^{k+1}`.
    CriticalResonance,
    /// `delta gamma < 0`: unique two-sided smooth solution.
    NegativeProduct,
    /// `delta gamma > 0`, no resonance: one-parameter family with one
    /// smooth member.
    PositiveProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionCount {
    One,
    OneParameter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularity {
    Smooth,
    /// Members are `C^k` but not `C^{k+1}`.
    CkNotCk1(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFamily {
    pub count: SolutionCount,
    /// All solutions described here extend to both sides of `y`.
    pub two_sided: bool,
    pub regularity: Regularity,
}

/// How the second derivative behaves as `x -> y` along the non-smooth
/// family members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitDescriptor {
    None,
    /// `u^{(k)}(x) - u^{(k)}(y) ~ C |x-y|^lambda` with the given lambda.
    PowerLaw(f64),
    /// `u'' ~ C x^{delta-ish} log x` type blow-up driven by `delta`.
    LogExp(f64),
}

/// The complete verdict for one initial value problem.
#[derive(Debug, Clone, PartialEq)]
pub struct IvpDiagnosis<T> {
    pub case: DiagnosisCase,
    pub delta: T,
    pub gamma: T,
    pub k: Option<u32>,
    pub resonance_parameter: Option<T>,
    /// Taylor chain `c_0 ... c_n` shared by all family members (partial
    /// up to the resonance order when one occurs).
    pub taylor: Vec<T>,
    pub family: Option<SolutionFamily>,
    pub limit: LimitDescriptor,
    pub near_resonance: Option<u32>,
    pub notes: Vec<String>,
}

/// Knobs of [`SecondOrderIvp::diagnose`].
#[derive(Debug, Clone, Copy)]
pub struct DiagnoseOptions {
    pub kmax: u32,
    pub tau_res: f64,
    /// Depth of the reported Taylor chain in the non-resonant cases.
    pub taylor_n: u32,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions {
            kmax: KMAX_DEFAULT,
            tau_res: TAU_RES,
            taylor_n: 8,
        }
    }
}

fn rel_zero<T: Scalar>(value: &T, scale: f64, tau: f64) -> bool {
    if T::EXACT {
        value.is_zero()
    } else {
        value.to_f64().abs() <= tau * scale.max(1.0)
    }
}

/// Scans for the smallest resonance order `k delta = gamma` in
/// `[1, kmax]`.  Exact scalars are decided exactly; floats use the
/// relative tolerance `tau_res`, and orders within the band
/// `(tau_res, NEAR_RES)` are reported in `near`.
pub fn detect_resonance<T: Scalar>(
    delta: &T,
    gamma: &T,
    kmax: u32,
    tau_res: f64,
) -> ResonanceScan {
    assert!(!delta.is_zero(), "delta must be nonzero (simple zero of g)");
    if let (Some(d), Some(g)) = (delta.to_rational(), gamma.to_rational()) {
        let ratio = g / d;
        let mut k = None;
        if ratio.is_integer() {
            use num::ToPrimitive;
            if let Some(n) = ratio.numer().to_i64() {
                if n >= 1 && n <= kmax as i64 {
                    k = Some(n as u32);
                }
            }
        }
        return ResonanceScan { k, near: None };
    }
    let (d, g) = (delta.to_f64(), gamma.to_f64());
    let scale = 1.0f64.max(d.abs()).max(g.abs());
    let mut near = None;
    for k in 1..=kmax {
        let rel = (g - k as f64 * d).abs() / scale;
        if rel <= tau_res {
            return ResonanceScan { k: Some(k), near };
        }
        if near.is_none() && rel < NEAR_RES * d.abs() / scale {
            near = Some(k);
        }
    }
    ResonanceScan { k: None, near }
}

impl<T: Scalar> SecondOrderIvp<T> {
    /// Validates the shape (`g` in `x` only, `f` of order at most one)
    /// and the simple-zero condition at `y`.
    pub fn new(g: Expr, f: Expr, y: T, c0: T, c1: T) -> Result<SecondOrderIvp<T>, IvpError> {
        let eq = QuasiLinearEq::new(g, f, 2)?;
        if eq.g.vars().iter().any(|v| *v != Var::X) {
            return Err(JetError::UnsupportedShape("g must depend on x only".into()).into());
        }
        let ivp = SecondOrderIvp { eq, y, c0, c1 };
        ivp.impasse_parameters_at_tolerance(TAU_ON)?;
        Ok(ivp)
    }

    /// The first-order jet point `(y, c0, c1)`.
    pub fn rho1(&self) -> JetPoint<T> {
        JetPoint::new(vec![self.y.clone(), self.c0.clone(), self.c1.clone()])
    }

    fn point_scale(&self) -> f64 {
        [&self.y, &self.c0, &self.c1]
            .iter()
            .fold(1.0f64, |m, c| m.max(c.to_f64().abs()))
    }

    fn impasse_parameters_at_tolerance(
        &self,
        tau_on: f64,
    ) -> Result<ImpasseParameters<T>, IvpError> {
        let rho1 = self.rho1();
        let scale = self.point_scale();
        let g_val = self.eq.g.eval(&rho1)?;
        if !rel_zero(&g_val, scale, tau_on) {
            return Err(IvpError::NotAZero(g_val.to_f64().abs()));
        }
        let delta = self.eq.g.diff(Var::X).eval(&rho1)?;
        if rel_zero(&delta, scale, tau_on) {
            return Err(IvpError::NotSimpleZero(delta.to_f64().abs()));
        }
        let gamma = self.eq.f.diff(Var::U(1)).eval(&rho1)?;
        let f_val = self.eq.f.eval(&rho1)?;
        Ok(ImpasseParameters {
            delta,
            gamma,
            proper: rel_zero(&f_val, scale, tau_on),
        })
    }

    /// `delta = g'(y)`, `gamma = f_{u'}(y, c0, c1)` and whether the
    /// initial point is a proper impasse point.
    pub fn impasse_parameters(&self) -> Result<ImpasseParameters<T>, IvpError> {
        self.impasse_parameters_at_tolerance(TAU_ON)
    }

    fn jet_point(&self, coeffs: &[T]) -> JetPoint<T> {
        let mut coords = vec![self.y.clone()];
        coords.extend(coeffs.iter().cloned());
        JetPoint::new(coords)
    }

    /// Runs the Taylor recursion up to `c_n`.  Each step divides by
    /// `(q-1) delta - gamma`; when that divisor vanishes the chain
    /// halts and the resonance order is reported instead.
    pub fn taylor_coefficients(&self, n: u32, tau_res: f64) -> Result<TaylorChain<T>, IvpError> {
        let params = self.impasse_parameters()?;
        if !params.proper {
            return Err(IvpError::ImproperPoint);
        }
        let (delta, gamma) = (params.delta, params.gamma);
        let scale = 1.0f64
            .max(delta.to_f64().abs())
            .max(gamma.to_f64().abs());
        let mut coeffs = vec![self.c0.clone(), self.c1.clone()];
        for q in 2..=n {
            let divisor = T::from_int(q as i64 - 1) * delta.clone() - gamma.clone();
            if rel_zero(&divisor, scale * q as f64, tau_res) {
                return Ok(TaylorChain::Halted {
                    k: q - 1,
                    coeffs,
                });
            }
            let h = compute_h(&self.eq, q + 1)?;
            let num = h.eval(&self.jet_point(&coeffs))?;
            coeffs.push(num / divisor);
        }
        Ok(TaylorChain::Complete(coeffs))
    }

    /// Resonance parameter `A_k = h_{k+2}(rho_k)` along the unique
    /// chain below the resonance order.
    pub fn resonance_parameter(&self, k: u32, tau_res: f64) -> Result<ResonanceInfo<T>, IvpError> {
        let chain = self.taylor_coefficients(k, tau_res)?;
        let coeffs = match chain {
            TaylorChain::Complete(c) => c,
            TaylorChain::Halted { k: kk, .. } => return Err(IvpError::ResonanceBelow(kk)),
        };
        let h = compute_h(&self.eq, k + 2)?;
        let a_k = h.eval(&self.jet_point(&coeffs))?;
        let kind = if a_k.is_zero_tol(TAU_ON) {
            ResonanceKind::Smooth
        } else {
            ResonanceKind::Critical
        };
        Ok(ResonanceInfo { k, a_k, kind })
    }

    /// Eigenvalues of the linearised order-(q-1) prolonged field at the
    /// lifted initial point, with the transversal eigenvector.
    pub fn jacobian_spectrum(&self, q: u32, tau_res: f64) -> Result<JacobianSpectrum<T>, IvpError> {
        assert!(q >= 2);
        let params = self.impasse_parameters()?;
        let (delta, gamma) = (params.delta, params.gamma);
        let chain = self.taylor_coefficients(q - 1, tau_res)?;
        let coeffs = match chain {
            TaylorChain::Complete(c) => c,
            TaylorChain::Halted { k, .. } => return Err(IvpError::ResonanceBelow(k)),
        };
        let mut full = vec![delta.clone(), T::zero()];
        for j in 0..=(q - 2) {
            full.push(gamma.clone() - T::from_int(j as i64) * delta.clone());
        }
        let relevant = [
            delta.clone(),
            T::zero(),
            gamma.clone() - T::from_int(q as i64 - 2) * delta.clone(),
        ];
        let divisor = gamma.clone() - T::from_int(q as i64 - 1) * delta.clone();
        let scale = 1.0f64
            .max(delta.to_f64().abs())
            .max(gamma.to_f64().abs());
        let delta_eigenvector = if rel_zero(&divisor, scale * q as f64, tau_res) {
            None
        } else {
            let h = compute_h(&self.eq, q + 1)?;
            let num = h.eval(&self.jet_point(&coeffs))?;
            let mut v = vec![T::one()];
            v.extend(coeffs.iter().skip(1).cloned());
            v.push(-(num / divisor));
            Some(v)
        };
        Ok(JacobianSpectrum {
            full,
            relevant,
            delta_eigenvector,
        })
    }

    /// Matches `f` against the model `d * u1^m` of the gamma-zero
    /// sub-case analysis.
    fn gamma_zero_model(&self) -> Option<(f64, u32)> {
        fn split(e: &Expr) -> Option<(f64, u32)> {
            match e {
                Expr::Pow(b, r) => {
                    if **b == Expr::u(1) && r.is_integer() {
                        use num::ToPrimitive;
                        let m = r.numer().to_u32()?;
                        if m >= 2 {
                            return Some((1.0, m));
                        }
                    }
                    None
                }
                Expr::Neg(a) => split(a).map(|(d, m)| (-d, m)),
                Expr::Mul(a, b) => {
                    if let Expr::Const(c) = &**a {
                        let inner = split(b)?;
                        let cf = crate::scalar::Scalar::to_f64(c);
                        return Some((cf * inner.0, inner.1));
                    }
                    None
                }
                _ => None,
            }
        }
        split(&self.eq.f.simplify())
    }

    /// Full diagnosis: decides which of the six cases applies and
    /// assembles the solution-family description.
    pub fn diagnose(&self, opts: &DiagnoseOptions) -> Result<IvpDiagnosis<T>, IvpError> {
        let params = self.impasse_parameters()?;
        let (delta, gamma) = (params.delta.clone(), params.gamma.clone());
        let mut notes = Vec::new();

        if !params.proper {
            let rho1 = self.rho1();
            let impasse = classify_impasse(&self.eq, &rho1, TAU_ON)
                .map_err(|_| IvpError::ImproperPoint)?;
            debug_assert_eq!(impasse, ImpasseClass::ImproperImpasse);
            notes.push(
                "the fibre over the initial point contains no point of the equation, \
                 hence no irregular singularity: the obstruction is genuinely quasi-linear"
                    .to_string(),
            );
            return Ok(IvpDiagnosis {
                case: DiagnosisCase::NoStrongSolution,
                delta,
                gamma,
                k: None,
                resonance_parameter: None,
                taylor: vec![self.c0.clone(), self.c1.clone()],
                family: None,
                limit: LimitDescriptor::None,
                near_resonance: None,
                notes,
            });
        }

        let scale = 1.0f64.max(delta.to_f64()).max(gamma.to_f64().abs());
        if rel_zero(&gamma, scale, opts.tau_res) {
            let taylor = match self.taylor_coefficients(opts.taylor_n, opts.tau_res)? {
                TaylorChain::Complete(c) => c,
                TaylorChain::Halted { coeffs, .. } => coeffs,
            };
            match self.gamma_zero_model() {
                Some((d, m)) => {
                    if m % 2 == 1 && d < 0.0 {
                        notes.push(format!(
                            "model d*u'^m with m = {m} odd and d < 0: \
                             no further one-sided solutions exist"
                        ));
                    } else if m % 2 == 1 {
                        notes.push(format!(
                            "model d*u'^m with m = {m} odd and d > 0: infinitely many \
                             additional one-sided solutions with a turning point at y, \
                             none twice differentiable there"
                        ));
                    } else {
                        notes.push(format!(
                            "model d*u'^m with m = {m} even (saddle node): infinitely \
                             many additional one-sided solutions"
                        ));
                    }
                }
                None => notes.push(
                    "existence of further one-sided solutions is undetermined by the \
                     theory; see the phase-portrait analysis in the dynamics module"
                        .to_string(),
                ),
            }
            return Ok(IvpDiagnosis {
                case: DiagnosisCase::GammaZero,
                delta,
                gamma,
                k: None,
                resonance_parameter: None,
                taylor,
                family: Some(SolutionFamily {
                    count: SolutionCount::One,
                    two_sided: true,
                    regularity: Regularity::Smooth,
                }),
                limit: LimitDescriptor::None,
                near_resonance: None,
                notes,
            });
        }

        let scan = detect_resonance(&delta, &gamma, opts.kmax, opts.tau_res);
        if let Some(near) = scan.near {
            notes.push(format!(
                "near-resonance at order {near}: the Taylor recursion divides by a \
                 small number there; coefficients beyond that order are ill-conditioned"
            ));
        }
        if let Some(k) = scan.k {
            let info = self.resonance_parameter(k, opts.tau_res)?;
            let taylor = match self.taylor_coefficients(opts.taylor_n, opts.tau_res)? {
                TaylorChain::Complete(c) => c,
                TaylorChain::Halted { coeffs, .. } => coeffs,
            };
            let (case, regularity, limit) = match info.kind {
                ResonanceKind::Smooth => {
                    notes.push(format!(
                        "family parameterised by the value of the derivative of order {}",
                        k + 1
                    ));
                    (
                        DiagnosisCase::SmoothResonance,
                        Regularity::Smooth,
                        LimitDescriptor::None,
                    )
                }
                ResonanceKind::Critical => (
                    DiagnosisCase::CriticalResonance,
                    Regularity::CkNotCk1(k),
                    LimitDescriptor::LogExp(delta.to_f64()),
                ),
            };
            return Ok(IvpDiagnosis {
                case,
                delta,
                gamma,
                k: Some(k),
                resonance_parameter: Some(info.a_k),
                taylor,
                family: Some(SolutionFamily {
                    count: SolutionCount::OneParameter,
                    two_sided: true,
                    regularity,
                }),
                limit,
                near_resonance: scan.near,
                notes,
            });
        }

        let taylor = match self.taylor_coefficients(opts.taylor_n, opts.tau_res)? {
            TaylorChain::Complete(c) => c,
            TaylorChain::Halted { coeffs, .. } => coeffs,
        };
        let product = delta.to_f64() * gamma.to_f64();
        if product < 0.0 {
            notes.push("no additional one-sided solutions exist".to_string());
            Ok(IvpDiagnosis {
                case: DiagnosisCase::NegativeProduct,
                delta,
                gamma,
                k: None,
                resonance_parameter: None,
                taylor,
                family: Some(SolutionFamily {
                    count: SolutionCount::One,
                    two_sided: true,
                    regularity: Regularity::Smooth,
                }),
                limit: LimitDescriptor::None,
                near_resonance: scan.near,
                notes,
            })
        } else {
            let ratio = gamma.to_f64() / delta.to_f64();
            let k = ratio.ceil() as u32;
            let lambda = (gamma.to_f64() - (k as f64 - 1.0) * delta.to_f64()) / delta.to_f64();
            notes.push(format!(
                "exactly one family member is smooth; all others are C^{k} but not C^{}; \
                 the Taylor polynomial is shared through degree {k}",
                k + 1
            ));
            Ok(IvpDiagnosis {
                case: DiagnosisCase::PositiveProduct,
                delta,
                gamma,
                k: Some(k),
                resonance_parameter: None,
                taylor,
                family: Some(SolutionFamily {
                    count: SolutionCount::OneParameter,
                    two_sided: true,
                    regularity: Regularity::CkNotCk1(k),
                }),
                limit: LimitDescriptor::PowerLaw(lambda),
                near_resonance: scan.near,
                notes,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use num::rational::BigRational;
    use num::BigInt;

    fn ivp(g: &str, f: &str, y: f64, c0: f64, c1: f64) -> SecondOrderIvp<f64> {
        SecondOrderIvp::new(parse(g).unwrap(), parse(f).unwrap(), y, c0, c1).unwrap()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parameters_of_dichotomy_example() {
        let p = ivp("x", "u1^2+x-1/4", 0.0, 0.3, -0.5)
            .impasse_parameters()
            .unwrap();
        assert_eq!((p.delta, p.gamma, p.proper), (1.0, -1.0, true));
        let p = ivp("x", "u1^2+x-1/4", 0.0, 0.3, 0.5)
            .impasse_parameters()
            .unwrap();
        assert_eq!((p.delta, p.gamma, p.proper), (1.0, 1.0, true));
        let p = ivp("x", "u1^2+x-1/4", 0.0, 0.3, 0.0)
            .impasse_parameters()
            .unwrap();
        assert_eq!((p.delta, p.gamma, p.proper), (1.0, 0.0, false));
    }

    #[test]
    fn zero_validation() {
        let err = SecondOrderIvp::new(
            parse("x").unwrap(),
            parse("u1").unwrap(),
            1.0,
            0.0,
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, IvpError::NotAZero(_)));
        let err = SecondOrderIvp::new(
            parse("x^2").unwrap(),
            parse("u1").unwrap(),
            0.0,
            0.0,
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, IvpError::NotSimpleZero(_)));
    }

    #[test]
    fn resonance_scan() {
        assert_eq!(detect_resonance(&1.0, &1.0, 20, TAU_RES).k, Some(1));
        assert_eq!(detect_resonance(&1.0, &-1.0, 20, TAU_RES).k, None);
        // family g=x, f=(a u')^2 + x - b^2 with a=1 resonates at k iff b = k/2
        let (a, b) = (1.0, 1.5);
        let gamma = 2.0 * a * a * (b / a);
        assert_eq!(detect_resonance(&1.0, &gamma, 20, TAU_RES).k, Some(3));
        // exact path is decided exactly
        assert_eq!(
            detect_resonance(&rat(2, 3), &rat(10, 3), 20, TAU_RES).k,
            Some(5)
        );
        assert_eq!(detect_resonance(&rat(2, 3), &rat(1, 3), 20, TAU_RES).k, None);
        // near-resonance is flagged but not treated as resonance
        let scan = detect_resonance(&1.0, &(2.0 + 1e-6), 20, TAU_RES);
        assert_eq!(scan.k, None);
        assert_eq!(scan.near, Some(2));
    }

    #[test]
    fn taylor_chain_of_dichotomy_example() {
        let p = ivp("x", "u1^2+x-1/4", 0.0, 0.0, -0.5);
        let chain = p.taylor_coefficients(3, TAU_RES).unwrap();
        let c = match chain {
            TaylorChain::Complete(c) => c,
            _ => panic!("unexpected halt"),
        };
        assert!((c[2] - 0.5).abs() < 1e-12);
        assert!((c[3] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn taylor_chain_exact() {
        let p = SecondOrderIvp::new(
            parse("x").unwrap(),
            parse("u1^2+x-1/4").unwrap(),
            rat(0, 1),
            rat(0, 1),
            rat(-1, 2),
        )
        .unwrap();
        let chain = p.taylor_coefficients(4, TAU_RES).unwrap();
        let c = chain.coeffs();
        assert_eq!(c[2], rat(1, 2));
        assert_eq!(c[3], rat(1, 6));
    }

    #[test]
    fn taylor_smooth_member_of_power_law_family() {
        // x u'' = (3/2) u' + x has the solutions u' = C x^(3/2) - 2x
        let p = ivp("x", "(3/2)*u1+x", 0.0, 0.0, 0.0);
        let chain = p.taylor_coefficients(2, TAU_RES).unwrap();
        assert!((chain.coeffs()[2] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn taylor_halts_at_resonance() {
        let p = ivp("x", "u1", 0.0, 0.7, 0.0);
        match p.taylor_coefficients(5, TAU_RES).unwrap() {
            TaylorChain::Halted { k, coeffs } => {
                assert_eq!(k, 1);
                assert_eq!(coeffs, vec![0.7, 0.0]);
            }
            _ => panic!("expected halt"),
        }
    }

    #[test]
    fn resonance_parameters() {
        let p = ivp("x", "u1^2+x-1/4", 0.0, 0.3, 0.5);
        let info = p.resonance_parameter(1, TAU_RES).unwrap();
        assert_eq!(info.a_k, 1.0);
        assert_eq!(info.kind, ResonanceKind::Critical);

        let p = ivp("x", "u1", 0.0, 0.3, 0.0);
        let info = p.resonance_parameter(1, TAU_RES).unwrap();
        assert_eq!(info.a_k, 0.0);
        assert_eq!(info.kind, ResonanceKind::Smooth);

        // f = (a u')^2 + x - b^2 with b = a/2: A_1 = f_x = 1 for any a
        let a = 1.3;
        let f = format!("({a}*u1)^2 + x - {}", (a / 2.0) * (a / 2.0));
        let p = ivp("x", &f, 0.0, 0.0, 0.5 / 1.0);
        // c1 = b/a = 1/2
        let info = p.resonance_parameter(1, TAU_RES).unwrap();
        assert!((info.a_k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_of_prolonged_fields() {
        let p = ivp("x", "u1^2+x-1/4", 0.0, 0.0, -0.5);
        let s = p.jacobian_spectrum(2, TAU_RES).unwrap();
        assert_eq!(s.relevant, [1.0, 0.0, -1.0]);
        let s = p.jacobian_spectrum(3, TAU_RES).unwrap();
        assert_eq!(s.relevant, [1.0, 0.0, -2.0]);
        let v = s.delta_eigenvector.unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], -0.5);
        assert!((v[2] - 0.5).abs() < 1e-12);
        assert!((v[3] - 1.0 / 6.0).abs() < 1e-12);

        let p = ivp("x", "(3/2)*u1+x", 0.0, 0.0, 0.0);
        let s = p.jacobian_spectrum(2, TAU_RES).unwrap();
        assert_eq!(s.relevant, [1.0, 0.0, 1.5]);
    }

    #[test]
    fn eigenvector_last_component_equals_next_taylor_coefficient() {
        let p = ivp("x", "u1^2+x-1/4", 0.0, 0.4, -0.5);
        for q in 2..=6u32 {
            let s = p.jacobian_spectrum(q, TAU_RES).unwrap();
            let v = s.delta_eigenvector.unwrap();
            let c = match p.taylor_coefficients(q, TAU_RES).unwrap() {
                TaylorChain::Complete(c) => c,
                _ => panic!(),
            };
            assert!(
                (v.last().unwrap() - c[q as usize]).abs() < 1e-12,
                "mismatch at order {q}"
            );
        }
    }

    #[test]
    fn spectrum_recurrence() {
        let p = ivp("x", "u1^2+x-1/4", 0.0, 0.0, -0.5);
        let mut prev = p.jacobian_spectrum(2, TAU_RES).unwrap().relevant[2];
        for q in 3..=6u32 {
            let cur = p.jacobian_spectrum(q, TAU_RES).unwrap().relevant[2];
            assert!((cur - (prev - 1.0)).abs() < 1e-12);
            prev = cur;
        }
    }

    #[test]
    fn rescaling_covariance() {
        // x -> alpha x shrinks both parameters by alpha and keeps k
        let alpha = 3.0f64;
        let sub = Expr::mul(parse("3").unwrap(), Expr::x());
        let g = parse("x").unwrap().substitute(Var::X, &sub);
        let f = parse("u1^2+x-1/4").unwrap().substitute(Var::X, &sub);
        let base = ivp("x", "u1^2+x-1/4", 0.0, 0.0, 0.5)
            .impasse_parameters()
            .unwrap();
        let scaled = SecondOrderIvp::new(g, f, 0.0, 0.0, 0.5).unwrap();
        let ps = scaled.impasse_parameters().unwrap();
        assert!((ps.delta - base.delta * alpha).abs() < 1e-12);
        // gamma is unchanged by the substitution (f_{u'} has no x), so
        // the ratio gamma/delta scales by 1/alpha; k detection follows
        // the exact ratio
        let k0 = detect_resonance(&base.delta, &base.gamma, 20, TAU_RES).k;
        let k1 = detect_resonance(&(base.delta / alpha), &(base.gamma / alpha), 20, TAU_RES).k;
        assert_eq!(k0, k1);
        assert!((ps.gamma - base.gamma).abs() < 1e-12);
    }

    #[test]
    fn residual_order_of_taylor_polynomial() {
        let p = ivp("x", "u1^2+x-1/4", 0.0, 0.0, -0.5);
        let n = 6u32;
        let c = match p.taylor_coefficients(n, TAU_RES).unwrap() {
            TaylorChain::Complete(c) => c,
            _ => panic!(),
        };
        let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
        let eval_u = |x: f64, d: usize| -> f64 {
            // d-th derivative of the Taylor polynomial
            c.iter()
                .enumerate()
                .skip(d)
                .map(|(q, cq)| cq / fact(q - d) * x.powi((q - d) as i32))
                .sum()
        };
        let mut pts = Vec::new();
        for j in 1..=6 {
            let x = 2.0f64.powi(-j);
            let res = (x * eval_u(x, 2) - (eval_u(x, 1).powi(2) + x - 0.25)).abs();
            pts.push((x.ln(), res.max(1e-300).ln()));
        }
        // log-log slope of the residual must be at least n-1
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        assert!(slope >= n as f64 - 1.0 - 0.1, "slope {slope}");
    }

    #[test]
    fn diagnose_all_cases() {
        let d = ivp("x", "u1^2+x-1/4", 0.0, 0.0, -0.5)
            .diagnose(&DiagnoseOptions::default())
            .unwrap();
        assert_eq!(d.case, DiagnosisCase::NegativeProduct);
        assert_eq!(d.family.as_ref().unwrap().count, SolutionCount::One);

        let d = ivp("x", "u1^2+x-1/4", 0.0, 0.0, 0.5)
            .diagnose(&DiagnoseOptions::default())
            .unwrap();
        assert_eq!(d.case, DiagnosisCase::CriticalResonance);
        assert_eq!(d.k, Some(1));
        assert_eq!(d.resonance_parameter, Some(1.0));
        assert!(matches!(d.limit, LimitDescriptor::LogExp(dl) if dl == 1.0));

        let d = ivp("x", "u1", 0.0, 0.7, 0.0)
            .diagnose(&DiagnoseOptions::default())
            .unwrap();
        assert_eq!(d.case, DiagnosisCase::SmoothResonance);
        assert_eq!(d.k, Some(1));
        assert_eq!(d.resonance_parameter, Some(0.0));

        let d = ivp("x", "(3/2)*u1+x", 0.0, 0.0, 0.0)
            .diagnose(&DiagnoseOptions::default())
            .unwrap();
        assert_eq!(d.case, DiagnosisCase::PositiveProduct);
        assert_eq!(d.k, Some(2));
        assert!(matches!(d.limit, LimitDescriptor::PowerLaw(l) if (l - 0.5).abs() < 1e-12));

        let d = ivp("x", "-2*u1^3", 0.0, 0.4, 0.0)
            .diagnose(&DiagnoseOptions::default())
            .unwrap();
        assert_eq!(d.case, DiagnosisCase::GammaZero);
        assert!(d.notes.iter().any(|n| n.contains("d < 0")));

        let d = ivp("x", "u1^2+x-1/4", 0.0, 0.0, 0.0)
            .diagnose(&DiagnoseOptions::default())
            .unwrap();
        assert_eq!(d.case, DiagnosisCase::NoStrongSolution);
    }

    #[test]
    fn diagnosis_cases_partition() {
        // exactly one case fires over a (delta, gamma) grid including
        // the resonance boundary; realised via g = delta x, f = gamma u1
        // shifted to be proper
        for delta in [-2.0, -0.5, 1.0, 3.0] {
            for gamma in [-3.0, -1.0, 0.0, 0.5, 1.0, 2.0, 6.0] {
                let g = format!("{delta}*x");
                let f = format!("{gamma}*u1 + x^2");
                let p = ivp(&g, &f, 0.0, 0.2, 0.0);
                let d = p.diagnose(&DiagnoseOptions::default()).unwrap();
                let expect = if gamma == 0.0 {
                    DiagnosisCase::GammaZero
                } else if (gamma / delta) >= 1.0 && f64::fract(gamma / delta) == 0.0 {
                    // resonance; kind depends on A_k
                    d.case
                } else if delta * gamma < 0.0 {
                    DiagnosisCase::NegativeProduct
                } else {
                    DiagnosisCase::PositiveProduct
                };
                assert_eq!(d.case, expect, "delta={delta} gamma={gamma}");
                if matches!(
                    d.case,
                    DiagnosisCase::SmoothResonance | DiagnosisCase::CriticalResonance
                ) {
                    assert_eq!(
                        d.k,
                        Some((gamma / delta) as u32),
                        "delta={delta} gamma={gamma}"
                    );
                }
            }
        }
    }
}
