//! Point and impasse taxonomy.
//!
//! An implicit equation `F = 0` is stratified by the pair
//! `(C F, F_{u_q})` evaluated at a point: both directional derivatives
//! of the contact distribution restricted to the equation.  For
//! quasi-linear equations the distribution projects to a vector field
//! `Y` one order down, whose zeros are the proper impasse points; the
//! fiber over a proper impasse point carries at most two irregular
//! singularities, found by a quadratic.

use num::complex::Complex64;
use num::rational::BigRational;
use thiserror::Error;

use crate::expr::{EvalError, Expr, JetPoint, Var};
use crate::jet::{contact_trans, contact_vert, ImplicitEq, QuasiLinearEq};
use crate::linalg::{eigenvalues, eigenvector, Matrix};
use crate::scalar::Scalar;

/// Default absolute tolerance for on-equation and vanishing tests on
/// the floating-point path; scaled by the magnitude of the point.
pub const TAU_ON: f64 = 1e-9;

/// Default tolerance of the eigenvector tangency test.
pub const TAU_TANGENT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("point does not lie on the equation (residual {residual:e})")]
    NotOnEquation { residual: f64 },
    #[error("point is not a proper impasse point")]
    NotProperImpasse,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Classification of a point on an implicit equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    /// The contact direction is transversal to the fibration here.
    RegularPoint,
    /// Vertical contact direction: `F_{u_q} = 0` but `C F != 0`.
    RegularSingular,
    /// Both directional derivatives vanish.
    IrregularSingular,
}

/// Classification of a base point of a quasi-linear equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImpasseClass {
    /// `g != 0`: the projected field is transversal to the fibre.
    Regular,
    /// `g = 0`, `f != 0`: the projected field is vertical but nonzero.
    ImproperImpasse,
    /// `g = f = 0`: the projected field vanishes.
    ProperImpasse,
}

/// The four generic shapes of the fiber over a proper impasse point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiberCase {
    /// Quadratic with non-negative discriminant: two (possibly equal)
    /// real irregular singularities in the fiber.
    TwoIrregular,
    /// Quadratic with negative discriminant: a complex pair only.
    NoRealIrregular,
    /// Degenerate to a linear equation: exactly one.
    OneIrregular,
    /// Inconsistent linear equation: none (third genericity failure).
    NoneGenericity3,
    /// Identically satisfied: the whole fiber is irregular.
    WholeFiberIrregular,
}

/// Solutions of the fiber quadratic for the top coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum FiberRoots {
    RealPair(f64, f64),
    ComplexPair { re: f64, im: f64 },
    Single(f64),
    None,
    WholeFiber,
}

/// Full outcome of the fiber analysis at a proper impasse point.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberAnalysis {
    pub case: FiberCase,
    /// Discriminant of the fiber quadratic; present in the quadratic case.
    pub discriminant: Option<f64>,
    pub roots: FiberRoots,
}

/// A polynomial vector field written in jet coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSpec {
    pub vars: Vec<Var>,
    pub components: Vec<Expr>,
}

impl VectorFieldSpec {
    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn eval_at<T: Scalar>(&self, p: &JetPoint<T>) -> Result<Vec<T>, EvalError> {
        self.components.iter().map(|c| c.eval(p)).collect()
    }

    /// Applies the field to a scalar expression (directional derivative).
    pub fn apply(&self, e: &Expr) -> Expr {
        let mut out = Expr::int(0);
        for (v, comp) in self.vars.iter().zip(&self.components) {
            out = Expr::add(out, Expr::mul(comp.clone(), e.diff(*v)));
        }
        out.simplify()
    }

    /// Dense Jacobian matrix of the components at `p`.
    pub fn jacobian<T: Scalar>(&self, p: &JetPoint<T>) -> Result<Matrix<T>, EvalError> {
        let rows = self
            .components
            .iter()
            .map(|c| {
                self.vars
                    .iter()
                    .map(|v| c.diff(*v).eval(p))
                    .collect::<Result<Vec<T>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Matrix::from_rows(rows))
    }
}

fn jet_vars(order: u32) -> Vec<Var> {
    let mut vars = vec![Var::X];
    vars.extend((0..=order).map(Var::U));
    vars
}

fn point_scale<T: Scalar>(p: &JetPoint<T>) -> f64 {
    p.coords()
        .iter()
        .fold(1.0f64, |m, c| m.max(c.to_f64().abs()))
}

fn vanishes<T: Scalar>(value: &T, p: &JetPoint<T>, tau: f64) -> bool {
    value.is_zero_tol(tau * point_scale(p))
}

/// Stratifies a point of the equation hypersurface.
///
/// Fails with `NotOnEquation` when the residual `|F(rho)|` exceeds the
/// on-equation tolerance.
pub fn classify_point<T: Scalar>(
    eq: &ImplicitEq,
    rho: &JetPoint<T>,
    tau_on: f64,
) -> Result<PointClass, ClassifyError> {
    let residual = eq.f_expr.eval(rho)?;
    if !vanishes(&residual, rho, tau_on) {
        return Err(ClassifyError::NotOnEquation {
            residual: residual.to_f64().abs(),
        });
    }
    let vert = contact_vert(&eq.f_expr, eq.order).eval(rho)?;
    if !vanishes(&vert, rho, tau_on) {
        return Ok(PointClass::RegularPoint);
    }
    let trans = contact_trans(&eq.f_expr, eq.order).eval(rho)?;
    if !vanishes(&trans, rho, tau_on) {
        Ok(PointClass::RegularSingular)
    } else {
        Ok(PointClass::IrregularSingular)
    }
}

/// Generator of the line field cut out of the contact distribution by
/// the equation: `X = F_{u_q} C - (C F) d/du_q`, written out in the
/// order-q jet coordinates.
pub fn vessiot_generator(eq: &ImplicitEq) -> VectorFieldSpec {
    let q = eq.order;
    let vert = contact_vert(&eq.f_expr, q);
    let trans = contact_trans(&eq.f_expr, q);
    let mut components = vec![vert.clone()];
    for i in 1..=q {
        components.push(Expr::mul(vert.clone(), Expr::u(i)).simplify());
    }
    components.push(Expr::neg(trans).simplify());
    VectorFieldSpec {
        vars: jet_vars(q),
        components,
    }
}

/// Projection of the contact distribution of `g u^(q) = f` one order
/// down: the field with components `(g, g u1, ..., g u^(q-1), f)`.
pub fn project_field(eq: &QuasiLinearEq) -> VectorFieldSpec {
    let q = eq.order;
    let mut components = vec![eq.g.clone()];
    for i in 1..q {
        components.push(Expr::mul(eq.g.clone(), Expr::u(i)).simplify());
    }
    components.push(eq.f.clone());
    VectorFieldSpec {
        vars: jet_vars(q - 1),
        components,
    }
}

/// Sorts a base point into regular / improper / proper.
pub fn classify_impasse<T: Scalar>(
    eq: &QuasiLinearEq,
    rho: &JetPoint<T>,
    tau_on: f64,
) -> Result<ImpasseClass, ClassifyError> {
    let g = eq.g.eval(rho)?;
    if !vanishes(&g, rho, tau_on) {
        return Ok(ImpasseClass::Regular);
    }
    let f = eq.f.eval(rho)?;
    if !vanishes(&f, rho, tau_on) {
        Ok(ImpasseClass::ImproperImpasse)
    } else {
        Ok(ImpasseClass::ProperImpasse)
    }
}

/// Analyses the fiber over a proper impasse point.
///
/// The irregular singularities in the fiber are the solutions `w` of
/// the quadratic
/// `C f + [f_{u_{q-1}} - C g] w - g_{u_{q-1}} w^2 = 0`,
/// with all coefficients evaluated at the base point (`C` is the
/// transversal contact field one order down).
pub fn fiber_case<T: Scalar>(
    eq: &QuasiLinearEq,
    rho: &JetPoint<T>,
    tau_on: f64,
) -> Result<FiberAnalysis, ClassifyError> {
    if classify_impasse(eq, rho, tau_on)? != ImpasseClass::ProperImpasse {
        return Err(ClassifyError::NotProperImpasse);
    }
    let q = eq.order;
    let cg_vert = contact_vert(&eq.g, q - 1).eval(rho)?;
    let cf_vert = contact_vert(&eq.f, q - 1).eval(rho)?;
    let cg_trans = contact_trans(&eq.g, q - 1).eval(rho)?;
    let cf_trans = contact_trans(&eq.f, q - 1).eval(rho)?;

    // quadratic a w^2 + b w + c with a = -C_{q-1}g, b = C_{q-1}f - Cg, c = Cf
    let b = cf_vert.clone() - cg_trans.clone();
    if !vanishes(&cg_vert, rho, tau_on) {
        let disc = b.clone() * b.clone()
            + T::from_int(4) * cf_trans.clone() * cg_vert.clone();
        let disc_f = disc.to_f64();
        let bf = b.to_f64();
        let af = -cg_vert.to_f64();
        if disc_f >= 0.0 || vanishes(&disc, rho, tau_on) {
            let s = disc_f.max(0.0).sqrt();
            let r1 = (-bf + s) / (2.0 * af);
            let r2 = (-bf - s) / (2.0 * af);
            return Ok(FiberAnalysis {
                case: FiberCase::TwoIrregular,
                discriminant: Some(disc_f),
                roots: FiberRoots::RealPair(r1.min(r2), r1.max(r2)),
            });
        }
        return Ok(FiberAnalysis {
            case: FiberCase::NoRealIrregular,
            discriminant: Some(disc_f),
            roots: FiberRoots::ComplexPair {
                re: -bf / (2.0 * af),
                im: (-disc_f).sqrt() / (2.0 * af.abs()),
            },
        });
    }
    if !vanishes(&b, rho, tau_on) {
        let w = -(cf_trans.to_f64() / b.to_f64());
        return Ok(FiberAnalysis {
            case: FiberCase::OneIrregular,
            discriminant: None,
            roots: FiberRoots::Single(w),
        });
    }
    if !vanishes(&cf_trans, rho, tau_on) {
        Ok(FiberAnalysis {
            case: FiberCase::NoneGenericity3,
            discriminant: None,
            roots: FiberRoots::None,
        })
    } else {
        Ok(FiberAnalysis {
            case: FiberCase::WholeFiberIrregular,
            discriminant: None,
            roots: FiberRoots::WholeFiber,
        })
    }
}

/// Discriminant `[f_u - g_x]^2 + 4 f_x g_u` of a first-order pair at a
/// point; equals the discriminant of the characteristic polynomial of
/// the planar Jacobian of the projected field there.
pub fn first_order_discriminant<T: Scalar>(
    eq: &QuasiLinearEq,
    rho: &JetPoint<T>,
) -> Result<T, ClassifyError> {
    assert_eq!(eq.order, 1, "discriminant formula is first-order only");
    let fu = eq.f.diff(Var::U(0)).eval(rho)?;
    let gx = eq.g.diff(Var::X).eval(rho)?;
    let fx = eq.f.diff(Var::X).eval(rho)?;
    let gu = eq.g.diff(Var::U(0)).eval(rho)?;
    let d = fu.clone() - gx.clone();
    Ok(d.clone() * d + T::from_int(4) * fx * gu)
}

/// One eigenvalue of a linearised field, with the optional eigenvector
/// and its geometric flags.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEntry {
    pub value: Complex64,
    pub multiplicity: usize,
    /// Exact rational eigenvalue, when confirmed by an exact
    /// characteristic polynomial.
    pub exact: Option<BigRational>,
    /// Eigenvector (largest component 1) for real simple eigenvalues.
    pub eigenvector: Option<Vec<f64>>,
    /// Whether the eigenvector is tangent to the equation hypersurface
    /// (only tested when a defining function is supplied; directions
    /// failing this test are artifacts of the ambient coordinates).
    pub tangent_to_equation: Option<bool>,
    /// Whether the eigenvector is transversal to the fibration, i.e.
    /// has a nonzero x-component.
    pub transversal: Option<bool>,
}

/// Jacobian of a field at a point together with its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianAnalysis {
    pub matrix: Matrix<f64>,
    pub spectrum: Vec<SpectrumEntry>,
}

/// Linearises `field` at `p` and decomposes the spectrum.
///
/// Eigenvalues are sorted by real part descending, then imaginary part
/// descending.  When `on_equation` is given, each real eigenvector is
/// checked for tangency against the gradient of that defining function.
pub fn jacobian_at<T: Scalar>(
    field: &VectorFieldSpec,
    p: &JetPoint<T>,
    on_equation: Option<&Expr>,
) -> Result<JacobianAnalysis, ClassifyError> {
    let jac = field.jacobian(p)?;
    let jac_f = jac.to_f64();
    let eigs = eigenvalues(&jac);
    let grad: Option<Vec<f64>> = match on_equation {
        Some(f_expr) => Some(
            field
                .vars
                .iter()
                .map(|v| f_expr.diff(*v).eval(p).map(|x| x.to_f64()))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    let spectrum = eigs
        .into_iter()
        .map(|e| {
            let real_simple = e.value.im == 0.0 && e.multiplicity == 1;
            let vec = if real_simple {
                eigenvector(&jac_f, e.value.re)
            } else {
                None
            };
            let (tangent, transversal) = match &vec {
                Some(v) => {
                    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
                    let tangent = grad.as_ref().map(|g| {
                        let dot: f64 = g.iter().zip(v).map(|(a, b)| a * b).sum();
                        let gscale = g.iter().fold(1.0f64, |m, x| m.max(x.abs()));
                        dot.abs() <= TAU_TANGENT * gscale * scale
                    });
                    (tangent, Some(v[0].abs() > TAU_TANGENT * scale))
                }
                None => (None, None),
            };
            SpectrumEntry {
                value: e.value,
                multiplicity: e.multiplicity,
                exact: e.exact,
                eigenvector: vec,
                tangent_to_equation: tangent,
                transversal,
            }
        })
        .collect();
    Ok(JacobianAnalysis {
        matrix: jac_f,
        spectrum,
    })
}
