//! Symbolic-numeric classification of geometric singularities and
//! impasse points of scalar quasi-linear ODEs `g(x) u'' = f(x, u, u')`,
//! with an existence/uniqueness/regularity diagnosis engine for singular
//! initial value problems posed at a simple zero of `g`.
//!
//! The crate is organised in layers:
//!
//! * [`expr`]: exact symbolic expressions over jet coordinates.
//! * [`jet`]: contact fields, formal derivatives and prolongation.
//! * [`classify`]: point / impasse taxonomy and linearisation spectra.
//! * [`ivp`]: the Taylor recursion and the singular IVP diagnosis.
//! * [`dynamics`]: numerical integration of the projected fields,
//!   invariant-manifold shooting and limit estimation.
//! * [`job`]: job files, reports and the command-line front end.

pub mod classify;
pub mod dynamics;
pub mod expr;
pub mod ivp;
pub mod jet;
pub mod job;
pub mod linalg;
pub mod scalar;

/// Exact rational scalar used on the symbolic path.
pub type Rat = num::rational::BigRational;

/// Jet point with exact rational coordinates.
pub type RatJet = expr::JetPoint<Rat>;

/// Jet point with double-precision coordinates.
pub type F64Jet = expr::JetPoint<f64>;
