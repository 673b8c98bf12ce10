//! Scalar abstraction shared by the symbolic and numeric layers.
//!
//! All expression evaluation, classification and Taylor recursions are
//! generic over [`Scalar`], so the same code runs on `f32`/`f64` and on
//! exact rationals.  Exact arithmetic is preferred wherever the inputs
//! permit it, since the zero tests behind the point taxonomy and the
//! resonance condition are exact conditions.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::expr::Func;

/// Runtime domain failures during evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of a non-positive value")]
    LogNonPositive,
    #[error("square root of a negative value")]
    SqrtNegative,
    #[error("zero raised to a negative power")]
    ZeroToNegativePower,
    #[error("operation `{0}` has no exact result in rational arithmetic")]
    Inexact(&'static str),
    #[error("non-finite intermediate value")]
    NonFinite,
}

/// A field element the expression evaluator can compute with.
///
/// Implemented for `f32`, `f64` (approximate path) and [`BigRational`]
/// (exact path).  The exact path refuses transcendental functions and
/// non-integer powers instead of silently rounding.
pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + Debug
    + Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True for exact (rational) arithmetic; zero tests are then exact.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(n: i64) -> Self;
    fn from_rational(r: &BigRational) -> Self;
    fn is_zero(&self) -> bool;

    /// Lossless view as a rational, when one exists.
    fn to_rational(&self) -> Option<BigRational>;
    fn to_f64(&self) -> f64;

    fn abs(&self) -> Self;

    /// Checked division.
    fn checked_div(&self, rhs: &Self) -> Result<Self, DomainError> {
        if rhs.is_zero() {
            Err(DomainError::DivisionByZero)
        } else {
            Ok(self.clone() / rhs.clone())
        }
    }

    /// Integer power with the 0^negative domain check.
    fn powi(&self, n: i64) -> Result<Self, DomainError> {
        if self.is_zero() && n < 0 {
            return Err(DomainError::ZeroToNegativePower);
        }
        let mut acc = Self::one();
        let mut base = if n < 0 {
            Self::one() / self.clone()
        } else {
            self.clone()
        };
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        Ok(acc)
    }

    /// Power with a rational exponent.
    fn powr(&self, r: &BigRational) -> Result<Self, DomainError>;

    /// Elementary function application.
    fn apply_func(&self, f: Func) -> Result<Self, DomainError>;

    /// Zero test with an absolute tolerance on the approximate path.
    /// Exact scalars ignore the tolerance.
    fn is_zero_tol(&self, tol: f64) -> bool {
        if Self::EXACT {
            self.is_zero()
        } else {
            self.to_f64().abs() <= tol
        }
    }
}

macro_rules! impl_scalar_float {
    ($t:ty) => {
        impl Scalar for $t {
            const EXACT: bool = false;

            fn zero() -> Self {
                0.0
            }
            fn one() -> Self {
                1.0
            }
            fn from_int(n: i64) -> Self {
                n as $t
            }
            fn from_rational(r: &BigRational) -> Self {
                let num = r.numer().to_f64().unwrap_or(f64::NAN);
                let den = r.denom().to_f64().unwrap_or(f64::NAN);
                (num / den) as $t
            }
            fn is_zero(&self) -> bool {
                *self == 0.0
            }
            fn to_rational(&self) -> Option<BigRational> {
                None
            }
            fn to_f64(&self) -> f64 {
                *self as f64
            }
            fn abs(&self) -> Self {
                <$t>::abs(*self)
            }
            fn powr(&self, r: &BigRational) -> Result<Self, DomainError> {
                if r.is_integer() {
                    let n = r.numer().to_i64().ok_or(DomainError::NonFinite)?;
                    return self.powi(n);
                }
                if *self < 0.0 {
                    return Err(DomainError::SqrtNegative);
                }
                if *self == 0.0 && r.is_negative() {
                    return Err(DomainError::ZeroToNegativePower);
                }
                let e = Scalar::to_f64(&<$t as Scalar>::from_rational(r));
                Ok(<$t>::powf(*self, e as $t))
            }
            fn apply_func(&self, f: Func) -> Result<Self, DomainError> {
                match f {
                    Func::Sin => Ok(self.sin()),
                    Func::Cos => Ok(self.cos()),
                    Func::Exp => Ok(self.exp()),
                    Func::Ln => {
                        if *self <= 0.0 {
                            Err(DomainError::LogNonPositive)
                        } else {
                            Ok(self.ln())
                        }
                    }
                    Func::Sqrt => {
                        if *self < 0.0 {
                            Err(DomainError::SqrtNegative)
                        } else {
                            Ok(self.sqrt())
                        }
                    }
                }
            }
        }
    };
}

impl_scalar_float!(f32);
impl_scalar_float!(f64);

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as num::One>::one()
    }
    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn to_rational(&self) -> Option<BigRational> {
        Some(self.clone())
    }
    fn to_f64(&self) -> f64 {
        let num = self.numer().to_f64().unwrap_or(f64::NAN);
        let den = self.denom().to_f64().unwrap_or(f64::NAN);
        num / den
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn powr(&self, r: &BigRational) -> Result<Self, DomainError> {
        if r.is_integer() {
            let n = r.numer().to_i64().ok_or(DomainError::NonFinite)?;
            return self.powi(n);
        }
        // sqrt of a perfect square is representable; everything else is not
        if *r == BigRational::new(BigInt::from(1), BigInt::from(2)) {
            if self.is_negative() {
                return Err(DomainError::SqrtNegative);
            }
            let n = self.numer().sqrt();
            let d = self.denom().sqrt();
            if &n * &n == *self.numer() && &d * &d == *self.denom() {
                return Ok(BigRational::new(n, d));
            }
        }
        Err(DomainError::Inexact("rational power"))
    }
    fn apply_func(&self, f: Func) -> Result<Self, DomainError> {
        match f {
            // only the trivial exact values are representable
            Func::Sin if Zero::is_zero(self) => Ok(<Self as Scalar>::zero()),
            Func::Cos if Zero::is_zero(self) => Ok(<Self as Scalar>::one()),
            Func::Exp if Zero::is_zero(self) => Ok(<Self as Scalar>::one()),
            Func::Sqrt => self.powr(&BigRational::new(BigInt::from(1), BigInt::from(2))),
            Func::Ln if *self == <Self as Scalar>::one() => Ok(<Self as Scalar>::zero()),
            _ => Err(DomainError::Inexact(f.name())),
        }
    }
}

/// Floating-point scalars usable by the numerical integrator.
pub trait Real: Scalar + Copy + num_traits::Float + num_traits::NumCast {
    fn cast(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigRational;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn powi_handles_negative_exponents() {
        let x: f64 = 2.0;
        assert_eq!(Scalar::powi(&x, -2).unwrap(), 0.25);
        let r = rat(2, 3);
        assert_eq!(Scalar::powi(&r, -1).unwrap(), rat(3, 2));
        assert!(Scalar::powi(&rat(0, 1), -1).is_err());
    }

    #[test]
    fn rational_sqrt_exact_when_perfect_square() {
        assert_eq!(rat(9, 4).apply_func(Func::Sqrt).unwrap(), rat(3, 2));
        assert!(rat(2, 1).apply_func(Func::Sqrt).is_err());
        assert!(rat(-1, 1).apply_func(Func::Sqrt).is_err());
    }

    #[test]
    fn float_domain_errors() {
        assert_eq!((-1.0f64).apply_func(Func::Sqrt), Err(DomainError::SqrtNegative));
        assert_eq!(0.0f64.apply_func(Func::Ln), Err(DomainError::LogNonPositive));
    }
}
