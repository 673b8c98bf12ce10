//! Symbolic expressions over the jet coordinates `x, u, u1, u2, ...`.
//!
//! [`Expr`] is an immutable tree; all operations are pure, so values can
//! be shared freely between threads.  Constants are exact rationals:
//! decimal literals are converted losslessly (`0.25` becomes `1/4`), so
//! later exact zero tests are not corrupted by parse-time rounding.

mod parse;
pub mod poly;

pub use parse::{parse, ParseError};

use std::collections::BTreeSet;
use std::fmt;
use std::rc::Rc;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use thiserror::Error;

use crate::scalar::{DomainError, Scalar};

/// A jet coordinate.  `U(0)` and the bare name `u` are synonyms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X,
    U(u32),
}

impl Var {
    /// Derivative order of the coordinate; `x` has none.
    pub fn order(self) -> Option<u32> {
        match self {
            Var::X => None,
            Var::U(k) => Some(k),
        }
    }

    pub fn u(k: u32) -> Var {
        Var::U(k)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X => write!(f, "x"),
            Var::U(0) => write!(f, "u"),
            Var::U(k) => write!(f, "u{k}"),
        }
    }
}

/// The fixed set of elementary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Immutable symbolic expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(BigRational),
    Var(Var),
    Add(Rc<Expr>, Rc<Expr>),
    Sub(Rc<Expr>, Rc<Expr>),
    Mul(Rc<Expr>, Rc<Expr>),
    Div(Rc<Expr>, Rc<Expr>),
    /// Power with a constant rational exponent.
    Pow(Rc<Expr>, BigRational),
    Func(Func, Rc<Expr>),
    Neg(Rc<Expr>),
}

/// Evaluation failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("coordinate {0} missing from the jet point (order too low)")]
    MissingCoordinate(Var),
}

/// A point of the order-q jet space: coordinates `(x, u, u', ..., u^(q))`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPoint<T> {
    coords: Vec<T>,
}

impl<T: Scalar> JetPoint<T> {
    /// Builds a jet point from `(x, u, u1, ..., uq)`; needs at least `(x, u)`.
    pub fn new(coords: Vec<T>) -> JetPoint<T> {
        assert!(coords.len() >= 2, "a jet point needs at least (x, u)");
        JetPoint { coords }
    }

    pub fn order(&self) -> u32 {
        (self.coords.len() - 2) as u32
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn x(&self) -> &T {
        &self.coords[0]
    }

    /// The `u^(k)` coordinate, if the order suffices.
    pub fn u(&self, k: u32) -> Option<&T> {
        self.coords.get(k as usize + 1)
    }

    pub fn get(&self, v: Var) -> Option<&T> {
        match v {
            Var::X => Some(self.x()),
            Var::U(k) => self.u(k),
        }
    }

    /// Truncation to a lower order.
    pub fn project(&self, order: u32) -> JetPoint<T> {
        assert!(order <= self.order());
        JetPoint {
            coords: self.coords[..order as usize + 2].to_vec(),
        }
    }

    /// Extends the point by one more derivative value.
    pub fn extend(&self, value: T) -> JetPoint<T> {
        let mut coords = self.coords.clone();
        coords.push(value);
        JetPoint { coords }
    }

    pub fn to_f64(&self) -> JetPoint<f64> {
        JetPoint {
            coords: self.coords.iter().map(|c| c.to_f64()).collect(),
        }
    }
}

fn rat_int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl Expr {
    pub fn constant(r: BigRational) -> Expr {
        Expr::Const(r)
    }

    pub fn int(n: i64) -> Expr {
        Expr::Const(rat_int(n))
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn x() -> Expr {
        Expr::Var(Var::X)
    }

    pub fn u(k: u32) -> Expr {
        Expr::Var(Var::U(k))
    }

    fn as_const(&self) -> Option<&BigRational> {
        match self {
            Expr::Const(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(r) if Zero::is_zero(r))
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(r) if r.is_one())
    }

    /// Smart constructor: `a + b` with additive identities folded.
    pub fn add(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Expr::Const(x + y);
        }
        Expr::Add(Rc::new(a), Rc::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return Expr::neg(b);
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Expr::Const(x - y);
        }
        if a == b {
            return Expr::int(0);
        }
        Expr::Sub(Rc::new(a), Rc::new(b))
    }

    /// Smart constructor: `a * b`; merges powers of a common base.
    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::int(0);
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Expr::Const(x * y);
        }
        // pull constants out of nested products: c1 * (c2 * e) -> (c1 c2) * e
        if let Some(x) = a.as_const() {
            if let Expr::Mul(p, q) = &b {
                if let Some(y) = p.as_const() {
                    return Expr::mul(Expr::Const(x * y), (**q).clone());
                }
            }
        }
        if let Some(y) = b.as_const() {
            if let Expr::Mul(p, q) = &a {
                if let Some(x) = p.as_const() {
                    return Expr::mul(Expr::Const(x * y), (**q).clone());
                }
            }
            // canonical constant-first order
            return Expr::mul(Expr::Const(y.clone()), a);
        }
        // bubble nested constant factors to the front
        if let Expr::Mul(p, q) = &a {
            if p.as_const().is_some() {
                return Expr::mul((**p).clone(), Expr::mul((**q).clone(), b));
            }
        }
        if let Expr::Mul(p, q) = &b {
            if p.as_const().is_some() {
                return Expr::mul((**p).clone(), Expr::mul(a, (**q).clone()));
            }
        }
        // combine x * x^r, x^r * x^s and x * x
        let base_exp = |e: &Expr| -> (Expr, BigRational) {
            match e {
                Expr::Pow(b, r) => ((**b).clone(), r.clone()),
                other => (other.clone(), rat_int(1)),
            }
        };
        let (ba, ra) = base_exp(&a);
        let (bb, rb) = base_exp(&b);
        if ba == bb && !matches!(ba, Expr::Const(_)) {
            return Expr::pow(ba, ra + rb);
        }
        Expr::Mul(Rc::new(a), Rc::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if b.is_one() {
            return a;
        }
        if let Some(y) = b.as_const() {
            if !Zero::is_zero(y) {
                if a.is_zero() {
                    return Expr::int(0);
                }
                if let Some(x) = a.as_const() {
                    return Expr::Const(x / y);
                }
            }
        }
        // x/x is NOT folded: it differs from 1 on the zero set of x
        Expr::Div(Rc::new(a), Rc::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(r) => Expr::Const(-r),
            Expr::Neg(inner) => (*inner).clone(),
            other => Expr::Neg(Rc::new(other)),
        }
    }

    /// Smart constructor: `base ^ exp` with a rational constant exponent.
    pub fn pow(base: Expr, exp: BigRational) -> Expr {
        if Zero::is_zero(&exp) {
            return Expr::int(1);
        }
        if exp.is_one() {
            return base;
        }
        if let Some(c) = base.as_const() {
            if exp.is_integer() && exp.numer().magnitude().bits() < 16 {
                use num::ToPrimitive;
                if let Some(n) = exp.numer().to_i64() {
                    if let Ok(v) = Scalar::powi(c, n) {
                        return Expr::Const(v);
                    }
                }
            }
        }
        Expr::Pow(Rc::new(base), exp)
    }

    pub fn powi(base: Expr, n: i64) -> Expr {
        Expr::pow(base, rat_int(n))
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        Expr::Func(f, Rc::new(arg))
    }

    /// All variables occurring in the expression.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Pow(a, _) | Expr::Func(_, a) | Expr::Neg(a) => a.collect_vars(out),
        }
    }

    /// Highest derivative order mentioned, if any `u`-coordinate occurs.
    pub fn max_order(&self) -> Option<u32> {
        self.vars()
            .into_iter()
            .filter_map(|v| v.order())
            .max()
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.vars().contains(&v)
    }

    /// Replaces every occurrence of a coordinate by an expression.
    pub fn substitute(&self, v: Var, repl: &Expr) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(w) => {
                if *w == v {
                    repl.clone()
                } else {
                    self.clone()
                }
            }
            Expr::Add(a, b) => Expr::add(a.substitute(v, repl), b.substitute(v, repl)),
            Expr::Sub(a, b) => Expr::sub(a.substitute(v, repl), b.substitute(v, repl)),
            Expr::Mul(a, b) => Expr::mul(a.substitute(v, repl), b.substitute(v, repl)),
            Expr::Div(a, b) => Expr::div(a.substitute(v, repl), b.substitute(v, repl)),
            Expr::Pow(b, r) => Expr::pow(b.substitute(v, repl), r.clone()),
            Expr::Func(f, a) => Expr::func(*f, a.substitute(v, repl)),
            Expr::Neg(a) => Expr::neg(a.substitute(v, repl)),
        }
    }

    /// Exact recursive evaluation at a jet point.
    pub fn eval<T: Scalar>(&self, p: &JetPoint<T>) -> Result<T, EvalError> {
        match self {
            Expr::Const(r) => Ok(T::from_rational(r)),
            Expr::Var(v) => p
                .get(*v)
                .cloned()
                .ok_or(EvalError::MissingCoordinate(*v)),
            Expr::Add(a, b) => Ok(a.eval(p)? + b.eval(p)?),
            Expr::Sub(a, b) => Ok(a.eval(p)? - b.eval(p)?),
            Expr::Mul(a, b) => Ok(a.eval(p)? * b.eval(p)?),
            Expr::Div(a, b) => {
                let num = a.eval(p)?;
                let den = b.eval(p)?;
                Ok(num.checked_div(&den)?)
            }
            Expr::Pow(b, r) => Ok(b.eval(p)?.powr(r)?),
            Expr::Func(f, a) => Ok(a.eval(p)?.apply_func(*f)?),
            Expr::Neg(a) => Ok(-a.eval(p)?),
        }
    }

    /// Symbolic partial derivative with respect to `v`, post-simplified.
    pub fn diff(&self, v: Var) -> Expr {
        self.diff_raw(v).simplify()
    }

    fn diff_raw(&self, v: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::int(0),
            Expr::Var(w) => {
                if *w == v {
                    Expr::int(1)
                } else {
                    Expr::int(0)
                }
            }
            Expr::Add(a, b) => Expr::add(a.diff_raw(v), b.diff_raw(v)),
            Expr::Sub(a, b) => Expr::sub(a.diff_raw(v), b.diff_raw(v)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.diff_raw(v), (**b).clone()),
                Expr::mul((**a).clone(), b.diff_raw(v)),
            ),
            Expr::Div(a, b) => Expr::div(
                Expr::sub(
                    Expr::mul(a.diff_raw(v), (**b).clone()),
                    Expr::mul((**a).clone(), b.diff_raw(v)),
                ),
                Expr::powi((**b).clone(), 2),
            ),
            Expr::Pow(b, r) => Expr::mul(
                Expr::mul(
                    Expr::Const(r.clone()),
                    Expr::pow((**b).clone(), r - rat_int(1)),
                ),
                b.diff_raw(v),
            ),
            Expr::Func(f, a) => {
                let outer = match f {
                    Func::Sin => Expr::func(Func::Cos, (**a).clone()),
                    Func::Cos => Expr::neg(Expr::func(Func::Sin, (**a).clone())),
                    Func::Exp => Expr::func(Func::Exp, (**a).clone()),
                    Func::Ln => Expr::div(Expr::int(1), (**a).clone()),
                    Func::Sqrt => Expr::div(
                        Expr::int(1),
                        Expr::mul(Expr::int(2), Expr::func(Func::Sqrt, (**a).clone())),
                    ),
                };
                Expr::mul(outer, a.diff_raw(v))
            }
            Expr::Neg(a) => Expr::neg(a.diff_raw(v)),
        }
    }

    /// Syntactic simplification: constant folding, identity elimination,
    /// flattening of nested negations.  Idempotent and semantics
    /// preserving on the common evaluation domain.
    pub fn simplify(&self) -> Expr {
        let mut cur = self.clone();
        for _ in 0..16 {
            let next = cur.simplify_once();
            if next == cur {
                return cur;
            }
            cur = next;
        }
        cur
    }

    fn simplify_once(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Add(a, b) => Expr::add(a.simplify_once(), b.simplify_once()),
            Expr::Sub(a, b) => Expr::sub(a.simplify_once(), b.simplify_once()),
            Expr::Mul(a, b) => Expr::mul(a.simplify_once(), b.simplify_once()),
            Expr::Div(a, b) => Expr::div(a.simplify_once(), b.simplify_once()),
            Expr::Pow(b, r) => Expr::pow(b.simplify_once(), r.clone()),
            Expr::Func(f, a) => Expr::func(*f, a.simplify_once()),
            Expr::Neg(a) => Expr::neg(a.simplify_once()),
        }
    }
}

// ---------------------------------------------------------------------------
// canonical printing
// ---------------------------------------------------------------------------

/// Precedence levels used by the canonical printer; matches the parser.
#[derive(PartialEq, PartialOrd, Clone, Copy)]
enum Prec {
    Add = 1,
    Mul = 2,
    Neg = 3,
    Pow = 4,
    Atom = 5,
}

fn prec(e: &Expr) -> Prec {
    match e {
        Expr::Add(..) | Expr::Sub(..) => Prec::Add,
        Expr::Mul(..) | Expr::Div(..) => Prec::Mul,
        Expr::Neg(..) => Prec::Neg,
        Expr::Pow(..) => Prec::Pow,
        Expr::Const(r) => {
            if r.is_negative() {
                Prec::Neg
            } else if r.is_integer() || decimal_digits(r).is_some() {
                Prec::Atom
            } else {
                Prec::Mul // prints as p/q
            }
        }
        Expr::Var(_) | Expr::Func(..) => Prec::Atom,
    }
}

/// Exact decimal rendering when the denominator is of the form 2^a 5^b.
fn decimal_digits(r: &BigRational) -> Option<String> {
    if r.is_integer() {
        return Some(r.numer().to_string());
    }
    let mut d = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut a = 0u32;
    let mut b = 0u32;
    while (&d % &two).is_zero() {
        d /= &two;
        a += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        b += 1;
    }
    if !d.is_one() {
        return None;
    }
    let shift = a.max(b);
    let scaled = r * BigRational::from_integer(BigInt::from(10).pow(shift));
    let digits = scaled.numer().magnitude().to_string();
    let digits = format!("{:0>width$}", digits, width = shift as usize + 1);
    let point = digits.len() - shift as usize;
    let mut s = String::new();
    if r.is_negative() {
        s.push('-');
    }
    s.push_str(&digits[..point]);
    s.push('.');
    s.push_str(&digits[point..]);
    Some(s)
}

fn fmt_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Const(r) => {
            if let Some(d) = decimal_digits(r) {
                out.push_str(&d);
            } else if r.is_negative() {
                out.push_str(&format!("-{}/{}", r.numer().magnitude(), r.denom()));
            } else {
                out.push_str(&format!("{}/{}", r.numer(), r.denom()));
            }
        }
        Expr::Var(v) => out.push_str(&v.to_string()),
        Expr::Add(a, b) => {
            fmt_child(a, Prec::Add, false, out);
            out.push_str(" + ");
            fmt_child(b, Prec::Add, true, out);
        }
        Expr::Sub(a, b) => {
            fmt_child(a, Prec::Add, false, out);
            out.push_str(" - ");
            fmt_child(b, Prec::Add, true, out);
        }
        Expr::Mul(a, b) => {
            fmt_child(a, Prec::Mul, false, out);
            out.push('*');
            fmt_child(b, Prec::Mul, true, out);
        }
        Expr::Div(a, b) => {
            fmt_child(a, Prec::Mul, false, out);
            out.push('/');
            fmt_child(b, Prec::Mul, true, out);
        }
        Expr::Neg(a) => {
            out.push('-');
            fmt_child(a, Prec::Neg, true, out);
        }
        Expr::Pow(b, r) => {
            fmt_child(b, Prec::Pow, false, out);
            out.push('^');
            if r.is_integer() {
                out.push_str(&r.numer().to_string());
            } else {
                out.push_str(&format!("({}/{})", r.numer(), r.denom()));
            }
        }
        Expr::Func(f, a) => {
            out.push_str(f.name());
            out.push('(');
            fmt_expr(a, out);
            out.push(')');
        }
    }
}

fn fmt_child(e: &Expr, ctx: Prec, right: bool, out: &mut String) {
    let p = prec(e);
    // left-associative grammar: a right operand of equal precedence needs parens
    let need = (p < ctx) || (right && p == ctx && matches!(ctx, Prec::Add | Prec::Mul));
    if need {
        out.push('(');
        fmt_expr(e, out);
        out.push(')');
    } else {
        fmt_expr(e, out);
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        fmt_expr(self, &mut s);
        f.write_str(&s)
    }
}
