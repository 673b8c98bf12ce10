//! Sparse multivariate polynomials over the rationals.
//!
//! Used for the reduced-form check on quasi-linear equations: when both
//! `f` and `g` are polynomial, a non-constant common factor triggers a
//! warning (the projected field would then have spurious zeros).

use std::collections::BTreeMap;

use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

use super::{Expr, Var};

fn var_index(v: Var) -> usize {
    match v {
        Var::X => 0,
        Var::U(k) => k as usize + 1,
    }
}

/// Terms keyed by exponent vector (index 0 = x, index k+1 = u^(k)).
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Poly {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Poly {
        let mut p = Poly::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn monomial(nvars: usize, var: usize, deg: u32) -> Poly {
        let mut e = vec![0; nvars];
        e[var] = deg;
        let mut p = Poly::zero(nvars);
        p.terms.insert(e, BigRational::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&d| d == 0))
    }

    fn insert(&mut self, e: Vec<u32>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert(e.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.insert(e, ca * cb);
            }
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, k)| (e.clone(), k * c)).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::constant(self.nvars, BigRational::one());
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Degree in variable `v`, or None for the zero polynomial.
    fn degree_in(&self, v: usize) -> Option<u32> {
        self.terms.keys().map(|e| e[v]).max()
    }

    /// Highest variable index actually occurring.
    fn main_var(&self) -> Option<usize> {
        let mut best = None;
        for e in self.terms.keys() {
            for (i, &d) in e.iter().enumerate().rev() {
                if d > 0 {
                    best = Some(best.map_or(i, |b: usize| b.max(i)));
                    break;
                }
            }
        }
        best
    }

    /// Coefficients as polynomials in the remaining variables,
    /// indexed by the degree of `v`.
    fn coeffs_in(&self, v: usize) -> Vec<Poly> {
        let deg = self.degree_in(v).unwrap_or(0);
        let mut out = vec![Poly::zero(self.nvars); deg as usize + 1];
        for (e, c) in &self.terms {
            let d = e[v] as usize;
            let mut e2 = e.clone();
            e2[v] = 0;
            out[d].insert(e2, c.clone());
        }
        out
    }

}

/// Converts an expression to a polynomial, if it is one.
///
/// Division by a nonzero constant and non-negative integer powers are
/// accepted; anything else returns `None`.
pub fn expr_to_poly(e: &Expr, nvars: usize) -> Option<Poly> {
    match e {
        Expr::Const(c) => Some(Poly::constant(nvars, c.clone())),
        Expr::Var(v) => {
            let i = var_index(*v);
            if i >= nvars {
                return None;
            }
            Some(Poly::monomial(nvars, i, 1))
        }
        Expr::Add(a, b) => Some(expr_to_poly(a, nvars)?.add(&expr_to_poly(b, nvars)?)),
        Expr::Sub(a, b) => Some(expr_to_poly(a, nvars)?.sub(&expr_to_poly(b, nvars)?)),
        Expr::Mul(a, b) => Some(expr_to_poly(a, nvars)?.mul(&expr_to_poly(b, nvars)?)),
        Expr::Div(a, b) => match &**b {
            Expr::Const(c) if !c.is_zero() => {
                Some(expr_to_poly(a, nvars)?.scale(&(BigRational::one() / c)))
            }
            _ => None,
        },
        Expr::Pow(b, r) => {
            if !r.is_integer() || r.is_negative() {
                return None;
            }
            let n = r.numer().to_u32()?;
            Some(expr_to_poly(b, nvars)?.pow(n))
        }
        Expr::Neg(a) => Some(expr_to_poly(a, nvars)?.neg()),
        Expr::Func(..) => None,
    }
}

/// Number of variable slots needed to hold an expression.
pub fn nvars_for(exprs: &[&Expr]) -> usize {
    let mut n = 1;
    for e in exprs {
        for v in e.vars() {
            n = n.max(var_index(v) + 1);
        }
    }
    n
}

/// Pseudo-remainder of `a` by `b`, both viewed as univariate in `v`.
fn pseudo_rem(a: &Poly, b: &Poly, v: usize) -> Poly {
    let db = b.degree_in(v).expect("divisor must be nonzero");
    let bc = b.coeffs_in(v);
    let lb = bc.last().unwrap().clone();
    let mut r = a.clone();
    while let Some(dr) = r.degree_in(v) {
        if dr < db || r.is_zero() {
            break;
        }
        let rc = r.coeffs_in(v);
        let lr = rc.last().unwrap().clone();
        let shift = Poly::monomial(a.nvars, v, dr - db);
        r = r.mul(&lb).sub(&b.mul(&lr).mul(&shift));
        if r.degree_in(v) == Some(dr) {
            // defensive: cancellation failed, should not happen
            break;
        }
    }
    r
}

/// Exact division `a / b`; None when `b` does not divide `a`.
fn exact_div(a: &Poly, b: &Poly) -> Option<Poly> {
    if a.is_zero() {
        return Some(Poly::zero(a.nvars));
    }
    let mut r = a.clone();
    let mut q = Poly::zero(a.nvars);
    let (eb, cb) = r#leading(b)?;
    while !r.is_zero() {
        let (er, cr) = r#leading(&r)?;
        let e: Option<Vec<u32>> = er
            .iter()
            .zip(&eb)
            .map(|(x, y)| x.checked_sub(*y))
            .collect();
        let e = e?;
        let c = &cr / &cb;
        let mut t = Poly::zero(a.nvars);
        t.terms.insert(e, c);
        q = q.add(&t);
        r = r.sub(&t.mul(b));
    }
    Some(q)
}

fn r#leading(p: &Poly) -> Option<(Vec<u32>, BigRational)> {
    p.terms
        .iter()
        .next_back()
        .map(|(e, c)| (e.clone(), c.clone()))
}

/// GCD of a list of polynomials.
fn gcd_many(ps: &[Poly]) -> Poly {
    let nvars = ps.first().map(|p| p.nvars).unwrap_or(1);
    let mut acc = Poly::zero(nvars);
    for p in ps {
        acc = gcd(&acc, p);
        if acc.is_constant() && !acc.is_zero() {
            return Poly::constant(nvars, BigRational::one());
        }
    }
    acc
}

fn normalize(p: Poly) -> Poly {
    match r#leading(&p) {
        Some((_, c)) => p.scale(&(BigRational::one() / c)),
        None => p,
    }
}

/// Multivariate polynomial GCD over the rationals (primitive PRS).
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return normalize(b.clone());
    }
    if b.is_zero() {
        return normalize(a.clone());
    }
    if a.is_constant() || b.is_constant() {
        return Poly::constant(a.nvars, BigRational::one());
    }
    let v = a.main_var().max(b.main_var()).unwrap();

    let ac = a.coeffs_in(v);
    let bc = b.coeffs_in(v);
    let cont_a = gcd_many(&ac);
    let cont_b = gcd_many(&bc);
    let cont = gcd(&cont_a, &cont_b);

    let prim = |p: &Poly, c: &Poly| exact_div(p, c).expect("content divides");
    let mut p = prim(a, &cont_a);
    let mut q = prim(b, &cont_b);

    // primitive euclidean sequence in v
    loop {
        let dq = q.degree_in(v).unwrap_or(0);
        if dq == 0 {
            // coprime in v
            return normalize(cont);
        }
        let r = pseudo_rem(&p, &q, v);
        if r.is_zero() {
            let qc = q.coeffs_in(v);
            let qcont = gcd_many(&qc);
            let qp = prim(&q, &qcont);
            return normalize(cont.mul(&qp));
        }
        let rc = r.coeffs_in(v);
        let rcont = gcd_many(&rc);
        p = q;
        q = prim(&r, &rcont);
    }
}

/// True when `a` and `b` share a non-constant polynomial factor.
pub fn has_common_factor(a: &Expr, b: &Expr) -> Option<bool> {
    let n = nvars_for(&[a, b]);
    let pa = expr_to_poly(&a.simplify(), n)?;
    let pb = expr_to_poly(&b.simplify(), n)?;
    if pa.is_zero() || pb.is_zero() {
        return Some(false);
    }
    let g = gcd(&pa, &pb);
    Some(!g.is_constant())
}
