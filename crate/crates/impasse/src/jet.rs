//! Contact-field calculus on jet coordinates.
//!
//! Provides the transversal and vertical contact fields, the formal
//! (total) derivative, and the explicit prolongation of second-order
//! quasi-linear equations `g(x) u'' = f(x, u, u')` into the chain
//! `F_q = g u^(q) + [(q-2)g' - f_{u'}] u^(q-1) - h_q`.

use thiserror::Error;

use crate::expr::{Expr, Var};

/// A differential equation given as a hypersurface `F = 0` in the
/// order-`q` jet space.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitEq {
    pub f_expr: Expr,
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("equation order must be at least 1")]
    OrderZero,
    #[error("expression involves u{found}, above the declared order {order}")]
    OrderExceeded { found: u32, order: u32 },
    #[error("unsupported equation shape: {0}")]
    UnsupportedShape(String),
}

impl ImplicitEq {
    pub fn new(f_expr: Expr, order: u32) -> Result<ImplicitEq, JetError> {
        if order == 0 {
            return Err(JetError::OrderZero);
        }
        if let Some(m) = f_expr.max_order() {
            if m > order {
                return Err(JetError::OrderExceeded { found: m, order });
            }
        }
        Ok(ImplicitEq { f_expr, order })
    }
}

/// A quasi-linear equation `g u^(q) = f` where `g`, `f` only involve
/// coordinates below order `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiLinearEq {
    pub g: Expr,
    pub f: Expr,
    pub order: u32,
    /// Set when both sides are polynomial and share a non-constant
    /// factor, i.e. the pair is not in reduced form.
    pub reduced_form_warning: bool,
}

impl QuasiLinearEq {
    pub fn new(g: Expr, f: Expr, order: u32) -> Result<QuasiLinearEq, JetError> {
        if order == 0 {
            return Err(JetError::OrderZero);
        }
        for (side, e) in [("g", &g), ("f", &f)] {
            if let Some(m) = e.max_order() {
                if m >= order {
                    return Err(JetError::UnsupportedShape(format!(
                        "{side} involves u{m}, but must only use coordinates below u{order}"
                    )));
                }
            }
        }
        let reduced_form_warning =
            crate::expr::poly::has_common_factor(&g, &f) == Some(true);
        Ok(QuasiLinearEq {
            g,
            f,
            order,
            reduced_form_warning,
        })
    }

    /// The defining function `g u^(q) - f` of the hypersurface.
    pub fn implicit(&self) -> ImplicitEq {
        let f_expr = Expr::sub(
            Expr::mul(self.g.clone(), Expr::u(self.order)),
            self.f.clone(),
        )
        .simplify();
        ImplicitEq {
            f_expr,
            order: self.order,
        }
    }
}

/// Transversal contact field on the order-`q` jet space:
/// `C(e) = e_x + sum_{i<q} u^(i+1) e_{u_i}`.  Note the sum stops below
/// `q`; there is no `u^(q+1)` term.
pub fn contact_trans(e: &Expr, q: u32) -> Expr {
    let mut out = e.diff(Var::X);
    for i in 0..q {
        out = Expr::add(
            out,
            Expr::mul(Expr::u(i + 1), e.diff(Var::U(i))),
        );
    }
    out.simplify()
}

/// Vertical contact field: the plain partial with respect to `u^(q)`.
pub fn contact_vert(e: &Expr, q: u32) -> Expr {
    e.diff(Var::U(q))
}

/// Formal derivative `D_x F = C(F) + F_{u_q} u^(q+1)` of an expression
/// over coordinates of order at most `q`.  The result is linear in
/// `u^(q+1)` with coefficient `F_{u_q}`.
pub fn formal_derivative(f: &Expr, q: u32) -> Expr {
    Expr::add(
        contact_trans(f, q),
        Expr::mul(contact_vert(f, q), Expr::u(q + 1)),
    )
    .simplify()
}

fn require_section8_shape(eq: &QuasiLinearEq) -> Result<(), JetError> {
    if eq.order != 2 {
        return Err(JetError::UnsupportedShape(format!(
            "h-recursion needs a second-order equation, got order {}",
            eq.order
        )));
    }
    let g_vars = eq.g.vars();
    if g_vars.iter().any(|v| *v != Var::X) {
        return Err(JetError::UnsupportedShape(
            "g must depend on x only".into(),
        ));
    }
    Ok(())
}

/// Remainder term `h_k` of the prolongation chain of `g(x) u'' = f`:
/// `h_3 = C(f)` on the first-order jet space, and
/// `h_k = C(h_{k-1} - [(k-3)g' - f_{u'}] u^(k-2))` applied on the
/// order-(k-2) jet space.
pub fn compute_h(eq: &QuasiLinearEq, k: u32) -> Result<Expr, JetError> {
    require_section8_shape(eq)?;
    assert!(k >= 3, "h_k starts at k = 3");
    let gp = eq.g.diff(Var::X);
    let fu1 = eq.f.diff(Var::U(1));
    let mut h = contact_trans(&eq.f, 1);
    for q in 4..=k {
        // coefficient [(q-3)g' - f_{u'}] of u^(q-2) carried down a level
        let coef = Expr::sub(
            Expr::mul(Expr::int(q as i64 - 3), gp.clone()),
            fu1.clone(),
        );
        let inner = Expr::sub(h, Expr::mul(coef, Expr::u(q - 2)));
        h = contact_trans(&inner.simplify(), q - 2);
    }
    Ok(h.simplify())
}

/// Order-`k` prolongation of `g(x) u'' = f`:
/// `F_2 = g u'' - f` and, for `k > 2`,
/// `F_k = g u^(k) + [(k-2)g' - f_{u'}] u^(k-1) - h_k`.
pub fn prolong(eq: &QuasiLinearEq, k: u32) -> Result<ImplicitEq, JetError> {
    require_section8_shape(eq)?;
    assert!(k >= 2, "prolongation starts at the equation order");
    if k == 2 {
        return Ok(eq.implicit());
    }
    let gp = eq.g.diff(Var::X);
    let fu1 = eq.f.diff(Var::U(1));
    let coef = Expr::sub(Expr::mul(Expr::int(k as i64 - 2), gp), fu1);
    let h = compute_h(eq, k)?;
    let f_expr = Expr::sub(
        Expr::add(
            Expr::mul(eq.g.clone(), Expr::u(k)),
            Expr::mul(coef, Expr::u(k - 1)),
        ),
        h,
    )
    .simplify();
    Ok(ImplicitEq { f_expr, order: k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, JetPoint};

    fn ql(g: &str, f: &str) -> QuasiLinearEq {
        QuasiLinearEq::new(parse(g).unwrap(), parse(f).unwrap(), 2).unwrap()
    }

    fn assert_equiv(a: &Expr, b: &Expr, order: u32) {
        // numeric equivalence on a deterministic grid of jet points
        let mut t = 0.37_f64;
        for _ in 0..25 {
            let coords: Vec<f64> = (0..order + 2)
                .map(|i| {
                    t = (t * 997.0 + 0.1 * i as f64).sin();
                    1.5 * t + 0.2
                })
                .collect();
            let p = JetPoint::new(coords);
            let (va, vb) = (a.eval(&p), b.eval(&p));
            match (va, vb) {
                (Ok(x), Ok(y)) => assert!(
                    (x - y).abs() <= 1e-10 * (1.0 + x.abs().max(y.abs())),
                    "{a} != {b} at {p:?}: {x} vs {y}"
                ),
                _ => continue,
            }
        }
    }

    #[test]
    fn contact_fields_on_known_equations() {
        let cusp = parse("u*(u1)^2+x").unwrap();
        assert_equiv(&contact_trans(&cusp, 1), &parse("1+u1^3").unwrap(), 1);
        assert_equiv(&contact_vert(&cusp, 1), &parse("2*u*u1").unwrap(), 1);

        let f = parse("u1^2+x-1/4").unwrap();
        assert_eq!(contact_trans(&f, 1), Expr::int(1));
        assert_eq!(contact_vert(&f, 0), Expr::int(0));

        assert_eq!(contact_trans(&Expr::x(), 0), Expr::int(1));
        assert_eq!(contact_vert(&parse("x*u2").unwrap(), 2), Expr::x());
    }

    #[test]
    fn formal_derivative_known_values() {
        assert_eq!(formal_derivative(&Expr::u(0), 0), Expr::u(1));

        let f2 = parse("x*u2 - u1^2 - x + 1/4").unwrap();
        let want = parse("x*u3 + u2 - 2*u1*u2 - 1").unwrap();
        assert_equiv(&formal_derivative(&f2, 2), &want, 3);

        let cusp = parse("u*(u1)^2+x").unwrap();
        let want = parse("(1+u1^3) + 2*u*u1*u2").unwrap();
        assert_equiv(&formal_derivative(&cusp, 1), &want, 2);
    }

    #[test]
    fn formal_derivative_is_quasi_linear() {
        // the u^(q+1)-coefficient of D_x F equals F_{u_q}
        for (s, q) in [
            ("u*(u1)^2+x", 1u32),
            ("x*u2 - u1^2 - x + 1/4", 2),
            ("u3^2 + x*u1", 3),
            ("sin(x)*u2 + exp(u)", 2),
        ] {
            let f = parse(s).unwrap();
            let d = formal_derivative(&f, q);
            assert_equiv(&d.diff(Var::U(q + 1)), &f.diff(Var::U(q)), q + 1);
        }
    }

    #[test]
    fn h_recursion_known_values() {
        let eq = ql("x", "u1^2+x-1/4");
        assert_eq!(compute_h(&eq, 3).unwrap(), Expr::int(1));
        let h4 = compute_h(&eq, 4).unwrap();
        assert_equiv(&h4, &parse("2*u2^2").unwrap(), 2);

        let eq = ql("x", "u1");
        assert_eq!(compute_h(&eq, 3).unwrap(), Expr::int(0));
    }

    #[test]
    fn prolong_known_values() {
        let eq = ql("x", "u1^2+x-1/4");
        let f3 = prolong(&eq, 3).unwrap();
        assert_eq!(f3.order, 3);
        assert_equiv(&f3.f_expr, &parse("x*u3 + (1 - 2*u1)*u2 - 1").unwrap(), 3);

        let eq = ql("x", "u1");
        assert_eq!(
            prolong(&eq, 2).unwrap().f_expr,
            parse("x*u2 - u1").unwrap().simplify()
        );
        assert_equiv(&prolong(&eq, 3).unwrap().f_expr, &parse("x*u3").unwrap(), 3);
    }

    #[test]
    fn prolongation_matches_repeated_formal_derivative() {
        for (g, f) in [("x", "u1^2+x-1/4"), ("x", "u1"), ("x^2-x", "u*u1+x")] {
            let eq = ql(g, f);
            let mut fk = eq.implicit().f_expr;
            for k in 2..=6u32 {
                let next = prolong(&eq, k + 1).unwrap().f_expr;
                fk = formal_derivative(&fk, k);
                assert_equiv(&next, &fk, k + 1);
            }
        }
    }

    #[test]
    fn leibniz_rule() {
        let f = parse("x*u1 + u").unwrap();
        let g = parse("u1^2 - x").unwrap();
        let lhs = formal_derivative(&Expr::mul(f.clone(), g.clone()), 1);
        let rhs = Expr::add(
            Expr::mul(formal_derivative(&f, 1), g.clone()),
            Expr::mul(f, formal_derivative(&g, 1)),
        );
        assert_equiv(&lhs, &rhs, 2);
    }

    #[test]
    fn shape_validation() {
        assert!(QuasiLinearEq::new(parse("x").unwrap(), parse("u2").unwrap(), 2).is_err());
        let bad = QuasiLinearEq::new(parse("u").unwrap(), parse("x").unwrap(), 2).unwrap();
        assert!(matches!(
            compute_h(&bad, 3),
            Err(JetError::UnsupportedShape(_))
        ));
        assert!(ImplicitEq::new(parse("u3").unwrap(), 2).is_err());
    }

    #[test]
    fn reduced_form_warning_flag() {
        assert!(!ql("x", "u1^2+x-1/4").reduced_form_warning);
        assert!(ql("x*u", "x*u1 - x").reduced_form_warning);
    }
}
