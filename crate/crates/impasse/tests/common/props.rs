//! Randomised property checks shared by the property suite and the
//! acceptance gate.  All randomness is seeded, so runs are repeatable.

use num::BigRational;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use impasse::classify::{classify_impasse, fiber_case, vessiot_generator};
use impasse::expr::{Expr, JetPoint, Var};
use impasse::ivp::{SecondOrderIvp, TaylorChain, TAU_RES};
use impasse::jet::{formal_derivative, prolong, ImplicitEq, QuasiLinearEq};
use impasse::Rat;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rat(n: i64, d: i64) -> Rat {
    BigRational::new(n.into(), d.into())
}

fn rand_rat(rng: &mut ChaCha8Rng) -> Rat {
    rat(rng.gen_range(-6..=6), rng.gen_range(1..=4))
}

fn rand_nonzero_rat(rng: &mut ChaCha8Rng) -> Rat {
    loop {
        let r = rand_rat(rng);
        if !num::Zero::is_zero(&r) {
            return r;
        }
    }
}

/// Random polynomial in the jet coordinates up to order `q`.
pub fn rand_poly(rng: &mut ChaCha8Rng, q: u32) -> Expr {
    let mut e = Expr::constant(rand_rat(rng));
    for _ in 0..rng.gen_range(1..=4) {
        let mut mono = Expr::constant(rand_nonzero_rat(rng));
        for _ in 0..rng.gen_range(0..=2) {
            let v = match rng.gen_range(0..=q) {
                0 => Var::X,
                k => Var::U(k - 1),
            };
            mono = Expr::mul(mono, Expr::var(v));
        }
        e = Expr::add(e, mono);
    }
    e.simplify()
}

pub fn rand_point(rng: &mut ChaCha8Rng, order: u32) -> JetPoint<Rat> {
    JetPoint::new((0..order + 2).map(|_| rand_rat(rng)).collect())
}

/// The formal derivative is affine-linear in the newly introduced top
/// derivative and linear in its argument; checked by exact evaluation.
pub fn dx_quasi_linearity(instances: usize) {
    let mut rng = rng(11);
    for i in 0..instances {
        let q = rng.gen_range(1..=3u32);
        let f = rand_poly(&mut rng, q);
        let g = rand_poly(&mut rng, q);
        let a = rand_rat(&mut rng);
        let b = rand_rat(&mut rng);
        let combo = Expr::add(
            Expr::mul(Expr::constant(a.clone()), f.clone()),
            Expr::mul(Expr::constant(b.clone()), g.clone()),
        );
        let df = formal_derivative(&f, q);
        let dg = formal_derivative(&g, q);
        let dcombo = formal_derivative(&combo, q);
        let p = rand_point(&mut rng, q + 1);
        // linearity in the argument
        let lhs: Rat = dcombo.eval(&p).unwrap();
        let rhs = a * df.eval(&p).unwrap() + b * dg.eval(&p).unwrap();
        assert_eq!(lhs, rhs, "linearity failed on instance {i}");
        // affine in u^(q+1): second difference vanishes exactly
        let top = Var::U(q + 1);
        let at = |w: i64| {
            let mut c = p.coords().to_vec();
            c[q as usize + 2] = rat(w, 1);
            df.eval(&JetPoint::new(c)).unwrap()
        };
        let second = at(2) - rat(2, 1) * at(1) + at(0);
        assert!(
            num::Zero::is_zero(&second),
            "not affine in {top:?} on instance {i}"
        );
    }
}

/// The order-`k` prolongation agrees with `k - 2` formal derivatives of
/// the defining function `g u'' - f`.
pub fn prolongation_vs_repeated_dx(points: usize) {
    let mut rng = rng(12);
    let cases = [
        ("x", "u1^2+x-1/4"),
        ("x^2-x", "u*u1+x"),
        ("x", "(3/2)*u1+x"),
        ("2*x+x^3", "u1^2-u^2"),
    ];
    for (g, f) in cases {
        let eq = QuasiLinearEq::new(
            impasse::expr::parse(g).unwrap(),
            impasse::expr::parse(f).unwrap(),
            2,
        )
        .unwrap();
        let f2 = prolong(&eq, 2).unwrap().f_expr;
        for k in 3..=5u32 {
            let pk = prolong(&eq, k).unwrap().f_expr;
            let mut dx = f2.clone();
            for j in 2..k {
                dx = formal_derivative(&dx, j);
            }
            for _ in 0..points / 12 {
                let p = rand_point(&mut rng, k).to_f64();
                let a = pk.eval(&p).unwrap();
                let b = dx.eval(&p).unwrap();
                let scale = 1.0f64.max(a.abs()).max(b.abs());
                assert!(
                    (a - b).abs() <= 1e-10 * scale,
                    "prolongation mismatch for ({g}, {f}) at order {k}: {a} vs {b}"
                );
            }
        }
    }
}

/// The tangent-plane generator annihilates every contact form
/// `du_i - u_{i+1} dx`; checked exactly at random rational points.
pub fn contact_property(instances: usize) {
    let mut rng = rng(13);
    for i in 0..instances {
        let q = rng.gen_range(1..=3u32);
        let f = rand_poly(&mut rng, q);
        let eq = match ImplicitEq::new(f, q) {
            Ok(eq) => eq,
            Err(_) => continue, // degenerate draw without u^(q)
        };
        let field = vessiot_generator(&eq);
        let p = rand_point(&mut rng, q);
        let rates: Vec<Rat> = field.eval_at(&p).unwrap();
        for j in 0..q as usize {
            // rates[0] multiplies dx, rates[j+1] multiplies du_j
            let residual =
                rates[j + 1].clone() - p.coords()[j + 2].clone() * rates[0].clone();
            assert!(
                num::Zero::is_zero(&residual),
                "contact form {j} not annihilated on instance {i}"
            );
        }
    }
}

/// Multiplying both sides of the equation by a nonzero constant does
/// not move any point between taxonomy classes.
pub fn scaling_invariance(instances: usize) {
    let mut rng = rng(14);
    let cases = [("u", "u-x"), ("x^2", "u^2+x"), ("x", "u+x"), ("u-x", "u")];
    for i in 0..instances {
        let (g, f) = cases[i % cases.len()];
        let g = impasse::expr::parse(g).unwrap();
        let f = impasse::expr::parse(f).unwrap();
        let alpha = rand_nonzero_rat(&mut rng);
        let eq = QuasiLinearEq::new(g.clone(), f.clone(), 1).unwrap();
        let scaled = QuasiLinearEq::new(
            Expr::mul(Expr::constant(alpha.clone()), g),
            Expr::mul(Expr::constant(alpha.clone()), f),
            1,
        )
        .unwrap();
        let p = JetPoint::new(vec![rat(0, 1), rat(i as i64 % 2, 1)]);
        assert_eq!(
            classify_impasse(&eq, &p, 1e-9).unwrap(),
            classify_impasse(&scaled, &p, 1e-9).unwrap(),
            "impasse class changed under scaling on instance {i}"
        );
        let fa = fiber_case(&eq, &p, 1e-9);
        let fb = fiber_case(&scaled, &p, 1e-9);
        match (fa, fb) {
            (Ok(a), Ok(b)) => assert_eq!(a.case, b.case),
            (Err(_), Err(_)) => {}
            other => panic!("fiber analysis changed under scaling: {other:?}"),
        }
    }
}

/// Multiplying the equation by a constant `alpha` rescales both
/// linearisation parameters by `alpha`, leaving every ratio-based
/// verdict unchanged.
pub fn rescaling_covariance(instances: usize) {
    let mut rng = rng(15);
    let cases = [
        ("x", "u1^2+x-1/4", 0.0, 0.0, -0.5),
        ("x", "u1^2+x-1/4", 0.0, 0.0, 0.5),
        ("x", "(3/2)*u1+x", 0.0, 0.0, 0.0),
        ("x", "u1", 0.0, 1.0, 0.0),
    ];
    for i in 0..instances {
        let (g, f, y, c0, c1) = cases[i % cases.len()];
        let alpha: f64 = loop {
            let a: f64 = rng.gen_range(-4.0..4.0);
            if a.abs() > 0.1 {
                break a;
            }
        };
        let g = impasse::expr::parse(g).unwrap();
        let f = impasse::expr::parse(f).unwrap();
        let base = SecondOrderIvp::new(g.clone(), f.clone(), y, c0, c1).unwrap();
        let scaled = SecondOrderIvp::new(
            Expr::mul(Expr::constant(Rat::from_float(alpha).unwrap()), g),
            Expr::mul(Expr::constant(Rat::from_float(alpha).unwrap()), f),
            y,
            c0,
            c1,
        )
        .unwrap();
        let pa = base.impasse_parameters().unwrap();
        let pb = scaled.impasse_parameters().unwrap();
        assert!((pb.delta - alpha * pa.delta).abs() <= 1e-12 * alpha.abs().max(1.0));
        assert!((pb.gamma - alpha * pa.gamma).abs() <= 1e-12 * alpha.abs().max(1.0));
        let da = base.diagnose(&Default::default()).unwrap();
        let db = scaled.diagnose(&Default::default()).unwrap();
        assert_eq!(da.case, db.case, "case changed under rescaling");
        assert_eq!(da.k, db.k);
    }
}

/// The last component of the slow eigenvector at order `q` equals the
/// next coefficient of the Taylor recursion, exactly over the rationals.
pub fn eigenvector_last_component(orders: u32) {
    let ivp = SecondOrderIvp::new(
        impasse::expr::parse("x").unwrap(),
        impasse::expr::parse("u1^2+x-1/4").unwrap(),
        rat(0, 1),
        rat(2, 5),
        rat(-1, 2),
    )
    .unwrap();
    for q in 2..=orders {
        let spec = ivp.jacobian_spectrum(q, TAU_RES).unwrap();
        let v = spec.delta_eigenvector.unwrap();
        let chain = match ivp.taylor_coefficients(q, TAU_RES).unwrap() {
            TaylorChain::Complete(c) => c,
            other => panic!("unexpected halt: {other:?}"),
        };
        assert_eq!(v[0], rat(1, 1));
        assert_eq!(
            v.last().unwrap(),
            &chain[q as usize],
            "eigenvector tail differs from the recursion at order {q}"
        );
    }
}

// used by the acceptance gate; each test binary compiles its own copy
#[allow(dead_code)]
pub fn run_all(scale: usize) {
    dx_quasi_linearity(scale);
    prolongation_vs_repeated_dx(2 * scale);
    contact_property(scale);
    scaling_invariance(scale);
    rescaling_covariance(scale);
    eigenvector_last_component(5);
}
