//! Seeded randomised property suite for the symbolic layer.

#[path = "common/props.rs"]
mod props;

use impasse::expr::{parse, Expr, JetPoint, Var};

#[test]
fn formal_derivative_is_quasi_linear() {
    props::dx_quasi_linearity(50);
}

#[test]
fn prolongation_matches_repeated_formal_derivative() {
    props::prolongation_vs_repeated_dx(100);
}

#[test]
fn tangent_generator_annihilates_contact_forms() {
    props::contact_property(50);
}

#[test]
fn classification_is_scaling_invariant() {
    props::scaling_invariance(40);
}

#[test]
fn linearisation_parameters_rescale_covariantly() {
    props::rescaling_covariance(40);
}

#[test]
fn slow_eigenvector_tail_equals_taylor_coefficient() {
    props::eigenvector_last_component(6);
}

#[test]
fn symbolic_derivative_matches_finite_differences() {
    let mut rng = props::rng(21);
    use rand::Rng;
    for _ in 0..30 {
        let q = rng.gen_range(1..=3u32);
        let e = props::rand_poly(&mut rng, q);
        let p = props::rand_point(&mut rng, q).to_f64();
        for k in 0..=q {
            let v = Var::U(k);
            let exact: f64 = e.diff(v).eval(&p).unwrap();
            let h = 1e-6;
            let shift = |s: f64| {
                let mut c = p.coords().to_vec();
                c[k as usize + 1] += s;
                e.eval(&JetPoint::new(c)).unwrap()
            };
            let fd = (shift(h) - shift(-h)) / (2.0 * h);
            let scale = 1.0f64.max(exact.abs());
            assert!((exact - fd).abs() <= 1e-6 * scale, "{e}: {exact} vs {fd}");
        }
    }
}

#[test]
fn simplify_preserves_values() {
    let mut rng = props::rng(22);
    for _ in 0..50 {
        let e = props::rand_poly(&mut rng, 2);
        let raw = Expr::mul(
            Expr::add(e.clone(), Expr::int(0)),
            Expr::pow(Expr::int(1), props::rat(3, 1)),
        );
        let simplified = raw.simplify();
        let p = props::rand_point(&mut rng, 2);
        assert_eq!(
            raw.eval(&p).unwrap(),
            simplified.eval(&p).unwrap(),
            "simplify changed the value of {raw}"
        );
    }
}

#[test]
fn printing_round_trips_through_the_parser() {
    let mut rng = props::rng(23);
    for _ in 0..50 {
        let e = props::rand_poly(&mut rng, 3);
        let printed = e.to_string();
        let reparsed = parse(&printed).unwrap();
        let p = props::rand_point(&mut rng, 3);
        assert_eq!(
            e.eval(&p).unwrap(),
            reparsed.eval(&p).unwrap(),
            "round trip changed the value of `{printed}`"
        );
    }
}
