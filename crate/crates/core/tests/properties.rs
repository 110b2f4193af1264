use deltabose::bethe::{check_telescoping_identity, check_vandermonde_lemma};
use deltabose::oracles::free_propagator;
use deltabose::propagator::evaluate;
use deltabose::{Complex64, EvalOptions, Method, ParticleConfig, PropagatorQuery};
use proptest::prelude::*;

fn ordered(n: usize) -> impl Strategy<Value = ParticleConfig> {
    prop::collection::vec(-1.0f64..1.0, n).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        ParticleConfig::new(v).unwrap()
    })
}

fn value(x: &ParticleConfig, y: &ParticleConfig, t: f64, kappa: f64, method: Method) -> f64 {
    let q = PropagatorQuery::new(x.clone(), y.clone(), t, kappa, method).unwrap();
    evaluate(&q, &EvalOptions::default()).unwrap().real()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_coupling_is_free(x in ordered(2), y in ordered(2), t in 0.25f64..1.0) {
        let free = free_propagator(&x, &y, t).unwrap();
        prop_assert!(rel(value(&x, &y, t, 0.0, Method::TwRepulsive), free) < 1e-9);
        prop_assert!(rel(value(&x, &y, t, 0.0, Method::EigenRepulsive), free) < 1e-9);
    }

    #[test]
    fn repulsive_forms_agree(x in ordered(2), y in ordered(2), t in 0.25f64..1.0, kappa in -2.0f64..-0.1) {
        let a = value(&x, &y, t, kappa, Method::TwRepulsive);
        let b = value(&x, &y, t, kappa, Method::EigenRepulsive);
        prop_assert!(rel(a, b) < 1e-8, "{} vs {}", a, b);
    }

    #[test]
    fn attractive_forms_agree(x in ordered(2), y in ordered(2), t in 0.25f64..1.0, kappa in 0.1f64..2.0) {
        let a = value(&x, &y, t, kappa, Method::Thm1);
        let b = value(&x, &y, t, kappa, Method::Thm2);
        let c = value(&x, &y, t, kappa, Method::PartitionForm);
        prop_assert!(rel(a, b) < 1e-8 && rel(c, b) < 1e-8, "{} {} {}", a, b, c);
    }

    #[test]
    fn kernel_is_symmetric(x in ordered(2), y in ordered(2), t in 0.25f64..1.0, kappa in -2.0f64..2.0) {
        let m = if kappa > 0.0 { Method::Thm2 } else { Method::TwRepulsive };
        let a = value(&x, &y, t, kappa, m);
        let b = value(&y, &x, t, kappa, m);
        prop_assert!(a > 0.0);
        prop_assert!(rel(a, b) < 1e-8);
    }

    /// The Feynman-Kac weight `exp(2 kappa L)` grows with kappa.
    #[test]
    fn kernel_increases_with_coupling(x in ordered(2), y in ordered(2), t in 0.25f64..1.0, k in 0.1f64..1.5) {
        let below = value(&x, &y, t, -k, Method::TwRepulsive);
        let free = value(&x, &y, t, 0.0, Method::TwRepulsive);
        let above = value(&x, &y, t, k, Method::Thm2);
        prop_assert!(below < free && free < above, "{} {} {}", below, free, above);
    }

    #[test]
    fn unordered_positions_are_rejected(mut v in prop::collection::vec(-1.0f64..1.0, 2..5)) {
        v.sort_by(f64::total_cmp);
        prop_assume!(v.first() != v.last());
        let json = serde_json::to_string(&v).unwrap();
        let back: ParticleConfig = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back.as_slice(), v.as_slice());
        v.reverse();
        prop_assert!(ParticleConfig::new(v).is_err());
    }

    #[test]
    fn vandermonde_lemma_holds(
        xi in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 2..6),
        f in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 36),
    ) {
        let n = xi.len();
        let xi: Vec<Complex64> = xi.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
        let f: Vec<Vec<Complex64>> =
            (0..n).map(|a| (0..n).map(|b| Complex64::new(f[a * 6 + b].0, f[a * 6 + b].1)).collect()).collect();
        prop_assert!(check_vandermonde_lemma(&xi, &f).unwrap() <= 1e-10);
    }

    #[test]
    fn telescoping_identity_holds(
        qj in (-3.0f64..3.0, -3.0f64..3.0),
        qk in (-3.0f64..3.0, -3.0f64..3.0),
        nj in 1usize..5,
        nk in 1usize..5,
        kappa in 0.1f64..2.0,
    ) {
        let r = check_telescoping_identity(Complex64::new(qj.0, qj.1), Complex64::new(qk.0, qk.1), nj, nk, kappa);
        prop_assert!(r.unwrap() < 1e-12);
    }
}
