use super::*;
use approx::assert_relative_eq;

fn cfg(v: &[f64]) -> ParticleConfig {
    ParticleConfig::new(v.to_vec()).unwrap()
}

fn run(x: &[f64], y: &[f64], t: f64, kappa: f64, method: Method) -> PropagatorResult {
    let q = PropagatorQuery::new(cfg(x), cfg(y), t, kappa, method).unwrap();
    evaluate(&q, &EvalOptions::default()).unwrap()
}

fn heat(u: f64, t: f64) -> f64 {
    (-u * u / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// `(1/n!) sum_sigma prod_j p_t(x_j - y_sigma(j))`.
fn symmetrized_free(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len();
    let perms = all_permutations(n).unwrap();
    let s: f64 = perms
        .iter()
        .map(|p| (0..n).map(|j| heat(x[j] - y[p.apply(j)], t)).product::<f64>())
        .sum();
    s / factorial(n)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn single_particle_is_heat_kernel() {
    let want = 0.282_094_791_8;
    assert_relative_eq!(run(&[0.0], &[0.0], 1.0, 0.0, Method::TwRepulsive).real(), want, max_relative = 1e-9);
    for (kappa, m) in [
        (-0.7, Method::TwRepulsive),
        (-0.7, Method::EigenRepulsive),
        (0.9, Method::Thm1),
        (0.9, Method::Thm2),
        (0.9, Method::PartitionForm),
    ] {
        let r = run(&[0.3], &[-0.4], 0.6, kappa, m);
        assert_relative_eq!(r.real(), heat(0.7, 0.6), max_relative = 1e-11);
    }
    let z = propagator_zero_point(1, 1.0, 1.3, DEFAULT_TOL).unwrap();
    assert_relative_eq!(z.real(), want, max_relative = 1e-9);
}

#[test]
fn free_pair_at_origin() {
    for m in [Method::TwRepulsive, Method::EigenRepulsive] {
        let r = run(&[0.0, 0.0], &[0.0, 0.0], 1.0, 0.0, m);
        assert_relative_eq!(r.real(), 1.0 / (4.0 * PI), max_relative = 1e-10);
    }
}

#[test]
fn zero_coupling_matches_symmetrized_free_kernel() {
    let x = [-0.4, 0.1, 0.9];
    let y = [-0.2, 0.5, 0.6];
    let want = symmetrized_free(&x, &y, 0.8);
    for m in [Method::TwRepulsive, Method::EigenRepulsive] {
        assert_relative_eq!(run(&x, &y, 0.8, 0.0, m).real(), want, max_relative = 1e-10);
    }
}

#[test]
fn repulsive_evaluators_agree() {
    let a = run(&[0.0, 0.3], &[-0.2, 0.4], 0.5, -1.0, Method::TwRepulsive);
    let b = run(&[0.0, 0.3], &[-0.2, 0.4], 0.5, -1.0, Method::EigenRepulsive);
    assert!(rel(a.real(), b.real()) <= 10.0 * (a.error_estimate + b.error_estimate) / b.real() + 1e-12);
    let x = [-0.5, 0.2, 0.35];
    let y = [-0.1, 0.0, 0.8];
    let a = run(&x, &y, 0.7, -0.7, Method::TwRepulsive);
    let b = run(&x, &y, 0.7, -0.7, Method::EigenRepulsive);
    assert!(rel(a.real(), b.real()) < 1e-8, "{} vs {}", a.real(), b.real());
}

#[test]
fn repulsion_lowers_the_kernel_near_contact() {
    let free = run(&[0.0, 0.0], &[0.0, 0.0], 1.0, 0.0, Method::TwRepulsive).real();
    let rep = run(&[0.0, 0.0], &[0.0, 0.0], 1.0, -1.0, Method::TwRepulsive).real();
    assert!(rep < free && rep > 0.0);
}

#[test]
fn double_permutation_matches_zero_point() {
    let a = run(&[0.0, 0.0], &[0.0, 0.0], 1.0, 1.0, Method::Thm1);
    let z = propagator_zero_point(2, 1.0, 1.0, DEFAULT_TOL).unwrap();
    assert!(rel(a.real(), z.real()) < 1e-8, "{} vs {}", a.real(), z.real());
    let b = run(&[0.0, 0.0], &[0.0, 0.0], 1.0, 1.0, Method::Thm2);
    assert!(rel(b.real(), z.real()) < 1e-8, "{} vs {}", b.real(), z.real());
}

#[test]
fn attractive_evaluators_agree_two_particles() {
    let a = run(&[0.0, 0.4], &[0.1, 0.2], 0.5, 0.5, Method::Thm1);
    let b = run(&[0.0, 0.4], &[0.1, 0.2], 0.5, 0.5, Method::Thm2);
    assert!(rel(a.real(), b.real()) < 1e-8, "{} vs {}", a.real(), b.real());
    assert!(a.imag_residue <= 10.0 * a.error_estimate + 1e-15);
    assert!(b.imag_residue <= 10.0 * b.error_estimate + 1e-15);
}

#[test]
fn attractive_evaluators_agree_three_particles() {
    let x = [-0.3, 0.2, 0.25];
    let y = [-0.6, 0.1, 0.5];
    let a = run(&x, &y, 0.6, 0.8, Method::Thm1);
    let b = run(&x, &y, 0.6, 0.8, Method::Thm2);
    assert!(rel(a.real(), b.real()) < 1e-8, "{} vs {}", a.real(), b.real());
    let c = run(&x, &y, 0.6, 0.8, Method::PartitionForm);
    assert!(rel(c.real(), b.real()) < 1e-8, "{} vs {}", c.real(), b.real());
}

#[test]
fn offsets_do_not_change_the_double_permutation_form() {
    let x = [-0.2, 0.3, 0.3];
    let y = [0.0, 0.1, 0.7];
    let q = PropagatorQuery::new(cfg(&x), cfg(&y), 0.5, 1.1, Method::Thm1).unwrap();
    let sym = propagator_thm1(&q, &Thm1Config::default()).unwrap();
    let zero = propagator_thm1(&q, &Thm1Config { mu: MuRule::Zero }).unwrap();
    let scaled = propagator_thm1(&q, &Thm1Config { mu: MuRule::Scaled { fraction: 0.3 } }).unwrap();
    assert!(rel(zero.real(), sym.real()) < 1e-8);
    assert!(rel(scaled.real(), sym.real()) < 1e-8);
}

#[test]
fn contour_depths_do_not_change_the_partition_form() {
    let q = PropagatorQuery::new(cfg(&[0.0, 0.3]), cfg(&[-0.1, 0.5]), 0.7, 1.0, Method::PartitionForm).unwrap();
    let thm1 = run(&[0.0, 0.3], &[-0.1, 0.5], 0.7, 1.0, Method::Thm1).real();
    let a = propagator_partition_form(&q, &PartitionFormConfig { eps: Some(vec![0.3, 0.7]) }).unwrap();
    let b = propagator_partition_form(&q, &PartitionFormConfig { eps: Some(vec![0.1, 0.9]) }).unwrap();
    assert!(rel(a.real(), b.real()) < 1e-10, "{} vs {}", a.real(), b.real());
    assert!(rel(a.real(), thm1) < 1e-8);
}

#[test]
fn kernel_is_symmetric_in_endpoints() {
    let x = [-0.4, 0.0, 0.6];
    let y = [-0.1, 0.2, 0.3];
    for (kappa, m) in [(0.9, Method::Thm2), (-0.6, Method::TwRepulsive)] {
        let a = run(&x, &y, 0.5, kappa, m).real();
        let b = run(&y, &x, 0.5, kappa, m).real();
        assert!(rel(a, b) < 1e-8);
    }
}

#[test]
fn four_particle_zero_point_is_positive() {
    let z = propagator_zero_point(4, 1.0, 1.0, 1e-8).unwrap();
    assert!(z.real() > 0.0 && z.real().is_finite());
    assert!(z.imag_residue <= 10.0 * z.error_estimate + 1e-14);
}

#[test]
fn three_particle_decay_rate() {
    let ts = [4.0, 5.0, 6.0, 7.0, 8.0];
    let s = decay_rate(3, 1.0, Method::ZeroPoint, &ts, 1e-9).unwrap();
    assert!((s + 2.0).abs() <= 0.1, "slope {s}");
}

#[test]
fn validation() {
    let x = cfg(&[0.0, 0.1]);
    assert!(PropagatorQuery::new(x.clone(), x.clone(), 1.0, 1.0, Method::TwRepulsive).is_err());
    assert!(PropagatorQuery::new(x.clone(), x.clone(), 1.0, 0.0, Method::Thm2).is_err());
    assert!(PropagatorQuery::new(x.clone(), x.clone(), 1.0, -1.0, Method::EigenRepulsive).is_ok());
    assert!(PropagatorQuery::new(x.clone(), x.clone(), 0.0, -1.0, Method::EigenRepulsive).is_err());
    assert!(PropagatorQuery::new(x.clone(), cfg(&[0.0]), 1.0, -1.0, Method::EigenRepulsive).is_err());
    assert!(PropagatorQuery::new(x.clone(), x.clone(), 1.0, 1.0, Method::ZeroPoint).is_err());
    let five = cfg(&[0.0; 5]);
    assert!(PropagatorQuery::new(five.clone(), five, 1.0, 1.0, Method::Thm2).is_err());
    let q = PropagatorQuery::new(x.clone(), x.clone(), 1.0, 1.0, Method::Thm1).unwrap();
    let bad = Thm1Config {
        mu: MuRule::Explicit {
            entries: vec![MuEntry { parts: vec![2], mu: vec![-2.0] }],
        },
    };
    assert!(matches!(propagator_thm1(&q, &bad), Err(Error::InvalidArgument(_))));
    let q = PropagatorQuery::new(x.clone(), x, 1.0, 1.0, Method::PartitionForm).unwrap();
    let dup = PartitionFormConfig { eps: Some(vec![0.5, 0.5]) };
    assert!(propagator_partition_form(&q, &dup).is_err());
    let out = PartitionFormConfig { eps: Some(vec![0.5, 1.0]) };
    assert!(propagator_partition_form(&q, &out).is_err());
    assert!(decay_rate(2, 1.0, Method::ZeroPoint, &[4.0, 5.0, 6.0], 1e-8).is_err());
    assert!("thm3".parse::<Method>().is_err());
    assert_eq!("partition_form".parse::<Method>().unwrap(), Method::PartitionForm);
}
