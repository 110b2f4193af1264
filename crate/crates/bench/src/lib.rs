//! Benchmark fixtures shared by the criterion targets.

use deltabose::{Method, ParticleConfig, PropagatorQuery};

pub fn config(v: &[f64]) -> ParticleConfig {
    ParticleConfig::new(v.to_vec()).expect("ordered positions")
}

/// A generic off-origin query with `n` particles.
pub fn query(n: usize, t: f64, kappa: f64, method: Method) -> PropagatorQuery {
    let x: Vec<f64> = (0..n).map(|i| -0.3 + 0.35 * i as f64).collect();
    let y: Vec<f64> = (0..n).map(|i| -0.1 + 0.25 * i as f64).collect();
    PropagatorQuery::new(config(&x), config(&y), t, kappa, method).expect("valid query")
}
