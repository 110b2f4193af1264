//! Imaginary-time propagator of the one-dimensional delta-Bose gas,
//! `H = -sum d^2/dx_j^2 - 2 kappa sum_{j<k} delta(x_j - x_k)`, restricted to
//! the ordered sector, by several exact formulas and two independent oracles.

pub mod bethe;
pub mod combinatorics;
pub mod error;
pub mod oracles;
pub mod particles;
pub mod propagator;
pub mod quadrature;

pub use combinatorics::{Composition, Permutation};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use oracles::{McConfig, McEstimate, PdeConfig, PdeResult};
pub use particles::ParticleConfig;
pub use propagator::{EvalOptions, Method, PropagatorQuery, PropagatorResult};
