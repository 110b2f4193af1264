//! Particle positions restricted to the ordered sector
//! `x_1 <= x_2 <= ... <= x_n` (the Weyl chamber).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered positions of `n` bosons on the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParticleConfig(Vec<f64>);

impl ParticleConfig {
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("particle configuration must be non-empty"));
        }
        if let Some(i) = positions.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "position x[{}] = {} is not finite",
                i + 1,
                positions[i]
            )));
        }
        if let Some(i) = positions.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::invalid(format!(
                "positions must be weakly increasing (x in the ordered sector): x[{}] = {} > x[{}] = {}",
                i + 1,
                positions[i],
                i + 2,
                positions[i + 1]
            )));
        }
        Ok(Self(positions))
    }

    /// All particles at the origin.
    pub fn origin(n: usize) -> Self {
        Self(vec![0.0; n.max(1)])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

impl std::ops::Index<usize> for ParticleConfig {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ParticleConfig {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ParticleConfig> for Vec<f64> {
    fn from(p: ParticleConfig) -> Vec<f64> {
        p.0
    }
}
