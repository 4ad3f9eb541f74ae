use serde::{Deserialize, Serialize};

use super::{ground_distance, GroundSpec};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mixture::Mixture;
use crate::rng::derive_seed;

/// `k1 x k2` matrix of ground distances `D(p_i, q_j)` and how it was made.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub values: Matrix,
    pub spec: GroundSpec,
}

impl CostMatrix {
    /// Wraps a precomputed matrix; entries must be finite and non-negative.
    pub fn from_matrix(values: Matrix, spec: GroundSpec) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Numerical(format!("cost entry {v} is not a finite non-negative value")));
        }
        Ok(CostMatrix { values, spec })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }
}

/// `M[i][j] = D(p_i, q_j)`. Monte Carlo entries use the seed derived from
/// `(spec.seed, i, j)`, so any entry can be recomputed on its own.
pub fn cost_matrix(m1: &Mixture, m2: &Mixture, spec: &GroundSpec) -> Result<CostMatrix> {
    spec.validate()?;
    if m1.dim() != m2.dim() {
        return Err(Error::DimensionMismatch {
            expected: m1.dim(),
            got: m2.dim(),
        });
    }
    let mut values = Matrix::zeros(m1.k(), m2.k());
    for (i, p) in m1.components().iter().enumerate() {
        for (j, q) in m2.components().iter().enumerate() {
            let seed = derive_seed(spec.seed, &[i as u64, j as u64]);
            values[(i, j)] = ground_distance(p, q, spec, seed)?;
        }
    }
    CostMatrix::from_matrix(values, *spec)
}
