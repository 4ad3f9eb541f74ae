use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Weight sums within this distance of 1 are renormalized silently.
pub const MARGINAL_TOLERANCE: f64 = 1e-9;

/// Which solver produced a plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverTag {
    Exact,
    Sinkhorn,
}

/// A coupling `W` with row sums `alpha` and column sums `beta`, and its cost
/// `<W, M>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub coupling: Matrix,
    pub value: f64,
    pub solver: SolverTag,
    pub iterations: usize,
    /// L1 marginal violation reported by the solver before any final
    /// projection onto the polytope.
    pub residual: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl TransportPlan {
    /// Entries strictly greater than zero.
    pub fn support_size(&self) -> usize {
        self.coupling.iter().filter(|w| **w > 0.0).count()
    }

    /// Largest absolute deviation of the coupling's marginals from `alpha`, `beta`.
    pub fn marginal_error(&self) -> f64 {
        let rows = self.coupling.row_sums();
        let cols = self.coupling.col_sums();
        rows.iter()
            .zip(&self.alpha)
            .chain(cols.iter().zip(&self.beta))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Validates a probability vector and renormalizes it if its sum is off by at
/// most [`MARGINAL_TOLERANCE`].
pub fn normalize_marginal(name: &str, w: &[f64]) -> Result<Vec<f64>> {
    if w.is_empty() {
        return Err(Error::Infeasible(format!("{name} is empty")));
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Infeasible(format!(
            "{name} has negative or non-finite entries"
        )));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > MARGINAL_TOLERANCE {
        return Err(Error::Infeasible(format!("{name} sums to {sum}, not 1")));
    }
    Ok(w.iter().map(|x| x / sum).collect())
}

pub(crate) fn check_shape(alpha: &[f64], beta: &[f64], cost: &Matrix) -> Result<()> {
    if cost.rows() != alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: alpha.len(),
            got: cost.rows(),
        });
    }
    if cost.cols() != beta.len() {
        return Err(Error::DimensionMismatch {
            expected: beta.len(),
            got: cost.cols(),
        });
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("cost matrix has non-finite entries".into()));
    }
    Ok(())
}

/// True iff every row holds an entry of at least `alpha_i / k2` and every
/// column one of at least `beta_j / k1`, within 1e-12.
pub fn coupling_floor_check(plan: &TransportPlan) -> bool {
    let w = &plan.coupling;
    let (k1, k2) = (w.rows(), w.cols());
    let rows_ok = (0..k1).all(|i| {
        let max = w.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max >= plan.alpha[i] / k2 as f64 - 1e-12
    });
    let cols_ok = (0..k2).all(|j| {
        let max = (0..k1).map(|i| w[(i, j)]).fold(f64::NEG_INFINITY, f64::max);
        max >= plan.beta[j] / k1 as f64 - 1e-12
    });
    rows_ok && cols_ok
}
