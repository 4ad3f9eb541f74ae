//! Moment lower bound and sample upper bound on `W_2` between mixtures.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::McEstimate;
use crate::matrix::Matrix;
use crate::mixture::Mixture;
use crate::numeric::mean_std;
use crate::points::squared_distance;
use crate::rng::{derive_seed, seeded};

use super::assignment::solve_assignment;

fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Square root of a symmetric positive semi-definite matrix, clamping
/// round-off negative eigenvalues to zero.
fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `W_2` between the Gaussians matching the first two moments of each
/// mixture, a lower bound on `W_2(m1, m2)`.
pub fn gelbrich_lb(m1: &Mixture, m2: &Mixture) -> Result<f64> {
    if m1.dim() != m2.dim() {
        return Err(Error::DimensionMismatch {
            expected: m1.dim(),
            got: m2.dim(),
        });
    }
    let (mu1, c1) = m1.moments()?;
    let (mu2, c2) = m2.moments()?;
    let (s1, s2) = (to_nalgebra(&c1), to_nalgebra(&c2));
    let r1 = sqrt_psd(&s1);
    let cross = sqrt_psd(&(&r1 * &s2 * &r1));
    let shift = squared_distance(&mu1, &mu2);
    let w2sq = shift + s1.trace() + s2.trace() - 2.0 * cross.trace();
    Ok(w2sq.max(0.0).sqrt())
}

/// Settings for [`empirical_w2_ub`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalW2 {
    /// Points drawn from each mixture per replicate.
    pub n: usize,
    pub order: f64,
    /// Independent replicates; their spread gives the standard error.
    pub replicates: usize,
    pub seed: u64,
}

impl EmpiricalW2 {
    pub fn new(n: usize, seed: u64) -> Self {
        EmpiricalW2 {
            n,
            order: 2.0,
            replicates: 5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("n", "need at least 2 points per side"));
        }
        if !(self.order >= 1.0 && self.order.is_finite()) {
            return Err(Error::param("order", format!("{} is not >= 1", self.order)));
        }
        if self.replicates < 2 {
            return Err(Error::param("replicates", "need at least 2 for a standard error"));
        }
        Ok(())
    }
}

/// `W_p` between `n`-point samples of the two mixtures. With uniform
/// weights on equal sample counts an optimal transport plan is a
/// permutation, so the exact value comes from an assignment solve.
/// Returns the mean over replicates and its standard error.
pub fn empirical_w2_ub(m1: &Mixture, m2: &Mixture, cfg: &EmpiricalW2) -> Result<McEstimate> {
    cfg.validate()?;
    if m1.dim() != m2.dim() {
        return Err(Error::DimensionMismatch {
            expected: m1.dim(),
            got: m2.dim(),
        });
    }
    let mut values = Vec::with_capacity(cfg.replicates);
    for r in 0..cfg.replicates as u64 {
        let xs = m1.sample(cfg.n, &mut seeded(derive_seed(cfg.seed, &[r, 0])))?;
        let ys = m2.sample(cfg.n, &mut seeded(derive_seed(cfg.seed, &[r, 1])))?;
        let half = 0.5 * cfg.order;
        let cost = Matrix::from_fn(cfg.n, cfg.n, |i, j| {
            squared_distance(xs.row(i), ys.row(j)).powf(half)
        });
        let (_, total) = solve_assignment(&cost)?;
        values.push((total / cfg.n as f64).powf(1.0 / cfg.order));
    }
    let (estimate, sd) = mean_std(&values);
    Ok(McEstimate {
        estimate,
        stderr: sd / (cfg.replicates as f64).sqrt(),
        samples: cfg.n * cfg.replicates,
    })
}
