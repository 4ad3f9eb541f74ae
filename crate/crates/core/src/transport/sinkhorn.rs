//! Entropic transport by log-domain Sinkhorn-Knopp scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::log_sum_exp;

/// How the entropic strength `gamma` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    /// Absolute `gamma`, in cost units.
    Gamma(f64),
    /// `gamma = median(M) / level`; level 10 and 1 are the usual
    /// "Sinkhorn (10)" and "Sinkhorn (1)" settings.
    LambdaLevel(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    pub regularization: Regularization,
    pub max_iterations: usize,
    /// Stop once the L1 marginal residual falls to this value.
    pub stop_threshold: f64,
    /// Over-relaxation factor in (0, 2) applied to the potential updates;
    /// 1 is plain Sinkhorn. Values above 1 reach the same fixed point in
    /// far fewer sweeps when `gamma` is small.
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
}

fn default_relaxation() -> f64 {
    1.5
}

impl SinkhornConfig {
    pub fn lambda_level(level: f64) -> Self {
        SinkhornConfig {
            regularization: Regularization::LambdaLevel(level),
            max_iterations: 1000,
            stop_threshold: 1e-10,
            relaxation: default_relaxation(),
        }
    }

    pub fn gamma(gamma: f64) -> Self {
        SinkhornConfig {
            regularization: Regularization::Gamma(gamma),
            ..SinkhornConfig::lambda_level(1.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.regularization {
            Regularization::Gamma(g) if !(g > 0.0 && g.is_finite()) => {
                return Err(Error::param("gamma", format!("{g} is not positive")))
            }
            Regularization::LambdaLevel(l) if !(l > 0.0 && l.is_finite()) => {
                return Err(Error::param("lambda_level", format!("{l} is not positive")))
            }
            _ => {}
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::param("relaxation", format!("{} is not in (0, 2)", self.relaxation)));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be at least 1"));
        }
        if !(self.stop_threshold > 0.0) {
            return Err(Error::param("stop_threshold", "must be positive"));
        }
        Ok(())
    }

    /// Absolute `gamma` for a given cost matrix. A zero median falls back to
    /// the maximum entry, and an all-zero matrix to 1 (any value gives the
    /// same zero cost there).
    pub fn resolve_gamma(&self, cost: &Matrix) -> f64 {
        match self.regularization {
            Regularization::Gamma(g) => g,
            Regularization::LambdaLevel(level) => {
                let median = cost.median();
                let base = if median > 0.0 { median } else { cost.max() };
                if base > 0.0 {
                    base / level
                } else {
                    1.0
                }
            }
        }
    }
}

pub(crate) struct Scaled {
    pub plan: Matrix,
    pub iterations: usize,
    pub residual: f64,
}

fn relax(old: f64, fresh: f64, omega: f64) -> f64 {
    if omega == 1.0 || !old.is_finite() {
        fresh
    } else {
        (1.0 - omega) * old + omega * fresh
    }
}

/// L1 marginal violation of the plan given by the potentials. Without
/// relaxation the columns are exact after the `g` update, so only the rows
/// are measured.
fn marginal_residual(
    f: &[f64],
    g: &[f64],
    cost: &Matrix,
    eps: f64,
    alpha: &[f64],
    beta: &[f64],
    columns: bool,
) -> f64 {
    let plan = Matrix::from_fn(f.len(), g.len(), |i, j| ((f[i] + g[j] - cost[(i, j)]) / eps).exp());
    let rows: f64 = plan.row_sums().iter().zip(alpha).map(|(r, a)| (r - a).abs()).sum();
    if !columns {
        return rows;
    }
    rows + plan.col_sums().iter().zip(beta).map(|(c, b)| (c - b).abs()).sum::<f64>()
}

/// One pass of row then column potential updates at strength `eps`.
#[allow(clippy::too_many_arguments)]
fn sweep(
    f: &mut [f64],
    g: &mut [f64],
    cost: &Matrix,
    eps: f64,
    alpha: &[f64],
    beta: &[f64],
    log_a: &[f64],
    log_b: &[f64],
    buf: &mut [f64],
    omega: f64,
) {
    let (k1, k2) = (alpha.len(), beta.len());
    for i in 0..k1 {
        if alpha[i] == 0.0 {
            f[i] = f64::NEG_INFINITY;
            continue;
        }
        for j in 0..k2 {
            buf[j] = (g[j] - cost[(i, j)]) / eps;
        }
        let fresh = eps * (log_a[i] - log_sum_exp(&buf[..k2]));
        f[i] = relax(f[i], fresh, omega);
    }
    for j in 0..k2 {
        if beta[j] == 0.0 {
            g[j] = f64::NEG_INFINITY;
            continue;
        }
        for i in 0..k1 {
            buf[i] = (f[i] - cost[(i, j)]) / eps;
        }
        let fresh = eps * (log_b[j] - log_sum_exp(&buf[..k1]));
        g[j] = relax(g[j], fresh, omega);
    }
}

/// Iterations spent at each intermediate strength of the annealing schedule.
const STAGE_ITERATIONS: usize = 40;
const STAGE_TOLERANCE: f64 = 1e-6;

/// Runs Sinkhorn on dual potentials `f, g` with
/// `W_ij = exp((f_i + g_j - M_ij) / gamma)`.
///
/// Updates are over-relaxed by `cfg.relaxation`. When `gamma` is small
/// against the largest cost the potentials are warm-started by annealing:
/// sweeps at `max(M)`, then at halving strengths down to `gamma`. The fixed point is the same; only the path to
/// it changes. Annealing sweeps count towards `max_iterations`.
pub(crate) fn scale(alpha: &[f64], beta: &[f64], cost: &Matrix, gamma: f64, cfg: &SinkhornConfig) -> Result<Scaled> {
    let (k1, k2) = (alpha.len(), beta.len());
    let log_a: Vec<f64> = alpha.iter().map(|a| a.ln()).collect();
    let log_b: Vec<f64> = beta.iter().map(|b| b.ln()).collect();
    let mut f = vec![0.0; k1];
    let mut g = vec![0.0; k2];
    let mut buf = vec![0.0; k1.max(k2)];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut current = cost.max().max(gamma);
    let mut stage = 0;
    let omega = cfg.relaxation;

    while iterations < cfg.max_iterations {
        iterations += 1;
        if current > gamma && (stage == STAGE_ITERATIONS || residual <= STAGE_TOLERANCE) {
            current = (0.5 * current).max(gamma);
            stage = 0;
        }
        stage += 1;
        let eps = current;
        sweep(&mut f, &mut g, cost, eps, alpha, beta, &log_a, &log_b, &mut buf, omega);
        residual = marginal_residual(&f, &g, cost, eps, alpha, beta, omega != 1.0);
        if residual.is_nan() || f.iter().chain(&g).any(|x| x.is_nan()) {
            return Err(Error::Numerical(format!(
                "Sinkhorn scaling produced NaN at gamma {eps}"
            )));
        }
        if current == gamma && residual <= cfg.stop_threshold {
            break;
        }
    }
    if omega != 1.0 || current > gamma {
        // a closing plain sweep at the target removes the overshoot of the
        // relaxed updates and leaves the columns exact
        sweep(&mut f, &mut g, cost, gamma, alpha, beta, &log_a, &log_b, &mut buf, 1.0);
        residual = marginal_residual(&f, &g, cost, gamma, alpha, beta, false);
    }
    let plan = Matrix::from_fn(k1, k2, |i, j| ((f[i] + g[j] - cost[(i, j)]) / gamma).exp());
    Ok(Scaled {
        plan,
        iterations,
        residual,
    })
}

/// Projects a nonnegative matrix onto the transport polytope
/// (Altschuler, Weed and Rigollet's rounding): scale rows and columns down
/// to their targets, then add the rank-one correction for the deficits.
pub(crate) fn round_to_polytope(w: &mut Matrix, alpha: &[f64], beta: &[f64]) {
    let (k1, k2) = (alpha.len(), beta.len());
    let rows = w.row_sums();
    for i in 0..k1 {
        if rows[i] > alpha[i] {
            let s = alpha[i] / rows[i];
            w.row_mut(i).iter_mut().for_each(|x| *x *= s);
        }
    }
    let cols = w.col_sums();
    for j in 0..k2 {
        if cols[j] > beta[j] {
            let s = beta[j] / cols[j];
            for i in 0..k1 {
                w[(i, j)] *= s;
            }
        }
    }
    let er: Vec<f64> = w
        .row_sums()
        .iter()
        .zip(alpha)
        .map(|(r, a)| (a - r).max(0.0))
        .collect();
    let ec: Vec<f64> = w
        .col_sums()
        .iter()
        .zip(beta)
        .map(|(c, b)| (b - c).max(0.0))
        .collect();
    let mass: f64 = er.iter().sum();
    if mass > 0.0 {
        for i in 0..k1 {
            for j in 0..k2 {
                w[(i, j)] += er[i] * ec[j] / mass;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_lands_in_polytope() {
        let alpha = [0.3, 0.7];
        let beta = [0.6, 0.1, 0.3];
        let mut w = Matrix::from_rows(&[[0.2, 0.2, 0.0], [0.1, 0.0, 0.5]]).unwrap();
        round_to_polytope(&mut w, &alpha, &beta);
        for (r, a) in w.row_sums().iter().zip(alpha) {
            assert!((r - a).abs() < 1e-15);
        }
        for (c, b) in w.col_sums().iter().zip(beta) {
            assert!((c - b).abs() < 1e-15);
        }
        assert!(w.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn gamma_resolution() {
        let m = Matrix::from_rows(&[[0.0, 1.0], [3.0, 0.0]]).unwrap();
        let level = SinkhornConfig::lambda_level(10.0);
        assert_eq!(level.resolve_gamma(&m), m.median() / 10.0);
        assert_eq!(SinkhornConfig::gamma(0.5).resolve_gamma(&m), 0.5);
        assert_eq!(level.resolve_gamma(&Matrix::zeros(2, 2)), 1.0);
        assert!(SinkhornConfig::gamma(0.0).validate().is_err());
    }
}
