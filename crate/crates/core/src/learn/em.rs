use crate::error::{Error, Result};
use crate::mixture::{diag_gaussian_log_pdf, Component, Mixture};
use crate::numeric::log_sum_exp;
use crate::points::Points;
use crate::rng::seeded;

use super::init::farthest_points;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmConfig {
    pub components: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop when the relative change of the log-likelihood drops below this.
    pub tolerance: f64,
    pub variance_floor: f64,
}

impl EmConfig {
    pub fn new(components: usize, seed: u64) -> Self {
        EmConfig {
            components,
            seed,
            max_iterations: 200,
            tolerance: 1e-6,
            variance_floor: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EmFit {
    pub mixture: Mixture,
    /// Total data log-likelihood before every M step and at termination.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
}

/// Diagonal-covariance EM; see [`fit_em_with`].
pub fn fit_em(data: &Points, m: usize, seed: u64) -> Result<Mixture> {
    Ok(fit_em_with(data, &EmConfig::new(m, seed))?.mixture)
}

/// EM for a diagonal Gaussian mixture. Means start at farthest-point seeds,
/// variances at the data variance. A component whose responsibility mass
/// vanishes is re-seeded at the data point with the lowest likelihood.
pub fn fit_em_with(data: &Points, cfg: &EmConfig) -> Result<EmFit> {
    let m = cfg.components;
    let n = data.len();
    let d = data.dim();
    let seeds = farthest_points(data, m, &mut seeded(cfg.seed))?;
    let data_var: Vec<f64> = data
        .variance()
        .into_iter()
        .map(|v| v.max(cfg.variance_floor))
        .collect();
    let mut weights = vec![1.0 / m as f64; m];
    let mut means: Vec<Vec<f64>> = seeds.iter().map(|&i| data.row(i).to_vec()).collect();
    let mut vars = vec![data_var.clone(); m];

    let mut resp = vec![0.0; n * m];
    let mut point_ll = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut terms = vec![0.0; m];
    loop {
        // E step
        let mut ll = 0.0;
        for (i, x) in data.rows().enumerate() {
            for j in 0..m {
                terms[j] = if weights[j] > 0.0 {
                    weights[j].ln() + diag_gaussian_log_pdf(&means[j], &vars[j], x)
                } else {
                    f64::NEG_INFINITY
                };
            }
            let lse = log_sum_exp(&terms);
            point_ll[i] = lse;
            ll += lse;
            for j in 0..m {
                resp[i * m + j] = (terms[j] - lse).exp();
            }
        }
        if !ll.is_finite() {
            return Err(Error::Numerical("EM log-likelihood is not finite".into()));
        }
        let converged = history
            .last()
            .is_some_and(|prev: &f64| ((ll - prev) / prev.abs().max(1e-300)).abs() < cfg.tolerance);
        history.push(ll);
        if converged || iterations >= cfg.max_iterations {
            break;
        }
        iterations += 1;

        // M step
        let mut worst: Vec<usize> = (0..n).collect();
        worst.sort_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]).then(a.cmp(&b)));
        let mut reseeded = 0;
        for j in 0..m {
            let mass: f64 = (0..n).map(|i| resp[i * m + j]).sum();
            if mass <= 1e-10 * n as f64 {
                let i = worst[reseeded.min(n - 1)];
                reseeded += 1;
                means[j] = data.row(i).to_vec();
                vars[j] = data_var.clone();
                weights[j] = 1.0 / n as f64;
                continue;
            }
            weights[j] = mass / n as f64;
            let mut mu = vec![0.0; d];
            for (i, x) in data.rows().enumerate() {
                let r = resp[i * m + j];
                for k in 0..d {
                    mu[k] += r * x[k];
                }
            }
            mu.iter_mut().for_each(|v| *v /= mass);
            let mut var = vec![0.0; d];
            for (i, x) in data.rows().enumerate() {
                let r = resp[i * m + j];
                for k in 0..d {
                    let dx = x[k] - mu[k];
                    var[k] += r * dx * dx;
                }
            }
            for v in &mut var {
                *v = (*v / mass).max(cfg.variance_floor);
            }
            means[j] = mu;
            vars[j] = var;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }

    let comps = means
        .into_iter()
        .zip(vars)
        .map(|(mu, v)| Component::gaussian_diag(mu, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(EmFit {
        mixture: Mixture::new(weights, comps)?,
        log_likelihood: history,
        iterations,
    })
}
