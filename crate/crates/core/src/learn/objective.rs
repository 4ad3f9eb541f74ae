use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mixture::{Component, Mixture};
use crate::numeric::log_sum_exp;

/// How the softmin coupling enters the gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// The coupling is held fixed while differentiating.
    #[default]
    StopGradient,
    /// Differentiate through the softmax as well.
    ThroughSoftmin,
}

/// Objective value, its gradients and the coupling it used.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    /// `dF / d mu_jd`, one row per mixture component.
    pub grad_mean: Matrix,
    /// `dF / d log sigma_jd`.
    pub grad_log_sigma: Matrix,
    /// The mixture weights do not enter the objective; always zero.
    pub grad_weights: Vec<f64>,
    pub coupling: Matrix,
    /// `KL(p_i : q_j)` for the batch.
    pub kl: Matrix,
}

struct Params {
    mean: Vec<Vec<f64>>,
    var: Vec<Vec<f64>>,
}

fn gaussian_params(cs: &[Component], dim: usize) -> Result<Params> {
    let mut mean = Vec::with_capacity(cs.len());
    let mut var = Vec::with_capacity(cs.len());
    for c in cs {
        let (m, v) = c.gaussian_params().ok_or_else(|| {
            Error::Unsupported(format!("closed-form KL for a {} component", c.family()))
        })?;
        if m.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.len(),
            });
        }
        mean.push(m);
        var.push(v);
    }
    Ok(Params { mean, var })
}

fn kl_matrix(p: &Params, q: &Params) -> Matrix {
    Matrix::from_fn(p.mean.len(), q.mean.len(), |i, j| {
        crate::ground::gaussian::kl_diag(&p.mean[i], &p.var[i], &q.mean[j], &q.var[j])
    })
}

fn softmin_rows(kl: &Matrix, lambda: f64) -> Matrix {
    let (n, m) = (kl.rows(), kl.cols());
    let row_mass = 1.0 / n as f64;
    let mut w = Matrix::zeros(n, m);
    let mut logits = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            logits[j] = -lambda * kl[(i, j)];
        }
        let lse = log_sum_exp(&logits);
        for j in 0..m {
            w[(i, j)] = row_mass * (logits[j] - lse).exp();
        }
    }
    w
}

/// Softmin coupling `w_ij = softmax_j(-lambda KL(p_i : q_j)) / n`; each row
/// sums to `1/n`.
pub fn softmin_weights(batch: &[Component], gmm: &Mixture, lambda: f64) -> Result<Matrix> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("{lambda} is not positive")));
    }
    if batch.is_empty() {
        return Err(Error::InsufficientData("empty batch".into()));
    }
    let dim = gmm.dim();
    let p = gaussian_params(batch, dim)?;
    let q = gaussian_params(gmm.components(), dim)?;
    Ok(softmin_rows(&kl_matrix(&p, &q), lambda))
}

/// `F = sum_ij w_ij KL(p_i : q_j)` with the softmin coupling, plus
/// gradients in `(mu_j, log sigma_j)`.
pub fn scrot_kl_objective(
    batch: &[Component],
    gmm: &Mixture,
    lambda: f64,
    mode: GradientMode,
) -> Result<ObjectiveEval> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("{lambda} is not positive")));
    }
    if batch.is_empty() {
        return Err(Error::InsufficientData("empty batch".into()));
    }
    let dim = gmm.dim();
    let p = gaussian_params(batch, dim)?;
    let q = gaussian_params(gmm.components(), dim)?;
    let kl = kl_matrix(&p, &q);
    let coupling = softmin_rows(&kl, lambda);
    let n = batch.len() as f64;
    // dF/dC_ij: w_ij with the coupling frozen; through the softmax it is
    // (s_ij - lambda s_ij (C_ij - sum_k s_ik C_ik)) / n with s = n w.
    let dc = match mode {
        GradientMode::StopGradient => coupling.clone(),
        GradientMode::ThroughSoftmin => {
            let mut dc = coupling.clone();
            for i in 0..kl.rows() {
                let mean_cost: f64 = (0..kl.cols())
                    .map(|j| n * coupling[(i, j)] * kl[(i, j)])
                    .sum();
                for j in 0..kl.cols() {
                    let s = n * coupling[(i, j)];
                    dc[(i, j)] = (s - lambda * s * (kl[(i, j)] - mean_cost)) / n;
                }
            }
            dc
        }
    };
    Ok(evaluate(&p, &q, kl, coupling, &dc))
}

/// Objective and gradients for a caller-supplied coupling held fixed.
pub fn scrot_kl_objective_with_coupling(
    batch: &[Component],
    gmm: &Mixture,
    coupling: &Matrix,
) -> Result<ObjectiveEval> {
    let dim = gmm.dim();
    let p = gaussian_params(batch, dim)?;
    let q = gaussian_params(gmm.components(), dim)?;
    if coupling.rows() != batch.len() || coupling.cols() != gmm.k() {
        return Err(Error::DimensionMismatch {
            expected: batch.len() * gmm.k(),
            got: coupling.rows() * coupling.cols(),
        });
    }
    let kl = kl_matrix(&p, &q);
    Ok(evaluate(&p, &q, kl, coupling.clone(), coupling))
}

fn evaluate(p: &Params, q: &Params, kl: Matrix, coupling: Matrix, dc: &Matrix) -> ObjectiveEval {
    let (n, m) = (kl.rows(), kl.cols());
    let dim = q.mean.first().map_or(0, Vec::len);
    let value = coupling.dot(&kl);
    let mut grad_mean = Matrix::zeros(m, dim);
    let mut grad_log_sigma = Matrix::zeros(m, dim);
    for i in 0..n {
        for j in 0..m {
            let g = dc[(i, j)];
            if g == 0.0 {
                continue;
            }
            for d in 0..dim {
                let v = q.var[j][d];
                let diff = q.mean[j][d] - p.mean[i][d];
                // KL = (s/v + diff^2/v - 1 + log v - log s) / 2 and v = sigma^2
                grad_mean[(j, d)] += g * diff / v;
                grad_log_sigma[(j, d)] += g * (1.0 - (p.var[i][d] + diff * diff) / v);
            }
        }
    }
    ObjectiveEval {
        value,
        grad_mean,
        grad_log_sigma,
        grad_weights: vec![0.0; m],
        coupling,
        kl,
    }
}
