use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::points::Points;

/// Mean-centered projection onto the leading eigenvectors of the sample
/// covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// One unit eigenvector per row, by non-increasing eigenvalue. The
    /// largest-magnitude coordinate of each row is positive.
    pub basis: Matrix,
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    pub fn fit(data: &Points, target_dim: usize) -> Result<Pca> {
        let d = data.dim();
        if target_dim == 0 || target_dim > d {
            return Err(Error::param(
                "target_dim",
                format!("{target_dim} is not in 1..={d}"),
            ));
        }
        if data.len() < 2 {
            return Err(Error::InsufficientData("PCA needs at least 2 points".into()));
        }
        let mean = data.mean();
        let n = data.len() as f64;
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for x in data.rows() {
            for a in 0..d {
                let da = x[a] - mean[a];
                for b in a..d {
                    cov[(a, b)] += da * (x[b] - mean[b]);
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = cov[(a, b)] / (n - 1.0);
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
        let mut basis = Matrix::zeros(target_dim, d);
        let mut eigenvalues = Vec::with_capacity(target_dim);
        for (r, &k) in order.iter().take(target_dim).enumerate() {
            let col = eig.eigenvectors.column(k);
            let pivot = (0..d)
                .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()).then(b.cmp(&a)))
                .expect("d >= 1");
            let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
            for c in 0..d {
                basis[(r, c)] = sign * col[c];
            }
            eigenvalues.push(eig.eigenvalues[k].max(0.0));
        }
        Ok(Pca {
            mean,
            basis,
            eigenvalues,
        })
    }

    pub fn transform(&self, data: &Points) -> Result<Points> {
        if data.dim() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: data.dim(),
            });
        }
        let k = self.basis.rows();
        let mut out = Vec::with_capacity(data.len() * k);
        for x in data.rows() {
            for r in 0..k {
                out.push(
                    self.basis
                        .row(r)
                        .iter()
                        .zip(x.iter().zip(&self.mean))
                        .map(|(b, (xi, m))| b * (xi - m))
                        .sum(),
                );
            }
        }
        Points::from_flat(k, out)
    }
}

/// Fits PCA on `data` and projects it to `target_dim` dimensions.
pub fn pca_fit_transform(data: &Points, target_dim: usize) -> Result<(Points, Pca)> {
    let pca = Pca::fit(data, target_dim)?;
    let projected = pca.transform(data)?;
    Ok((projected, pca))
}
