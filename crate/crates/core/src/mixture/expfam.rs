//! Gaussians as an exponential family with sufficient statistic `(x, x^2)`
//! per coordinate. For one coordinate the natural parameters are
//! `theta1 = mu / s2`, `theta2 = -1 / (2 s2)` and the log-normalizer is
//! `F = -theta1^2 / (4 theta2) + log(pi / -theta2) / 2`.

use std::f64::consts::PI;

use super::Component;
use crate::error::{Error, Result};

/// Which family a natural-parameter vector belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpFamily {
    /// Diagonal Gaussian; `theta` interleaves `(theta1, theta2)` per coordinate.
    GaussianDiag { dim: usize },
    /// Same parameterization, mapping back to [`Component::Gaussian1d`].
    Gaussian1d,
}

impl ExpFamily {
    pub fn dim(&self) -> usize {
        match self {
            ExpFamily::GaussianDiag { dim } => *dim,
            ExpFamily::Gaussian1d => 1,
        }
    }

    pub fn theta_len(&self) -> usize {
        2 * self.dim()
    }

    /// Membership in the natural domain: every `theta2 < 0`.
    pub fn in_domain(&self, theta: &[f64]) -> bool {
        theta.len() == self.theta_len()
            && theta.iter().all(|t| t.is_finite())
            && theta.chunks_exact(2).all(|t| t[1] < 0.0)
    }

    /// Log-normalizer `F(theta)`; outside the natural domain this errors.
    pub fn log_normalizer(&self, theta: &[f64]) -> Result<f64> {
        if !self.in_domain(theta) {
            return Err(Error::param("theta", "outside the natural parameter domain"));
        }
        Ok(theta
            .chunks_exact(2)
            .map(|t| -t[0] * t[0] / (4.0 * t[1]) + 0.5 * (PI / -t[1]).ln())
            .sum())
    }

    /// Component with natural parameters `theta`.
    pub fn component(&self, theta: &[f64]) -> Result<Component> {
        if !self.in_domain(theta) {
            return Err(Error::param("theta", "outside the natural parameter domain"));
        }
        let (mean, var): (Vec<f64>, Vec<f64>) = theta
            .chunks_exact(2)
            .map(|t| {
                let var = -0.5 / t[1];
                (t[0] * var, var)
            })
            .unzip();
        match self {
            ExpFamily::GaussianDiag { .. } => Component::gaussian_diag(mean, var),
            ExpFamily::Gaussian1d => Component::gaussian_1d(mean[0], var[0].sqrt()),
        }
    }
}

/// Natural parameters of a component together with `F(theta)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpFamilyView {
    pub family: ExpFamily,
    pub theta: Vec<f64>,
    pub log_normalizer: f64,
}

impl ExpFamilyView {
    /// `<theta, t(x)> - F(theta)`; carrier measure is Lebesgue.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let dot: f64 = self
            .theta
            .chunks_exact(2)
            .zip(x)
            .map(|(t, xi)| t[0] * xi + t[1] * xi * xi)
            .sum();
        dot - self.log_normalizer
    }

    pub fn to_component(&self) -> Result<Component> {
        self.family.component(&self.theta)
    }
}

pub fn exp_family_view(c: &Component) -> Result<ExpFamilyView> {
    let family = match c {
        Component::GaussianDiag(g) => ExpFamily::GaussianDiag { dim: g.dim() },
        Component::Gaussian1d(_) => ExpFamily::Gaussian1d,
        other => {
            return Err(Error::Unsupported(format!(
                "exponential-family view of a {} component",
                other.family()
            )))
        }
    };
    let (mean, var) = c.gaussian_params().expect("gaussian variant");
    let theta: Vec<f64> = mean
        .iter()
        .zip(&var)
        .flat_map(|(m, v)| [m / v, -0.5 / v])
        .collect();
    let log_normalizer = family.log_normalizer(&theta)?;
    Ok(ExpFamilyView {
        family,
        theta,
        log_normalizer,
    })
}
