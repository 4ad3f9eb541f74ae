use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaSampler, StandardNormal};
use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::Domain;

/// Smallest admissible variance (or squared scale / shape) of a component.
pub const VARIANCE_FLOOR: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Number of standard deviations covered by the core quadrature domain.
const DOMAIN_SIGMAS: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    GaussianDiag,
    #[serde(rename = "gaussian_1d")]
    Gaussian1d,
    Gamma,
    Rayleigh,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Family::GaussianDiag => "gaussian_diag",
            Family::Gaussian1d => "gaussian_1d",
            Family::Gamma => "gamma",
            Family::Rayleigh => "rayleigh",
        };
        f.write_str(s)
    }
}

fn check_positive(name: &'static str, value: f64, floor: f64) -> Result<()> {
    if !value.is_finite() || value < floor {
        return Err(Error::param(
            name,
            format!("{value} is below the floor {floor:e} or not finite"),
        ));
    }
    Ok(())
}

/// Gaussian with diagonal covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::param("mean", "dimension must be at least 1"));
        }
        if mean.len() != var.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: var.len(),
            });
        }
        if let Some(m) = mean.iter().find(|m| !m.is_finite()) {
            return Err(Error::param("mean", format!("non-finite coordinate {m}")));
        }
        for &v in &var {
            check_positive("var", v, VARIANCE_FLOOR)?;
        }
        Ok(DiagGaussian { mean, var })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian1d {
    mu: f64,
    sigma: f64,
}

impl Gaussian1d {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::param("mu", "must be finite"));
        }
        check_positive("sigma", sigma, VARIANCE_FLOOR.sqrt())?;
        if sigma * sigma < VARIANCE_FLOOR {
            return Err(Error::param("sigma", "variance below floor"));
        }
        Ok(Gaussian1d { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Gamma distribution in shape/scale form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaDist {
    shape: f64,
    scale: f64,
}

impl GammaDist {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        check_positive("shape", shape, VARIANCE_FLOOR)?;
        check_positive("scale", scale, VARIANCE_FLOOR)?;
        Ok(GammaDist { shape, scale })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rayleigh {
    scale: f64,
}

impl Rayleigh {
    pub fn new(scale: f64) -> Result<Self> {
        check_positive("scale", scale, VARIANCE_FLOOR)?;
        Ok(Rayleigh { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// A parametric mixture component.
#[derive(Clone, Debug, PartialEq)]
pub enum Component {
    GaussianDiag(DiagGaussian),
    Gaussian1d(Gaussian1d),
    Gamma(GammaDist),
    Rayleigh(Rayleigh),
}

impl Component {
    pub fn gaussian_diag(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        DiagGaussian::new(mean, var).map(Component::GaussianDiag)
    }

    pub fn gaussian_1d(mu: f64, sigma: f64) -> Result<Self> {
        Gaussian1d::new(mu, sigma).map(Component::Gaussian1d)
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        GammaDist::new(shape, scale).map(Component::Gamma)
    }

    pub fn rayleigh(scale: f64) -> Result<Self> {
        Rayleigh::new(scale).map(Component::Rayleigh)
    }

    pub fn family(&self) -> Family {
        match self {
            Component::GaussianDiag(_) => Family::GaussianDiag,
            Component::Gaussian1d(_) => Family::Gaussian1d,
            Component::Gamma(_) => Family::Gamma,
            Component::Rayleigh(_) => Family::Rayleigh,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Component::GaussianDiag(g) => g.dim(),
            _ => 1,
        }
    }

    /// Mean and per-coordinate variance for the Gaussian variants.
    pub fn gaussian_params(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Component::GaussianDiag(g) => Some((g.mean.clone(), g.var.clone())),
            Component::Gaussian1d(g) => Some((vec![g.mu], vec![g.sigma * g.sigma])),
            _ => None,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Component::GaussianDiag(_) | Component::Gaussian1d(_))
    }

    /// Log-density; `x.len()` must equal [`Component::dim`].
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            Component::GaussianDiag(g) => diag_gaussian_log_pdf(&g.mean, &g.var, x),
            Component::Gaussian1d(g) => {
                let z = (x[0] - g.mu) / g.sigma;
                -0.5 * z * z - g.sigma.ln() - 0.5 * LN_2PI
            }
            Component::Gamma(g) => {
                let x = x[0];
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                (g.shape - 1.0) * x.ln() - x / g.scale - ln_gamma(g.shape) - g.shape * g.scale.ln()
            }
            Component::Rayleigh(r) => {
                let x = x[0];
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let s2 = r.scale * r.scale;
                x.ln() - s2.ln() - x * x / (2.0 * s2)
            }
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Component::GaussianDiag(g) => {
                for ((o, m), v) in out.iter_mut().zip(&g.mean).zip(&g.var) {
                    let z: f64 = StandardNormal.sample(rng);
                    *o = m + v.sqrt() * z;
                }
            }
            Component::Gaussian1d(g) => {
                let z: f64 = StandardNormal.sample(rng);
                out[0] = g.mu + g.sigma * z;
            }
            Component::Gamma(g) => {
                let sampler = GammaSampler::new(g.shape, g.scale)
                    .expect("parameters validated on construction");
                out[0] = sampler.sample(rng);
            }
            Component::Rayleigh(r) => {
                let u: f64 = rng.random();
                // 1 - u lies in (0, 1]
                out[0] = r.scale * (-2.0 * (1.0 - u).ln()).sqrt();
            }
        }
    }

    /// Cumulative distribution function of a one-dimensional component.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        match self {
            Component::GaussianDiag(g) if g.dim() == 1 => {
                Ok(normal_cdf((x - g.mean[0]) / g.var[0].sqrt()))
            }
            Component::Gaussian1d(g) => Ok(normal_cdf((x - g.mu) / g.sigma)),
            Component::Gamma(g) => Ok(if x <= 0.0 {
                0.0
            } else {
                gamma_lr(g.shape, x / g.scale)
            }),
            Component::Rayleigh(r) => Ok(if x <= 0.0 {
                0.0
            } else {
                -(-x * x / (2.0 * r.scale * r.scale)).exp_m1()
            }),
            _ => Err(Error::Unsupported(format!(
                "CDF of a {}-dimensional component",
                self.dim()
            ))),
        }
    }

    /// Mean and standard deviation of a one-dimensional component.
    pub fn mean_sd_1d(&self) -> Option<(f64, f64)> {
        match self {
            Component::GaussianDiag(g) if g.dim() == 1 => Some((g.mean[0], g.var[0].sqrt())),
            Component::Gaussian1d(g) => Some((g.mu, g.sigma)),
            Component::Gamma(g) => Some((g.shape * g.scale, g.shape.sqrt() * g.scale)),
            Component::Rayleigh(r) => Some((
                r.scale * (PI / 2.0).sqrt(),
                r.scale * ((4.0 - PI) / 2.0).sqrt(),
            )),
            _ => None,
        }
    }

    /// Core quadrature domain of a one-dimensional component.
    pub fn domain_1d(&self) -> Option<Domain> {
        let (mean, sd) = self.mean_sd_1d()?;
        let mut domain = Domain::new(mean - DOMAIN_SIGMAS * sd, mean + DOMAIN_SIGMAS * sd)
            .with_breakpoints([mean]);
        match self {
            Component::Gamma(g) => {
                domain.lower_limit = Some(0.0);
                if g.shape > 1.0 {
                    domain.breakpoints.push((g.shape - 1.0) * g.scale);
                }
            }
            Component::Rayleigh(r) => {
                domain.lower_limit = Some(0.0);
                domain.breakpoints.push(r.scale);
            }
            _ => {}
        }
        if let Some(limit) = domain.lower_limit {
            domain.lo = domain.lo.max(limit);
        }
        Some(domain)
    }
}

pub(crate) fn diag_gaussian_log_pdf(mean: &[f64], var: &[f64], x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((m, v), xi) in mean.iter().zip(var).zip(x) {
        let d = xi - m;
        acc += d * d / v + v.ln();
    }
    -0.5 * (acc + mean.len() as f64 * LN_2PI)
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}
