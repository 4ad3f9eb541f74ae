//! Parametric components, finite mixtures, kernel density estimators and
//! the exponential-family view of Gaussian components.

mod component;
mod expfam;
mod kde;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use component::{
    Component, DiagGaussian, Family, GammaDist, Gaussian1d, Rayleigh, VARIANCE_FLOOR,
};
pub(crate) use component::{diag_gaussian_log_pdf, normal_cdf};
pub use expfam::{exp_family_view, ExpFamily, ExpFamilyView};
pub use kde::Kde;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::log_sum_exp;
use crate::points::Points;
use crate::quadrature::Domain;

/// Weight sums within this distance of 1 are renormalized; others rejected.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

/// Something that can be evaluated pointwise in log domain and sampled.
pub trait Density {
    fn dim(&self) -> usize;

    /// Log-density at `x`; `x.len()` must equal `dim()`.
    fn log_density(&self, x: &[f64]) -> f64;

    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]);

    fn draw<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Points {
        let dim = self.dim();
        let mut data = vec![0.0; count * dim];
        for row in data.chunks_exact_mut(dim) {
            self.draw_into(rng, row);
        }
        Points::from_flat(dim, data).expect("dimension is positive")
    }
}

impl Density for Component {
    fn dim(&self) -> usize {
        Component::dim(self)
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_pdf(x)
    }

    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        self.sample_into(rng, out)
    }
}

/// One-dimensional densities with a CDF and a quadrature domain.
pub trait Univariate {
    fn log_pdf_at(&self, x: f64) -> f64;
    fn cdf_at(&self, x: f64) -> Result<f64>;
    /// `None` when the density is not one-dimensional.
    fn domain(&self) -> Option<Domain>;
}

impl Univariate for Component {
    fn log_pdf_at(&self, x: f64) -> f64 {
        self.log_pdf(&[x])
    }

    fn cdf_at(&self, x: f64) -> Result<f64> {
        self.cdf(x)
    }

    fn domain(&self) -> Option<Domain> {
        self.domain_1d()
    }
}

impl Univariate for Mixture {
    fn log_pdf_at(&self, x: f64) -> f64 {
        self.log_density(&[x])
    }

    fn cdf_at(&self, x: f64) -> Result<f64> {
        self.cdf(x)
    }

    fn domain(&self) -> Option<Domain> {
        self.domain_1d()
    }
}

/// A finite mixture `sum_i w_i p_i` of components of one family and dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "repr::MixtureRepr", into = "repr::MixtureRepr")]
pub struct Mixture {
    weights: Vec<f64>,
    components: Vec<Component>,
}

impl Mixture {
    pub fn new(weights: Vec<f64>, components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidMixture("no components".into()));
        }
        if weights.len() != components.len() {
            return Err(Error::Schema {
                field: "weights".into(),
                reason: format!(
                    "{} weights for {} components",
                    weights.len(),
                    components.len()
                ),
            });
        }
        let family = components[0].family();
        let dim = components[0].dim();
        for (i, c) in components.iter().enumerate() {
            if c.family() != family {
                return Err(Error::InvalidMixture(format!(
                    "component {i} is {} but component 0 is {family}",
                    c.family()
                )));
            }
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                });
            }
        }
        let weights = normalize_weights(weights)?;
        Ok(Mixture {
            weights,
            components,
        })
    }

    pub fn single(component: Component) -> Self {
        Mixture {
            weights: vec![1.0],
            components: vec![component],
        }
    }

    pub fn uniform(components: Vec<Component>) -> Result<Self> {
        let k = components.len().max(1);
        Mixture::new(vec![1.0 / k as f64; components.len()], components)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn family(&self) -> Family {
        self.components[0].family()
    }

    pub fn is_gaussian(&self) -> bool {
        self.components[0].is_gaussian()
    }

    /// `log m(x)` with a dimension check.
    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.log_density(x))
    }

    /// Ancestral sampling: component index from the weights, then a draw
    /// from that component.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Points> {
        if count == 0 {
            return Err(Error::param("count", "must be at least 1"));
        }
        Ok(self.draw(count, rng))
    }

    fn pick_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        // Rounding left u above the running sum: take the last positive weight.
        self.weights
            .iter()
            .rposition(|&w| w > 0.0)
            .unwrap_or(self.k() - 1)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (w, c) in self.weights.iter().zip(&self.components) {
            acc += w * c.cdf(x)?;
        }
        Ok(acc.clamp(0.0, 1.0))
    }

    /// Core quadrature domain covering every component.
    pub fn domain_1d(&self) -> Option<Domain> {
        let mut domains = self.components.iter().map(Component::domain_1d);
        let first = domains.next()??;
        domains.try_fold(first, |acc, d| Some(acc.union(&d?)))
    }

    /// Exact mean vector and covariance matrix of a Gaussian mixture.
    pub fn moments(&self) -> Result<(Vec<f64>, Matrix)> {
        if !self.is_gaussian() {
            return Err(Error::Unsupported(format!(
                "moments of a {} mixture",
                self.family()
            )));
        }
        let d = self.dim();
        let params: Vec<_> = self
            .components
            .iter()
            .map(|c| c.gaussian_params().expect("gaussian checked"))
            .collect();
        let mut mean = vec![0.0; d];
        for (w, (mu, _)) in self.weights.iter().zip(&params) {
            for (m, x) in mean.iter_mut().zip(mu) {
                *m += w * x;
            }
        }
        // sum_i w_i (Sigma_i + (mu_i - mu)(mu_i - mu)^T)
        let mut cov = Matrix::zeros(d, d);
        for (w, (mu, var)) in self.weights.iter().zip(&params) {
            for a in 0..d {
                cov[(a, a)] += w * var[a];
                let da = mu[a] - mean[a];
                for b in 0..d {
                    cov[(a, b)] += w * da * (mu[b] - mean[b]);
                }
            }
        }
        Ok((mean, cov))
    }
}

/// Exact mixture mean and covariance; see [`Mixture::moments`].
pub fn mixture_moments(m: &Mixture) -> Result<(Vec<f64>, Matrix)> {
    m.moments()
}

impl Density for Mixture {
    fn dim(&self) -> usize {
        Mixture::dim(self)
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if self.k() == 1 {
            return self.components[0].log_pdf(x);
        }
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| {
                if *w > 0.0 {
                    w.ln() + c.log_pdf(x)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        log_sum_exp(&terms)
    }

    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let i = self.pick_component(rng);
        self.components[i].sample_into(rng, out);
    }
}

/// Validates a weight vector and renormalizes small deviations of its sum.
pub fn normalize_weights(weights: Vec<f64>) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::Schema {
            field: "weights".into(),
            reason: "empty".into(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::Schema {
            field: "weights".into(),
            reason: format!("entry {w} is negative or not finite"),
        });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::Schema {
            field: "weights".into(),
            reason: format!("weights sum to {sum}, not 1"),
        });
    }
    // sums already at rounding level are kept so that saved mixtures load
    // back bit for bit
    if (sum - 1.0).abs() <= 4.0 * f64::EPSILON * weights.len() as f64 {
        return Ok(weights);
    }
    Ok(weights.into_iter().map(|w| w / sum).collect())
}

mod repr {
    use serde::{Deserialize, Serialize};

    use super::{Component, Mixture};
    use crate::error::Error;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct DiagRepr {
        mean: Vec<f64>,
        var: Vec<f64>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Gaussian1dRepr {
        mu: f64,
        sigma: f64,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct GammaRepr {
        shape: f64,
        scale: f64,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct RayleighRepr {
        scale: f64,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(tag = "family", rename_all = "snake_case")]
    pub enum MixtureRepr {
        GaussianDiag {
            weights: Vec<f64>,
            components: Vec<DiagRepr>,
        },
        #[serde(rename = "gaussian_1d")]
        Gaussian1d {
            weights: Vec<f64>,
            components: Vec<Gaussian1dRepr>,
        },
        Gamma {
            weights: Vec<f64>,
            components: Vec<GammaRepr>,
        },
        Rayleigh {
            weights: Vec<f64>,
            components: Vec<RayleighRepr>,
        },
    }

    fn at(i: usize, e: Error) -> Error {
        match e {
            Error::InvalidParameter { name, reason } => Error::Schema {
                field: format!("components[{i}].{name}"),
                reason,
            },
            Error::DimensionMismatch { expected, got } => Error::Schema {
                field: format!("components[{i}]"),
                reason: format!("dimension mismatch: expected {expected}, got {got}"),
            },
            other => other,
        }
    }

    fn build<T>(
        weights: Vec<f64>,
        components: Vec<T>,
        f: impl Fn(T) -> crate::error::Result<Component>,
    ) -> Result<Mixture, Error> {
        let comps = components
            .into_iter()
            .enumerate()
            .map(|(i, c)| f(c).map_err(|e| at(i, e)))
            .collect::<Result<Vec<_>, _>>()?;
        Mixture::new(weights, comps)
    }

    impl TryFrom<MixtureRepr> for Mixture {
        type Error = Error;

        fn try_from(r: MixtureRepr) -> Result<Self, Error> {
            match r {
                MixtureRepr::GaussianDiag {
                    weights,
                    components,
                } => build(weights, components, |c| Component::gaussian_diag(c.mean, c.var)),
                MixtureRepr::Gaussian1d {
                    weights,
                    components,
                } => build(weights, components, |c| Component::gaussian_1d(c.mu, c.sigma)),
                MixtureRepr::Gamma {
                    weights,
                    components,
                } => build(weights, components, |c| Component::gamma(c.shape, c.scale)),
                MixtureRepr::Rayleigh {
                    weights,
                    components,
                } => build(weights, components, |c| Component::rayleigh(c.scale)),
            }
        }
    }

    impl From<Mixture> for MixtureRepr {
        fn from(m: Mixture) -> Self {
            let weights = m.weights;
            let comps = m.components;
            match comps[0].family() {
                super::Family::GaussianDiag => MixtureRepr::GaussianDiag {
                    weights,
                    components: comps
                        .into_iter()
                        .map(|c| match c {
                            Component::GaussianDiag(g) => DiagRepr {
                                mean: g.mean().to_vec(),
                                var: g.var().to_vec(),
                            },
                            _ => unreachable!("homogeneous mixture"),
                        })
                        .collect(),
                },
                super::Family::Gaussian1d => MixtureRepr::Gaussian1d {
                    weights,
                    components: comps
                        .into_iter()
                        .map(|c| match c {
                            Component::Gaussian1d(g) => Gaussian1dRepr {
                                mu: g.mu(),
                                sigma: g.sigma(),
                            },
                            _ => unreachable!("homogeneous mixture"),
                        })
                        .collect(),
                },
                super::Family::Gamma => MixtureRepr::Gamma {
                    weights,
                    components: comps
                        .into_iter()
                        .map(|c| match c {
                            Component::Gamma(g) => GammaRepr {
                                shape: g.shape(),
                                scale: g.scale(),
                            },
                            _ => unreachable!("homogeneous mixture"),
                        })
                        .collect(),
                },
                super::Family::Rayleigh => MixtureRepr::Rayleigh {
                    weights,
                    components: comps
                        .into_iter()
                        .map(|c| match c {
                            Component::Rayleigh(r) => RayleighRepr { scale: r.scale() },
                            _ => unreachable!("homogeneous mixture"),
                        })
                        .collect(),
                },
            }
        }
    }
}
