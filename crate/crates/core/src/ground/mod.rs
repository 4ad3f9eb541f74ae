//! Ground distances between individual components and cost-matrix assembly.

mod cost;
pub mod gaussian;
pub mod numeric;
pub mod quantile;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cost::{cost_matrix, CostMatrix};
pub use gaussian::{kl_gaussian, renyi_gaussian, tv_gaussian_1d, w2_gaussian, w2_squared_gaussian};
pub use numeric::{js_alpha_1d, kl_numeric_1d, renyi_numeric_1d, tv_numeric_1d};
pub use quantile::{quantile, wasserstein_1d_quantile};

use crate::error::{Error, Result};
use crate::estimators::{mc_js, mc_kl, mc_tv, McConfig, McEstimate};
use crate::mixture::{Component, Density, Mixture};

/// Which ground distance populates a cost matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GroundKind {
    Kl,
    Tv,
    W2,
    W2Squared,
    Renyi(f64),
    /// Square root of the alpha-Jensen-Shannon divergence.
    JsSqrt(f64),
    /// `W_p` through quantile functions (one-dimensional only).
    Wasserstein1d(f64),
}

impl GroundKind {
    /// Kinds that are metrics on components, for which the transport value
    /// is itself a metric on mixtures.
    pub fn is_metric(&self) -> bool {
        match self {
            GroundKind::Tv | GroundKind::W2 | GroundKind::Wasserstein1d(_) => true,
            GroundKind::JsSqrt(a) => *a == 0.5,
            _ => false,
        }
    }

    fn validate(self) -> Result<Self> {
        match self {
            GroundKind::Renyi(a) | GroundKind::JsSqrt(a) => {
                gaussian::check_alpha(a)?;
            }
            GroundKind::Wasserstein1d(p) if !(p >= 1.0 && p.is_finite()) => {
                return Err(Error::param("p", format!("order {p} is not >= 1")));
            }
            _ => {}
        }
        Ok(self)
    }
}

impl fmt::Display for GroundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundKind::Kl => f.write_str("kl"),
            GroundKind::Tv => f.write_str("tv"),
            GroundKind::W2 => f.write_str("w2"),
            GroundKind::W2Squared => f.write_str("w2sq"),
            GroundKind::Renyi(a) => write!(f, "renyi:{a}"),
            GroundKind::JsSqrt(a) => write!(f, "js:{a}"),
            GroundKind::Wasserstein1d(p) => write!(f, "w1d:{p}"),
        }
    }
}

impl FromStr for GroundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let number = |what: &'static str| -> Result<f64> {
            let a = arg.ok_or_else(|| Error::param(what, format!("`{s}` needs `{name}:<value>`")))?;
            a.parse::<f64>()
                .map_err(|_| Error::param(what, format!("`{a}` is not a number")))
        };
        let kind = match (name, arg) {
            ("kl", None) => GroundKind::Kl,
            ("tv", None) => GroundKind::Tv,
            ("w2", None) => GroundKind::W2,
            ("w2sq", None) => GroundKind::W2Squared,
            ("renyi", _) => GroundKind::Renyi(number("alpha")?),
            ("js", _) => GroundKind::JsSqrt(number("alpha")?),
            ("w1d", _) => GroundKind::Wasserstein1d(number("p")?),
            _ => {
                return Err(Error::param(
                    "ground",
                    format!("unknown ground distance `{s}` (kl|tv|w2|w2sq|renyi:<a>|js:<a>|w1d:<p>)"),
                ))
            }
        };
        kind.validate()
    }
}

impl TryFrom<String> for GroundKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GroundKind> for String {
    fn from(k: GroundKind) -> String {
        k.to_string()
    }
}

/// Ground distance plus the estimator settings used where no closed form
/// exists.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundSpec {
    pub kind: GroundKind,
    pub mc_samples: usize,
    pub quad_tol: f64,
    pub seed: u64,
}

impl GroundSpec {
    pub fn new(kind: GroundKind) -> Self {
        GroundSpec {
            kind,
            mc_samples: 5000,
            quad_tol: 1e-8,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mc_samples(mut self, samples: usize) -> Self {
        self.mc_samples = samples;
        self
    }

    pub fn with_quad_tol(mut self, tol: f64) -> Self {
        self.quad_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if !(self.quad_tol > 0.0) {
            return Err(Error::param("quad_tol", "must be positive"));
        }
        McConfig::new(self.mc_samples, self.seed).validate()
    }
}

impl From<GroundKind> for GroundSpec {
    fn from(kind: GroundKind) -> Self {
        GroundSpec::new(kind)
    }
}

fn one_dimensional(c: &Component) -> bool {
    c.dim() == 1
}

/// `D(p, q)` for the configured kind. `seed` drives any Monte Carlo
/// fallback (multivariate TV and Jensen-Shannon).
pub fn ground_distance(p: &Component, q: &Component, spec: &GroundSpec, seed: u64) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let both_gaussian = p.is_gaussian() && q.is_gaussian();
    let flat = one_dimensional(p);
    let tol = spec.quad_tol;
    let mc = || McConfig::new(spec.mc_samples, seed);
    match spec.kind {
        GroundKind::Kl if both_gaussian => kl_gaussian(p, q),
        GroundKind::Kl if flat => kl_numeric_1d(p, q, tol),
        GroundKind::Kl => Ok(mc_kl(&single(p), &single(q), &mc())?.estimate.max(0.0)),
        GroundKind::Tv if both_gaussian && flat => tv_gaussian_1d(p, q),
        GroundKind::Tv if flat => tv_numeric_1d(p, q, tol),
        GroundKind::Tv => Ok(tv_mc(p, q, &mc())?.estimate),
        GroundKind::W2 if both_gaussian => w2_gaussian(p, q),
        GroundKind::W2Squared if both_gaussian => w2_squared_gaussian(p, q),
        GroundKind::W2 if flat => wasserstein_1d_quantile(p, q, 2.0),
        GroundKind::W2Squared if flat => Ok(wasserstein_1d_quantile(p, q, 2.0)?.powi(2)),
        GroundKind::Renyi(a) if both_gaussian => renyi_gaussian(p, q, a),
        GroundKind::Renyi(a) if flat => renyi_numeric_1d(p, q, a, tol),
        GroundKind::JsSqrt(a) if flat => Ok(js_alpha_1d(p, q, a, tol)?.sqrt()),
        GroundKind::JsSqrt(a) => Ok(js_alpha(p, q, a, &mc())?.estimate.max(0.0).sqrt()),
        GroundKind::Wasserstein1d(order) if flat => wasserstein_1d_quantile(p, q, order),
        kind => Err(Error::Unsupported(format!(
            "ground distance {kind} between {}-dimensional {} components",
            p.dim(),
            p.family()
        ))),
    }
}

fn single(c: &Component) -> Mixture {
    Mixture::single(c.clone())
}

/// Monte Carlo total variation between components or mixtures.
pub fn tv_mc<P: Density, Q: Density>(p: &P, q: &Q, cfg: &McConfig) -> Result<McEstimate> {
    mc_tv(p, q, cfg)
}

/// `JS_alpha` between components or mixtures: quadrature in one dimension
/// (reported with zero standard error), Monte Carlo otherwise.
pub fn js_alpha<P, Q>(p: &P, q: &Q, alpha: f64, cfg: &McConfig) -> Result<McEstimate>
where
    P: Density + crate::mixture::Univariate,
    Q: Density + crate::mixture::Univariate,
{
    gaussian::check_alpha(alpha)?;
    if p.dim() == 1 && q.dim() == 1 {
        return Ok(McEstimate {
            estimate: js_alpha_1d(p, q, alpha, 1e-10)?,
            stderr: 0.0,
            samples: 0,
        });
    }
    mc_js(p, q, alpha, cfg)
}

/// `C_alpha = sqrt(-log(1 - alpha) / 2 - log(alpha) / 2)`, the cap on
/// `sqrt(JS_alpha)`.
pub fn js_alpha_cap(alpha: f64) -> Result<f64> {
    gaussian::check_alpha(alpha)?;
    Ok((-0.5 * (1.0 - alpha).ln() - 0.5 * alpha.ln()).sqrt())
}
