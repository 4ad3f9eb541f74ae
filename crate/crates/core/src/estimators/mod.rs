//! Seeded Monte Carlo estimators used as reference values for the bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground::gaussian::check_alpha;
use crate::mixture::{Density, Kde, Mixture};
use crate::numeric::{log_add_exp, log_sum_exp};
use crate::points::Points;
use crate::rng::{derive_seed, seeded};

/// Monte Carlo settings: samples per side, seed and batch count for the
/// batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub batches: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 5000,
            seed: 0,
            batches: 10,
        }
    }
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        McConfig {
            samples,
            seed,
            ..McConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batches < 2 {
            return Err(Error::param("batches", "need at least 2 batches"));
        }
        if self.samples < self.batches {
            return Err(Error::param(
                "samples",
                format!("{} samples for {} batches", self.samples, self.batches),
            ));
        }
        Ok(())
    }

    fn draws<D: Density>(&self, d: &D, stream: u64) -> Points {
        d.draw(self.samples, &mut seeded(derive_seed(self.seed, &[stream])))
    }
}

/// Point estimate with its batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    /// `estimate - k * stderr`.
    pub fn lower(&self, k: f64) -> f64 {
        self.estimate - k * self.stderr
    }

    pub fn upper(&self, k: f64) -> f64 {
        self.estimate + k * self.stderr
    }
}

/// Overall mean of `values` and the standard error from `batches` equal
/// consecutive batch means.
pub fn batch_means(values: &[f64], batches: usize) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = (0..batches)
        .map(|b| {
            let chunk = &values[b * n / batches..(b + 1) * n / batches];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect();
    let bm = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - bm) * (m - bm)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

fn estimate(values: &[f64], cfg: &McConfig) -> McEstimate {
    let (estimate, stderr) = batch_means(values, cfg.batches);
    McEstimate {
        estimate,
        stderr,
        samples: cfg.samples,
    }
}

fn check_dims<P: Density, Q: Density>(p: &P, q: &Q) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    Ok(())
}

/// `KL(p : q)` as the sample mean of `log p(x) - log q(x)`, `x ~ p`.
pub fn mc_kl<P: Density, Q: Density>(p: &P, q: &Q, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    check_dims(p, q)?;
    let xs = cfg.draws(p, 0);
    let terms: Vec<f64> = xs
        .rows()
        .map(|x| p.log_density(x) - q.log_density(x))
        .collect();
    Ok(estimate(&terms, cfg))
}

/// Rényi divergence `log(E_p[(q/p)^(1-alpha)]) / (alpha - 1)`, evaluated in
/// log domain; the standard error follows from the delta method.
pub fn mc_renyi<P: Density, Q: Density>(
    p: &P,
    q: &Q,
    alpha: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    check_alpha(alpha)?;
    cfg.validate()?;
    check_dims(p, q)?;
    let xs = cfg.draws(p, 0);
    let logs: Vec<f64> = xs
        .rows()
        .map(|x| (1.0 - alpha) * (q.log_density(x) - p.log_density(x)))
        .collect();
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::Numerical("Rényi log-ratios are not finite".into()));
    }
    let scaled: Vec<f64> = logs.iter().map(|l| (l - shift).exp()).collect();
    let (mean, se) = batch_means(&scaled, cfg.batches);
    let log_mean = log_sum_exp(&logs) - (logs.len() as f64).ln();
    Ok(McEstimate {
        estimate: log_mean / (alpha - 1.0),
        stderr: se / (mean * (1.0 - alpha)),
        samples: cfg.samples,
    })
}

/// Total variation via `TV = E_p[t]/2 + E_q[t]/2` with
/// `t = tanh(|log p - log q| / 2) = |p - q| / (p + q)`.
pub fn mc_tv<P: Density, Q: Density>(p: &P, q: &Q, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    check_dims(p, q)?;
    let xs = cfg.draws(p, 0);
    let ys = cfg.draws(q, 1);
    let t = |x: &[f64]| {
        let r = (p.log_density(x) - q.log_density(x)).abs();
        if r.is_nan() {
            // both densities vanish
            0.0
        } else {
            (0.5 * r).tanh()
        }
    };
    let terms: Vec<f64> = xs
        .rows()
        .zip(ys.rows())
        .map(|(x, y)| 0.5 * (t(x) + t(y)))
        .collect();
    Ok(estimate(&terms, cfg))
}

/// `JS_alpha(p : q)` with paired draws from `p` and `q`.
pub fn mc_js<P: Density, Q: Density>(
    p: &P,
    q: &Q,
    alpha: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    check_alpha(alpha)?;
    cfg.validate()?;
    check_dims(p, q)?;
    let (la, lb) = ((1.0 - alpha).ln(), alpha.ln());
    let xs = cfg.draws(p, 0);
    let ys = cfg.draws(q, 1);
    let terms: Vec<f64> = xs
        .rows()
        .zip(ys.rows())
        .map(|(x, y)| {
            let (px, qx) = (p.log_density(x), q.log_density(x));
            let (py, qy) = (p.log_density(y), q.log_density(y));
            let tx = px - log_add_exp(la + px, lb + qx);
            let ty = qy - log_add_exp(la + py, lb + qy);
            0.5 * (tx + ty)
        })
        .collect();
    Ok(estimate(&terms, cfg))
}

/// `sqrt(JS_alpha)` with a delta-method standard error.
pub fn mc_js_sqrt<P: Density, Q: Density>(
    p: &P,
    q: &Q,
    alpha: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let js = mc_js(p, q, alpha, cfg)?;
    let root = js.estimate.max(0.0).sqrt();
    let stderr = if root > 0.0 {
        js.stderr / (2.0 * root)
    } else {
        js.stderr.sqrt()
    };
    Ok(McEstimate {
        estimate: root,
        stderr,
        samples: js.samples,
    })
}

/// `I_f(p : q) = E_p[f(q(x) / p(x))]`.
pub fn mc_fdiv<P: Density, Q: Density, F: Fn(f64) -> f64>(
    p: &P,
    q: &Q,
    f: F,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.validate()?;
    check_dims(p, q)?;
    let xs = cfg.draws(p, 0);
    let terms: Vec<f64> = xs
        .rows()
        .map(|x| f((q.log_density(x) - p.log_density(x)).exp()))
        .collect();
    Ok(estimate(&terms, cfg))
}

/// Lower estimate of `KL(kde : q)` from `H(X) <= H(U) + H(X | U)`:
/// `-log n - H(kernel) - E_kde[log q]`.
pub fn kl_eval_bound(kde: &Kde, q: &Mixture, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    check_dims(kde, q)?;
    let xs = cfg.draws(kde, 0);
    let terms: Vec<f64> = xs.rows().map(|x| -q.log_density(x)).collect();
    let cross = estimate(&terms, cfg);
    Ok(McEstimate {
        estimate: -(kde.n() as f64).ln() - kde.kernel_entropy() + cross.estimate,
        ..cross
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::Component;

    fn g(mu: f64, sigma: f64) -> Mixture {
        Mixture::single(Component::gaussian_1d(mu, sigma).unwrap())
    }

    #[test]
    fn batch_means_on_constant_input() {
        let (m, se) = batch_means(&[2.0; 100], 10);
        assert_eq!((m, se), (2.0, 0.0));
    }

    #[test]
    fn identical_densities_give_zero() {
        let p = g(0.0, 1.0);
        let cfg = McConfig::new(2000, 1);
        assert_eq!(mc_kl(&p, &p, &cfg).unwrap().estimate, 0.0);
        assert_eq!(mc_tv(&p, &p, &cfg).unwrap().estimate, 0.0);
        assert!(mc_renyi(&p, &p, 0.5, &cfg).unwrap().estimate.abs() < 1e-15);
        assert!(mc_js(&p, &p, 0.5, &cfg).unwrap().estimate.abs() < 1e-15);
    }

    #[test]
    fn kl_of_unit_shift() {
        let e = mc_kl(&g(0.0, 1.0), &g(1.0, 1.0), &McConfig::new(20_000, 3)).unwrap();
        assert!((e.estimate - 0.5).abs() < 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn tv_of_two_sigma_shift() {
        let e = mc_tv(&g(0.0, 1.0), &g(2.0, 1.0), &McConfig::new(50_000, 4)).unwrap();
        assert!((e.estimate - 0.682_689_492_137_085_9).abs() < 3.0 * e.stderr, "{e:?}");
        let far = mc_tv(&g(0.0, 1.0), &g(20.0, 1.0), &McConfig::new(5000, 4)).unwrap();
        assert!(far.estimate >= 0.999);
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = McConfig::new(1000, 9);
        let a = mc_kl(&g(0.0, 1.0), &g(0.5, 2.0), &cfg).unwrap();
        let b = mc_kl(&g(0.0, 1.0), &g(0.5, 2.0), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let p = g(0.0, 1.0);
        assert!(mc_kl(&p, &p, &McConfig { samples: 5, seed: 0, batches: 10 }).is_err());
        assert!(mc_kl(&p, &p, &McConfig { samples: 50, seed: 0, batches: 1 }).is_err());
        assert!(mc_renyi(&p, &p, 1.0, &McConfig::default()).is_err());
    }

    #[test]
    fn kernel_entropy_shift_under_bandwidth() {
        let pts = Points::from_rows(&[[0.0, 1.0], [2.0, -1.0]]).unwrap();
        let q = Mixture::single(Component::gaussian_diag(vec![1.0, 0.0], vec![4.0, 4.0]).unwrap());
        let cfg = McConfig::new(1000, 2);
        let a = kl_eval_bound(&Kde::build(&pts, 1e-2).unwrap(), &q, &cfg).unwrap();
        let b = kl_eval_bound(&Kde::build(&pts, 1e-2).unwrap(), &q, &cfg).unwrap();
        assert_eq!(a, b);
        let wide = Kde::build(&pts, 1e-2).unwrap().kernel_entropy();
        let narrow = Kde::build(&pts, 1e-4).unwrap().kernel_entropy();
        assert!((wide - narrow - 100f64.ln()).abs() < 1e-12);
    }
}
