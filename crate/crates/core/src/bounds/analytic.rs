//! Closed-form and quadrature upper bounds on KL and f-divergences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground::numeric::integrate_pair;
use crate::mixture::{exp_family_view, ExpFamilyView, Mixture, Univariate};
use crate::numeric::log_sum_exp;

/// A bound value that may be `+inf`; `divergent` records why it is.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub divergent: bool,
}

impl BoundValue {
    pub fn finite(value: f64) -> Self {
        BoundValue {
            value,
            divergent: false,
        }
    }

    pub fn infinite() -> Self {
        BoundValue {
            value: f64::INFINITY,
            divergent: true,
        }
    }

    pub fn is_finite(&self) -> bool {
        !self.divergent && self.value.is_finite()
    }
}

/// Quadrature tolerance for the one-dimensional bounds.
const TOL: f64 = 1e-10;

/// `KL(p : q) <= int p^2 / q - 1`.
///
/// One-dimensional pairs are integrated numerically, with divergence of the
/// integral reported as `+inf`. In higher dimension the integral has a
/// closed form only when `q` has a single Gaussian component.
pub fn chi2_kl_bound(p: &Mixture, q: &Mixture) -> Result<BoundValue> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    if p.dim() == 1 {
        let r = integrate_pair(p, q, TOL, |lp, lq| {
            if lp == f64::NEG_INFINITY {
                0.0
            } else {
                (2.0 * lp - lq).exp()
            }
        })?;
        if !r.finite || !r.value.is_finite() {
            return Ok(BoundValue::infinite());
        }
        return Ok(BoundValue::finite((r.value - 1.0).max(0.0)));
    }
    if q.k() == 1 && q.is_gaussian() && p.is_gaussian() {
        // the geometric-mean step is exact for one component
        return expfam_kl_bound(p, q);
    }
    Err(Error::Unsupported(
        "chi-square bound in several dimensions needs a single-component q".into(),
    ))
}

/// Closed-form relaxation of [`chi2_kl_bound`] for mixtures of one
/// exponential family, replacing `1/m'` by the inverse weighted geometric
/// mean of its components:
/// `sum_ij w_i w_j exp(F(t_i + t_j - tbar') - F(t_i) - F(t_j) + sum_l w'_l F(t'_l)) - 1`.
/// Returns `+inf` (divergent) if some `t_i + t_j - tbar'` leaves the natural
/// domain.
pub fn expfam_kl_bound(m: &Mixture, m2: &Mixture) -> Result<BoundValue> {
    let views = |x: &Mixture| -> Result<Vec<ExpFamilyView>> {
        x.components().iter().map(exp_family_view).collect()
    };
    let (a, b) = (views(m)?, views(m2)?);
    let family = a[0].family;
    if b[0].family.theta_len() != family.theta_len() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            got: b[0].family.dim(),
        });
    }
    let len = family.theta_len();
    let mut bar = vec![0.0; len];
    let mut mean_f = 0.0;
    for (w, v) in m2.weights().iter().zip(&b) {
        for (t, x) in bar.iter_mut().zip(&v.theta) {
            *t += w * x;
        }
        mean_f += w * v.log_normalizer;
    }
    let mut logs = Vec::with_capacity(a.len() * a.len());
    let mut theta = vec![0.0; len];
    for (wi, vi) in m.weights().iter().zip(&a) {
        for (wj, vj) in m.weights().iter().zip(&a) {
            if *wi == 0.0 || *wj == 0.0 {
                continue;
            }
            for k in 0..len {
                theta[k] = vi.theta[k] + vj.theta[k] - bar[k];
            }
            if !family.in_domain(&theta) {
                return Ok(BoundValue::infinite());
            }
            let f = family.log_normalizer(&theta)?;
            logs.push(wi.ln() + wj.ln() + f - vi.log_normalizer - vj.log_normalizer + mean_f);
        }
    }
    let value = log_sum_exp(&logs).exp_m1();
    if !value.is_finite() {
        return Ok(BoundValue::infinite());
    }
    Ok(BoundValue::finite(value.max(0.0)))
}

/// A convex generator `f` with `f(1) = 0` and its derivative.
pub trait FGenerator {
    fn f(&self, u: f64) -> f64;
    fn f_prime(&self, u: f64) -> f64;

    /// `(q - p) f'(q / p)` from the log-densities. Generators may override
    /// this with a form that survives underflow of `p` and `q`.
    fn bound_integrand(&self, lp: f64, lq: f64) -> f64 {
        let (pv, qv) = (lp.exp(), lq.exp());
        if pv == 0.0 && qv == 0.0 {
            return 0.0;
        }
        (qv - pv) * self.f_prime((lq - lp).exp())
    }
}

/// `f(u) = -log u`, whose f-divergence is `KL(p : q)`.
#[derive(Clone, Copy, Debug)]
pub struct NegLog;

impl FGenerator for NegLog {
    fn f(&self, u: f64) -> f64 {
        -u.ln()
    }

    fn f_prime(&self, u: f64) -> f64 {
        -1.0 / u
    }

    fn bound_integrand(&self, lp: f64, lq: f64) -> f64 {
        if lp == f64::NEG_INFINITY {
            return 0.0;
        }
        (2.0 * lp - lq).exp() - lp.exp()
    }
}

/// `f(u) = (u - 1)^2`, the chi-square divergence of `q` from `p`.
#[derive(Clone, Copy, Debug)]
pub struct SquaredDeviation;

impl FGenerator for SquaredDeviation {
    fn f(&self, u: f64) -> f64 {
        (u - 1.0) * (u - 1.0)
    }

    fn f_prime(&self, u: f64) -> f64 {
        2.0 * (u - 1.0)
    }
}

/// `I_f(p : q) <= int (q - p) f'(q / p)` for one-dimensional densities.
pub fn fdiv_derivative_bound<P, Q, G>(p: &P, q: &Q, generator: &G) -> Result<BoundValue>
where
    P: Univariate + ?Sized,
    Q: Univariate + ?Sized,
    G: FGenerator + ?Sized,
{
    let undefined = std::cell::Cell::new(false);
    let r = integrate_pair(p, q, TOL, |lp, lq| {
        let v = generator.bound_integrand(lp, lq);
        if v.is_nan() {
            undefined.set(true);
            0.0
        } else {
            v
        }
    })?;
    if undefined.get() {
        return Err(Error::Numerical(
            "generator derivative undefined on encountered density ratios".into(),
        ));
    }
    if !r.finite || !r.value.is_finite() {
        return Ok(BoundValue::infinite());
    }
    Ok(BoundValue::finite(r.value))
}
