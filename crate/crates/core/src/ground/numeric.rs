//! Divergences between one-dimensional densities by adaptive quadrature.

use crate::error::{Error, Result};
use crate::mixture::Univariate;
use crate::numeric::log_add_exp;
use crate::quadrature::{integrate_line, Domain, LineIntegral};

use super::gaussian::check_alpha;

/// Union quadrature domain of two one-dimensional densities.
pub(crate) fn joint_domain<P: Univariate + ?Sized, Q: Univariate + ?Sized>(
    p: &P,
    q: &Q,
) -> Result<Domain> {
    match (p.domain(), q.domain()) {
        (Some(a), Some(b)) => Ok(a.union(&b)),
        _ => Err(Error::Unsupported(
            "quadrature needs one-dimensional densities".into(),
        )),
    }
}

/// Integrates `f(log p(x), log q(x))` over the joint support.
pub fn integrate_pair<P, Q, F>(p: &P, q: &Q, tol: f64, f: F) -> Result<LineIntegral>
where
    P: Univariate + ?Sized,
    Q: Univariate + ?Sized,
    F: Fn(f64, f64) -> f64,
{
    let domain = joint_domain(p, q)?;
    Ok(integrate_line(
        |x| f(p.log_pdf_at(x), q.log_pdf_at(x)),
        &domain,
        tol,
    ))
}

fn finite(r: LineIntegral, what: &str) -> Result<f64> {
    if r.finite && r.value.is_finite() {
        Ok(r.value)
    } else {
        Err(Error::Numerical(format!("{what} integral did not settle")))
    }
}

/// `0.5 * int |p - q|`, clamped to [0, 1].
pub fn tv_numeric_1d<P, Q>(p: &P, q: &Q, tol: f64) -> Result<f64>
where
    P: Univariate + ?Sized,
    Q: Univariate + ?Sized,
{
    let r = integrate_pair(p, q, tol, |lp, lq| 0.5 * (lp.exp() - lq.exp()).abs())?;
    Ok(finite(r, "TV")?.clamp(0.0, 1.0))
}

/// `KL(p : q) = int p log(p / q)`; `+inf` when `q` vanishes where `p` does not.
pub fn kl_numeric_1d<P, Q>(p: &P, q: &Q, tol: f64) -> Result<f64>
where
    P: Univariate + ?Sized,
    Q: Univariate + ?Sized,
{
    let r = integrate_pair(p, q, tol, |lp, lq| {
        if lp == f64::NEG_INFINITY {
            0.0
        } else {
            lp.exp() * (lp - lq)
        }
    })?;
    if !r.finite || r.value == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    finite(r, "KL").map(|v| v.max(0.0))
}

/// `log(int p^alpha q^(1-alpha)) / (alpha - 1)` for `alpha` in (0, 1).
pub fn renyi_numeric_1d<P, Q>(p: &P, q: &Q, alpha: f64, tol: f64) -> Result<f64>
where
    P: Univariate + ?Sized,
    Q: Univariate + ?Sized,
{
    check_alpha(alpha)?;
    let r = integrate_pair(p, q, tol, |lp, lq| {
        let l = alpha * lp + (1.0 - alpha) * lq;
        if l.is_nan() {
            0.0
        } else {
            l.exp()
        }
    })?;
    let overlap = finite(r, "Rényi")?;
    Ok((overlap.ln() / (alpha - 1.0)).max(0.0))
}

/// `JS_alpha = KL(p : m) / 2 + KL(q : m) / 2` with `m = (1 - alpha) p + alpha q`.
pub fn js_alpha_1d<P, Q>(p: &P, q: &Q, alpha: f64, tol: f64) -> Result<f64>
where
    P: Univariate + ?Sized,
    Q: Univariate + ?Sized,
{
    check_alpha(alpha)?;
    let (la, lb) = ((1.0 - alpha).ln(), alpha.ln());
    let r = integrate_pair(p, q, tol, |lp, lq| {
        let lm = log_add_exp(la + lp, lb + lq);
        let mut acc = 0.0;
        if lp > f64::NEG_INFINITY {
            acc += lp.exp() * (lp - lm);
        }
        if lq > f64::NEG_INFINITY {
            acc += lq.exp() * (lq - lm);
        }
        0.5 * acc
    })?;
    Ok(finite(r, "Jensen-Shannon")?.max(0.0))
}
