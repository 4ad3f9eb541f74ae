//! One-dimensional optimal transport through quantile functions:
//! `W_p^p = int_0^1 |F^-1(u) - G^-1(u)|^p du`.

use crate::error::{Error, Result};
use crate::mixture::Univariate;
use crate::quadrature::gauss_legendre;

const NODES_PER_PANEL: usize = 20;
const EDGE: f64 = 1e-12;
const BISECTION_TOL: f64 = 1e-12;

/// Panel edges in `u`: geometric towards both ends, uniform in the middle.
fn panels() -> Vec<f64> {
    let mut edges = vec![EDGE];
    let mut e = 1e-11;
    while e < 0.1 {
        edges.push(e);
        e *= 10.0;
    }
    for i in 1..10 {
        edges.push(0.1 * i as f64);
    }
    let mut e = 1e-2;
    while e >= 1e-11 {
        edges.push(1.0 - e);
        e /= 10.0;
    }
    edges.push(1.0 - EDGE);
    edges
}

/// `F^-1(u)` by bisection on the CDF.
pub fn quantile<D: Univariate + ?Sized>(d: &D, u: f64) -> Result<f64> {
    let domain = d
        .domain()
        .ok_or_else(|| Error::Unsupported("quantile of a multivariate density".into()))?;
    let floor = domain.lower_limit;
    let width = (domain.hi - domain.lo).max(1.0);
    let mut lo = domain.lo;
    let mut hi = domain.hi;
    let mut step = width;
    while d.cdf_at(lo)? > u {
        match floor {
            Some(f) if lo <= f => break,
            Some(f) => lo = (lo - step).max(f),
            None => lo -= step,
        }
        step *= 2.0;
        if !lo.is_finite() {
            return Err(Error::Numerical("quantile bracket diverged".into()));
        }
    }
    step = width;
    while d.cdf_at(hi)? < u {
        hi += step;
        step *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical("quantile bracket diverged".into()));
        }
    }
    while hi - lo > BISECTION_TOL * (1.0 + lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if d.cdf_at(mid)? < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `W_p` between one-dimensional densities (components or mixtures).
pub fn wasserstein_1d_quantile<P, Q>(p: &P, q: &Q, order: f64) -> Result<f64>
where
    P: Univariate + ?Sized,
    Q: Univariate + ?Sized,
{
    if !(order >= 1.0 && order.is_finite()) {
        return Err(Error::param("p", format!("order {order} is not >= 1")));
    }
    let (nodes, weights) = gauss_legendre(NODES_PER_PANEL);
    let edges = panels();
    let mut acc = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, wt) in nodes.iter().zip(&weights) {
            let u = mid + half * x;
            let diff = (quantile(p, u)? - quantile(q, u)?).abs();
            acc += half * wt * diff.powf(order);
        }
    }
    Ok(acc.powf(1.0 / order))
}
