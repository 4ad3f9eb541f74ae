//! Closed forms between Gaussian components.

use libm::erf;

use crate::error::{Error, Result};
use crate::mixture::{normal_cdf, Component};

fn params(p: &Component, q: &Component) -> Result<((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>))> {
    let (Some(a), Some(b)) = (p.gaussian_params(), q.gaussian_params()) else {
        return Err(Error::Unsupported(format!(
            "closed form between {} and {} components",
            p.family(),
            q.family()
        )));
    };
    if a.0.len() != b.0.len() {
        return Err(Error::DimensionMismatch {
            expected: a.0.len(),
            got: b.0.len(),
        });
    }
    Ok((a, b))
}

/// `KL(p : q)` between diagonal Gaussians.
pub fn kl_gaussian(p: &Component, q: &Component) -> Result<f64> {
    let ((m1, v1), (m2, v2)) = params(p, q)?;
    Ok(kl_diag(&m1, &v1, &m2, &v2))
}

pub(crate) fn kl_diag(m1: &[f64], v1: &[f64], m2: &[f64], v2: &[f64]) -> f64 {
    let mut acc = 0.0;
    for d in 0..m1.len() {
        let r = v1[d] / v2[d];
        let dm = m1[d] - m2[d];
        acc += r + dm * dm / v2[d] - 1.0 - r.ln();
    }
    (0.5 * acc).max(0.0)
}

/// 2-Wasserstein distance (not squared) between diagonal Gaussians.
pub fn w2_gaussian(p: &Component, q: &Component) -> Result<f64> {
    Ok(w2_squared_gaussian(p, q)?.sqrt())
}

pub fn w2_squared_gaussian(p: &Component, q: &Component) -> Result<f64> {
    let ((m1, v1), (m2, v2)) = params(p, q)?;
    Ok(m1
        .iter()
        .zip(&m2)
        .zip(v1.iter().zip(&v2))
        .map(|((a, b), (s, t))| {
            let dm = a - b;
            let ds = s.sqrt() - t.sqrt();
            dm * dm + ds * ds
        })
        .sum())
}

/// Rényi divergence `R_alpha(p:q) = log(int p^alpha q^(1-alpha)) / (alpha - 1)`
/// between diagonal Gaussians, for `alpha` in (0, 1).
pub fn renyi_gaussian(p: &Component, q: &Component, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let ((m1, v1), (m2, v2)) = params(p, q)?;
    let mut acc = 0.0;
    for d in 0..m1.len() {
        // interpolated variance; the divergence separates over coordinates
        let va = (1.0 - alpha) * v1[d] + alpha * v2[d];
        let dm = m1[d] - m2[d];
        acc += alpha * dm * dm / (2.0 * va)
            + (va.ln() - (1.0 - alpha) * v1[d].ln() - alpha * v2[d].ln()) / (2.0 * (1.0 - alpha));
    }
    Ok(acc.max(0.0))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("{alpha} is not in (0, 1)")))
    }
}

/// Total variation between two univariate Gaussians.
pub fn tv_gaussian_1d(p: &Component, q: &Component) -> Result<f64> {
    let ((m1, v1), (m2, v2)) = params(p, q)?;
    if m1.len() != 1 {
        return Err(Error::Unsupported("closed-form TV beyond one dimension".into()));
    }
    Ok(tv_normal(m1[0], v1[0], m2[0], v2[0]))
}

fn tv_normal(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    if s1 == s2 {
        return erf((m1 - m2).abs() / (2.0 * (2.0 * s1).sqrt()));
    }
    // log p = log q  <=>  a x^2 + b x + c = 0
    let a = 0.5 / s1 - 0.5 / s2;
    let b = m2 / s2 - m1 / s1;
    let c = 0.5 * m1 * m1 / s1 - 0.5 * m2 * m2 / s2 + 0.5 * (s1 / s2).ln();
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let t = -0.5 * (b + b.signum() * disc.sqrt());
    let (mut x1, mut x2) = if t == 0.0 {
        let r = (-c / a).max(0.0).sqrt();
        (-r, r)
    } else {
        (t / a, c / t)
    };
    if x1 > x2 {
        std::mem::swap(&mut x1, &mut x2);
    }
    let mass = |m: f64, s: f64| {
        let sd = s.sqrt();
        normal_cdf((x2 - m) / sd) - normal_cdf((x1 - m) / sd)
    };
    (mass(m1, s1) - mass(m2, s2)).abs().min(1.0)
}
