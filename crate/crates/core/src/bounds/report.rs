//! Side-by-side evaluation of every applicable bound for one mixture pair.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{mc_js_sqrt, mc_kl, mc_renyi, mc_tv, McConfig, McEstimate};
use crate::ground::{cost_matrix, js_alpha_cap, GroundKind, GroundSpec};
use crate::mixture::Mixture;
use crate::transport::{crot_with_cost, SinkhornConfig, Solver};

use super::wasserstein::{empirical_w2_ub, gelbrich_lb, EmpiricalW2};
use super::{chi2_kl_bound, expfam_kl_bound, hungarian_bound, max_bound, scub_from_cost};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
}

/// One bound in a [`BoundReport`]. `stderr` is zero for deterministic
/// bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub name: String,
    #[serde(with = "extended_float")]
    pub value: f64,
    pub side: Side,
    pub seconds: f64,
    #[serde(default)]
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub target: GroundKind,
    pub bounds: Vec<BoundEntry>,
    /// Monte Carlo estimate of the target divergence itself, when one exists.
    pub reference: Option<McEstimate>,
}

impl BoundReport {
    pub fn get(&self, name: &str) -> Option<&BoundEntry> {
        self.bounds.iter().find(|b| b.name == name)
    }

    /// Pairs `(upper, lower)` that contradict each other beyond `k`
    /// standard errors plus `tol`. The reference estimate takes part as a
    /// lower bound on every upper bound and an upper bound on every lower
    /// one.
    pub fn violations(&self, k: f64, tol: f64) -> Vec<(String, String)> {
        let mut lowers: Vec<(&str, f64, f64)> = self
            .bounds
            .iter()
            .filter(|b| b.side == Side::Lower)
            .map(|b| (b.name.as_str(), b.value, b.stderr))
            .collect();
        let mut uppers: Vec<(&str, f64, f64)> = self
            .bounds
            .iter()
            .filter(|b| b.side == Side::Upper)
            .map(|b| (b.name.as_str(), b.value, b.stderr))
            .collect();
        if let Some(r) = &self.reference {
            lowers.push(("reference", r.estimate, r.stderr));
            uppers.push(("reference", r.estimate, r.stderr));
        }
        let mut out = Vec::new();
        for u in &uppers {
            for l in &lowers {
                if u.0 == l.0 {
                    continue;
                }
                if u.1 + k * u.2 + tol < l.1 - k * l.2 {
                    out.push((u.0.to_string(), l.0.to_string()));
                }
            }
        }
        out
    }

    pub fn is_consistent(&self, k: f64, tol: f64) -> bool {
        self.violations(k, tol).is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub mc: McConfig,
    /// Sinkhorn runs at `gamma = median(M) / level`.
    pub sinkhorn_levels: Vec<f64>,
    /// Sample size of the empirical `W_2` bound.
    pub empirical_n: usize,
    pub seed: u64,
}

impl ReportConfig {
    pub fn new(seed: u64) -> Self {
        ReportConfig {
            mc: McConfig::new(20_000, seed),
            sinkhorn_levels: vec![10.0, 1.0],
            empirical_n: 500,
            seed,
        }
    }
}

struct Builder {
    entries: Vec<BoundEntry>,
}

impl Builder {
    fn push(&mut self, name: impl Into<String>, side: Side, start: Instant, value: f64, stderr: f64) {
        self.entries.push(BoundEntry {
            name: name.into(),
            value,
            side,
            seconds: start.elapsed().as_secs_f64(),
            stderr,
        });
    }

    /// Runs `f` and records its value, skipping bounds whose preconditions
    /// the pair does not meet.
    fn try_push(&mut self, name: &str, side: Side, f: impl FnOnce() -> Result<f64>) -> Result<()> {
        let start = Instant::now();
        match f() {
            Ok(v) => {
                self.push(name, side, start, v, 0.0);
                Ok(())
            }
            Err(Error::Unsupported(_)) | Err(Error::DimensionMismatch { .. }) => Ok(()),
            Err(e) => Err(e),
        }
    }
}

/// Evaluates the transport bounds and every applicable analytic bound for
/// `target` between `m1` and `m2`.
///
/// For `w2` the transport values are taken over the squared ground
/// distance and square-rooted, which is what makes them upper bounds.
pub fn bound_report(m1: &Mixture, m2: &Mixture, target: GroundKind, cfg: &ReportConfig) -> Result<BoundReport> {
    let ground = match target {
        GroundKind::W2 => GroundKind::W2Squared,
        k => k,
    };
    let finish = |v: f64| if target == GroundKind::W2 { v.max(0.0).sqrt() } else { v };
    let spec = GroundSpec::new(ground).with_seed(cfg.seed);
    let mut b = Builder { entries: Vec::new() };

    let start = Instant::now();
    let cost = cost_matrix(m1, m2, &spec)?;
    let cost_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let exact = crot_with_cost(m1, m2, cost.clone(), &Solver::Exact)?;
    b.push("crot_exact", Side::Upper, start, finish(exact.value), 0.0);
    for level in &cfg.sinkhorn_levels {
        let start = Instant::now();
        let solver = Solver::Sinkhorn(SinkhornConfig::lambda_level(*level));
        let s = crot_with_cost(m1, m2, cost.clone(), &solver)?;
        b.push(format!("sinkhorn_{level}"), Side::Upper, start, finish(s.value), 0.0);
    }
    let start = Instant::now();
    let product = scub_from_cost(m1.weights(), m2.weights(), &cost)?;
    b.push("scub", Side::Upper, start, finish(product), 0.0);
    let start = Instant::now();
    b.push("max", Side::Upper, start, finish(max_bound(&cost)), 0.0);
    // the matrix is shared, so charge its cost to every transport entry
    for e in b.entries.iter_mut() {
        e.seconds += cost_seconds;
    }

    let mc = &cfg.mc;
    let reference = match target {
        GroundKind::Kl => {
            if m1.k() == m2.k() {
                b.try_push("hungarian", Side::Upper, || Ok(hungarian_bound(m1, m2)?.0))?;
            }
            b.try_push("chi2", Side::Upper, || Ok(chi2_kl_bound(m1, m2)?.value))?;
            b.try_push("expfam", Side::Upper, || Ok(expfam_kl_bound(m1, m2)?.value))?;
            Some(mc_kl(m1, m2, mc)?)
        }
        GroundKind::Tv => Some(mc_tv(m1, m2, mc)?),
        GroundKind::Renyi(a) => Some(mc_renyi(m1, m2, a, mc)?),
        GroundKind::JsSqrt(a) => {
            b.try_push("js_cap", Side::Upper, || js_alpha_cap(a))?;
            Some(mc_js_sqrt(m1, m2, a, mc)?)
        }
        GroundKind::W2 | GroundKind::W2Squared => {
            let square = target == GroundKind::W2Squared;
            b.try_push("gelbrich", Side::Lower, || {
                gelbrich_lb(m1, m2).map(|v| if square { v * v } else { v })
            })?;
            if !square {
                let start = Instant::now();
                let e = empirical_w2_ub(m1, m2, &EmpiricalW2::new(cfg.empirical_n, cfg.seed))?;
                b.push("empirical", Side::Upper, start, e.estimate, e.stderr);
            }
            None
        }
        GroundKind::Wasserstein1d(_) => None,
    };
    Ok(BoundReport {
        target,
        bounds: b.entries,
        reference,
    })
}

/// JSON has no infinities; divergent bounds are written as the strings
/// `"inf"`, `"-inf"` and `"nan"`.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("`{other}` is not a number"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::Component;

    fn g(mu: f64, sigma: f64) -> Component {
        Component::gaussian_1d(mu, sigma).unwrap()
    }

    fn pair() -> (Mixture, Mixture) {
        let a = Mixture::new(vec![0.3, 0.7], vec![g(-1.0, 0.6), g(1.0, 1.0)]).unwrap();
        let b = Mixture::new(vec![0.5, 0.5], vec![g(0.0, 1.0), g(2.5, 0.8)]).unwrap();
        (a, b)
    }

    fn small_cfg() -> ReportConfig {
        ReportConfig {
            mc: McConfig::new(20_000, 5),
            empirical_n: 100,
            ..ReportConfig::new(5)
        }
    }

    #[test]
    fn kl_report_is_consistent() {
        let (a, b) = pair();
        let r = bound_report(&a, &b, GroundKind::Kl, &small_cfg()).unwrap();
        for name in ["crot_exact", "sinkhorn_10", "sinkhorn_1", "scub", "max", "hungarian", "chi2", "expfam"] {
            assert!(r.get(name).is_some(), "missing {name}");
        }
        assert!(r.is_consistent(3.0, 1e-9), "{:?}", r.violations(3.0, 1e-9));
        let exact = r.get("crot_exact").unwrap().value;
        assert!(exact <= r.get("sinkhorn_10").unwrap().value + 1e-12);
        assert!(r.get("scub").unwrap().value <= r.get("max").unwrap().value);
    }

    #[test]
    fn w2_report_has_lower_and_upper_sides() {
        let (a, b) = pair();
        let r = bound_report(&a, &b, GroundKind::W2, &small_cfg()).unwrap();
        assert_eq!(r.get("gelbrich").unwrap().side, Side::Lower);
        assert!(r.get("empirical").unwrap().stderr > 0.0);
        assert!(r.reference.is_none());
        assert!(r.is_consistent(3.0, 1e-9), "{:?}", r.violations(3.0, 1e-9));
    }

    #[test]
    fn violations_are_detected() {
        let entry = |name: &str, value, side| BoundEntry {
            name: name.into(),
            value,
            side,
            seconds: 0.0,
            stderr: 0.0,
        };
        let r = BoundReport {
            target: GroundKind::Tv,
            bounds: vec![entry("u", 0.2, Side::Upper), entry("l", 0.3, Side::Lower)],
            reference: None,
        };
        assert_eq!(r.violations(3.0, 0.0), vec![("u".to_string(), "l".to_string())]);
    }

    #[test]
    fn infinite_values_round_trip() {
        let (a, b) = (Mixture::single(g(0.0, 2.0)), Mixture::single(g(0.0, 1.0)));
        let r = bound_report(&a, &b, GroundKind::Kl, &small_cfg()).unwrap();
        assert_eq!(r.get("chi2").unwrap().value, f64::INFINITY);
        let json = serde_json::to_string(&r).unwrap();
        let back: BoundReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
