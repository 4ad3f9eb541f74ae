//! Bounds on divergences between mixtures that do not come from solving the
//! transport problem itself: product-coupling and max bounds, permutation
//! bounds on KL, integral bounds, and the moment and sample bounds on `W_2`.

mod analytic;
mod assignment;
mod report;
mod wasserstein;

pub use analytic::{
    chi2_kl_bound, expfam_kl_bound, fdiv_derivative_bound, BoundValue, FGenerator, NegLog,
    SquaredDeviation,
};
pub use assignment::{solve_assignment, solve_assignment_lexicographic};
pub use report::{bound_report, BoundEntry, BoundReport, ReportConfig, Side};
pub use wasserstein::{empirical_w2_ub, gelbrich_lb, EmpiricalW2};

pub use crate::ground::js_alpha_cap;

use crate::error::{Error, Result};
use crate::ground::{cost_matrix, CostMatrix, GroundKind, GroundSpec};
use crate::matrix::Matrix;
use crate::mixture::Mixture;
use crate::transport::{crot, Solver};

/// Above this size the optimal permutation is returned as found rather
/// than refined to the lexicographically smallest one.
pub const LEXICOGRAPHIC_LIMIT: usize = 16;

/// `sum_ij alpha_i beta_j D(p_i, q_j)`, the value of the independent
/// coupling. It dominates the transport value for any ground distance.
pub fn scub(m1: &Mixture, m2: &Mixture, spec: &GroundSpec) -> Result<f64> {
    let cost = cost_matrix(m1, m2, spec)?;
    scub_from_cost(m1.weights(), m2.weights(), &cost)
}

/// [`scub`] on a precomputed cost matrix.
pub fn scub_from_cost(alpha: &[f64], beta: &[f64], cost: &CostMatrix) -> Result<f64> {
    if alpha.len() != cost.rows() || beta.len() != cost.cols() {
        return Err(Error::DimensionMismatch {
            expected: cost.rows() * cost.cols(),
            got: alpha.len() * beta.len(),
        });
    }
    let mut total = 0.0;
    for (i, a) in alpha.iter().enumerate() {
        for (j, b) in beta.iter().enumerate() {
            total += a * b * cost.get(i, j);
        }
    }
    Ok(total)
}

/// Largest entry of the cost matrix.
pub fn max_bound(cost: &CostMatrix) -> f64 {
    cost.values.max()
}

fn kl_costs(m1: &Mixture, m2: &Mixture) -> Result<CostMatrix> {
    if m1.k() != m2.k() {
        return Err(Error::DimensionMismatch {
            expected: m1.k(),
            got: m2.k(),
        });
    }
    cost_matrix(m1, m2, &GroundSpec::new(GroundKind::Kl))
}

/// `a log(a / b)` with the conventions `0 log(0 / b) = 0` and
/// `a log(a / 0) = inf`.
fn weight_term(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if b == 0.0 {
        f64::INFINITY
    } else {
        a * (a / b).ln()
    }
}

/// Assignment cost `c_ij = a_i log(a_i / b_j) + a_i KL(p_i : q_j)`.
fn permutation_costs(m1: &Mixture, m2: &Mixture, kl: &CostMatrix) -> Matrix {
    let (a, b) = (m1.weights(), m2.weights());
    Matrix::from_fn(a.len(), b.len(), |i, j| {
        let w = weight_term(a[i], b[j]);
        if a[i] == 0.0 {
            w
        } else {
            w + a[i] * kl.get(i, j)
        }
    })
}

/// Log-sum inequality bound `KL(alpha : sigma(beta)) + sum_i alpha_i KL(p_i : q_sigma(i))`,
/// pairing component `i` of `m1` with component `sigma[i]` of `m2`.
pub fn logsum_bound(m1: &Mixture, m2: &Mixture, sigma: &[usize]) -> Result<f64> {
    let kl = kl_costs(m1, m2)?;
    let k = m1.k();
    let mut seen = vec![false; k];
    if sigma.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: sigma.len(),
        });
    }
    for &j in sigma {
        if j >= k || seen[j] {
            return Err(Error::param("sigma", "not a permutation"));
        }
        seen[j] = true;
    }
    let c = permutation_costs(m1, m2, &kl);
    Ok(sigma.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum())
}

/// Minimum of [`logsum_bound`] over all permutations, and a minimizing
/// permutation (the lexicographically smallest one for `k <= 16`).
pub fn hungarian_bound(m1: &Mixture, m2: &Mixture) -> Result<(f64, Vec<usize>)> {
    let kl = kl_costs(m1, m2)?;
    let c = permutation_costs(m1, m2, &kl);
    let (sigma, value) = if c.rows() <= LEXICOGRAPHIC_LIMIT {
        solve_assignment_lexicographic(&c)?
    } else {
        solve_assignment(&c)?
    };
    Ok((value, sigma))
}

/// Transport value over the KL ground distance, which upper-bounds
/// `KL(m1 : m2)` because KL is jointly convex.
pub fn crot_kl_bound(m1: &Mixture, m2: &Mixture, solver: &Solver) -> Result<f64> {
    Ok(crot(m1, m2, &GroundSpec::new(GroundKind::Kl), solver)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::assignment::brute_force;
    use crate::mixture::Component;

    fn g(mu: f64, sigma: f64) -> Component {
        Component::gaussian_1d(mu, sigma).unwrap()
    }

    fn pair() -> (Mixture, Mixture) {
        let a = Mixture::new(vec![0.2, 0.5, 0.3], vec![g(-1.0, 0.5), g(0.0, 1.0), g(2.0, 0.8)]).unwrap();
        let b = Mixture::new(vec![0.4, 0.4, 0.2], vec![g(1.8, 0.6), g(-0.7, 0.7), g(0.3, 1.5)]).unwrap();
        (a, b)
    }

    #[test]
    fn scub_on_uniform_two_by_two_is_the_mean_entry() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 6.0]]).unwrap();
        let cost = CostMatrix::from_matrix(m, GroundSpec::new(GroundKind::Tv)).unwrap();
        assert_eq!(scub_from_cost(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap(), 3.0);
        assert_eq!(max_bound(&cost), 6.0);
    }

    #[test]
    fn self_distances_vanish() {
        let (a, _) = pair();
        let spec = GroundSpec::new(GroundKind::Kl);
        let single = Mixture::single(g(0.0, 1.0));
        assert_eq!(scub(&single, &single, &spec).unwrap(), 0.0);
        assert_eq!(logsum_bound(&a, &a, &[0, 1, 2]).unwrap(), 0.0);
        let (v, sigma) = hungarian_bound(&a, &a).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(sigma, vec![0, 1, 2]);
        assert!(crot_kl_bound(&a, &a, &Solver::Exact).unwrap().abs() < 1e-12);
    }

    #[test]
    fn hungarian_matches_enumeration() {
        let (a, b) = pair();
        let (v, sigma) = hungarian_bound(&a, &b).unwrap();
        let kl = kl_costs(&a, &b).unwrap();
        let (best_sigma, best) = brute_force(&permutation_costs(&a, &b, &kl));
        assert!((v - best).abs() < 1e-12);
        assert_eq!(sigma, best_sigma);
        assert!((logsum_bound(&a, &b, &sigma).unwrap() - v).abs() < 1e-12);
        for s in [[0, 1, 2], [2, 0, 1], [1, 2, 0]] {
            assert!(logsum_bound(&a, &b, &s).unwrap() >= v - 1e-12);
        }
    }

    #[test]
    fn single_component_bound_is_the_component_kl() {
        let (p, q) = (Mixture::single(g(0.0, 1.0)), Mixture::single(g(1.0, 2.0)));
        let (v, sigma) = hungarian_bound(&p, &q).unwrap();
        assert_eq!(sigma, vec![0]);
        assert_eq!(v, logsum_bound(&p, &q, &[0]).unwrap());
        let kl = (2f64).ln() + (1.0 + 1.0) / 8.0 - 0.5;
        assert!((v - kl).abs() < 1e-12);
    }

    #[test]
    fn dominance_chain() {
        let (a, b) = pair();
        let spec = GroundSpec::new(GroundKind::Kl);
        let cost = cost_matrix(&a, &b, &spec).unwrap();
        let exact = crot_kl_bound(&a, &b, &Solver::Exact).unwrap();
        let s = Solver::Sinkhorn(crate::transport::SinkhornConfig::lambda_level(10.0));
        let soft = crot_kl_bound(&a, &b, &s).unwrap();
        let product = scub(&a, &b, &spec).unwrap();
        assert!(exact <= soft + 1e-12);
        assert!(soft <= product + 1e-12);
        assert!(product <= max_bound(&cost));
    }

    #[test]
    fn rejects_bad_permutations() {
        let (a, b) = pair();
        assert!(logsum_bound(&a, &b, &[0, 0, 1]).is_err());
        assert!(logsum_bound(&a, &b, &[0, 1]).is_err());
        let c = Mixture::single(g(0.0, 1.0));
        assert!(matches!(hungarian_bound(&a, &c), Err(Error::DimensionMismatch { .. })));
    }
}
