//! Exact and entropic optimal transport between mixture weight vectors.

mod network_simplex;
mod plan;
mod sinkhorn;

use serde::{Deserialize, Serialize};

pub use plan::{coupling_floor_check, normalize_marginal, SolverTag, TransportPlan, MARGINAL_TOLERANCE};
pub use sinkhorn::{Regularization, SinkhornConfig};

use crate::error::Result;
use crate::ground::{cost_matrix, CostMatrix, GroundSpec};
use crate::matrix::Matrix;
use crate::mixture::Mixture;

/// Optimal coupling for `min <W, M>` over `U(alpha, beta)`.
pub fn solve_exact(alpha: &[f64], beta: &[f64], cost: &Matrix) -> Result<TransportPlan> {
    let alpha = normalize_marginal("alpha", alpha)?;
    let beta = normalize_marginal("beta", beta)?;
    plan::check_shape(&alpha, &beta, cost)?;
    let s = network_simplex::solve(&alpha, &beta, cost)?;
    let value = s.flow.dot(cost);
    let mut out = TransportPlan {
        coupling: s.flow,
        value,
        solver: SolverTag::Exact,
        iterations: s.pivots,
        residual: 0.0,
        alpha,
        beta,
    };
    out.residual = out.marginal_error();
    Ok(out)
}

/// Entropic plan for `min <W, M> - gamma H(W)`. The returned plan is
/// projected onto `U(alpha, beta)` after scaling; `residual` is the L1
/// marginal violation of the raw scaled plan and `value` is `<W, M>`
/// without the entropy term.
pub fn solve_sinkhorn(
    alpha: &[f64],
    beta: &[f64],
    cost: &Matrix,
    cfg: &SinkhornConfig,
) -> Result<TransportPlan> {
    cfg.validate()?;
    let alpha = normalize_marginal("alpha", alpha)?;
    let beta = normalize_marginal("beta", beta)?;
    plan::check_shape(&alpha, &beta, cost)?;
    let gamma = cfg.resolve_gamma(cost);
    let mut s = sinkhorn::scale(&alpha, &beta, cost, gamma, cfg)?;
    sinkhorn::round_to_polytope(&mut s.plan, &alpha, &beta);
    let value = s.plan.dot(cost);
    Ok(TransportPlan {
        coupling: s.plan,
        value,
        solver: SolverTag::Sinkhorn,
        iterations: s.iterations,
        residual: s.residual,
        alpha,
        beta,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Exact,
    Sinkhorn(SinkhornConfig),
}

impl Solver {
    pub fn solve(&self, alpha: &[f64], beta: &[f64], cost: &Matrix) -> Result<TransportPlan> {
        match self {
            Solver::Exact => solve_exact(alpha, beta, cost),
            Solver::Sinkhorn(cfg) => solve_sinkhorn(alpha, beta, cost, cfg),
        }
    }
}

/// Transport distance between two mixtures together with its plan and
/// cost matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crot {
    pub value: f64,
    pub plan: TransportPlan,
    pub cost: CostMatrix,
}

/// `H_D(m1, m2)` for [`Solver::Exact`], `S_D(m1, m2)` for Sinkhorn.
pub fn crot(m1: &Mixture, m2: &Mixture, spec: &GroundSpec, solver: &Solver) -> Result<Crot> {
    let cost = cost_matrix(m1, m2, spec)?;
    crot_with_cost(m1, m2, cost, solver)
}

/// As [`crot`], reusing an already computed cost matrix.
pub fn crot_with_cost(m1: &Mixture, m2: &Mixture, cost: CostMatrix, solver: &Solver) -> Result<Crot> {
    let plan = solver.solve(m1.weights(), m2.weights(), &cost.values)?;
    Ok(Crot {
        value: plan.value,
        plan,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::ground::GroundKind;
    use crate::mixture::Component;

    #[test]
    fn one_by_one() {
        let m = Matrix::from_rows(&[[2.5]]).unwrap();
        let p = solve_exact(&[1.0], &[1.0], &m).unwrap();
        assert_eq!(p.coupling[(0, 0)], 1.0);
        assert_eq!(p.value, 2.5);
    }

    #[test]
    fn zero_diagonal_gives_identity_plan() {
        let m = Matrix::from_fn(3, 3, |i, j| (i as f64 - j as f64).abs());
        let w = [0.2, 0.5, 0.3];
        let p = solve_exact(&w, &w, &m).unwrap();
        assert_eq!(p.value, 0.0);
        for i in 0..3 {
            assert_eq!(p.coupling[(i, i)], w[i]);
        }
    }

    #[test]
    fn constant_cost_sinkhorn_is_product() {
        let m = Matrix::from_fn(2, 3, |_, _| 0.7);
        let a = [0.4, 0.6];
        let b = [0.2, 0.3, 0.5];
        let p = solve_sinkhorn(&a, &b, &m, &SinkhornConfig::lambda_level(10.0)).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert!((p.coupling[(i, j)] - a[i] * b[j]).abs() < 1e-12);
            }
        }
        assert!((p.value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn infeasible_marginals() {
        let m = Matrix::zeros(2, 2);
        assert!(matches!(
            solve_exact(&[0.5, 0.5], &[0.5, 0.6], &m),
            Err(Error::Infeasible(_))
        ));
        assert!(solve_exact(&[0.5, 0.5], &[1.0], &m).is_err());
    }

    #[test]
    fn two_by_two_matches_segment_search() {
        let g = |mu: f64, s: f64| Component::gaussian_1d(mu, s).unwrap();
        let m1 = Mixture::new(vec![0.3, 0.7], vec![g(0.0, 1.0), g(3.0, 0.5)]).unwrap();
        let m2 = Mixture::new(vec![0.6, 0.4], vec![g(1.0, 1.0), g(-1.0, 2.0)]).unwrap();
        let spec = GroundSpec::new(GroundKind::Tv);
        let r = crot(&m1, &m2, &spec, &Solver::Exact).unwrap();
        // U(alpha, beta) for 2x2 is {[[t, a0 - t], [b0 - t, 1 - a0 - b0 + t]]}
        let c = &r.cost.values;
        let (a0, b0) = (0.3, 0.6);
        let lo = f64::max(0.0, a0 + b0 - 1.0);
        let hi = f64::min(a0, b0);
        let f = |t: f64| {
            t * c[(0, 0)] + (a0 - t) * c[(0, 1)] + (b0 - t) * c[(1, 0)] + (1.0 - a0 - b0 + t) * c[(1, 1)]
        };
        let best = (0..=10_000)
            .map(|s| f(lo + (hi - lo) * s as f64 / 10_000.0))
            .fold(f64::INFINITY, f64::min);
        assert!((r.value - best).abs() < 1e-12, "{} vs {best}", r.value);
        assert!(r.value >= 0.0 && r.value <= 1.0);
    }

    #[test]
    fn self_distance_is_zero() {
        let m = Mixture::new(
            vec![0.25, 0.75],
            vec![
                Component::gaussian_1d(0.0, 1.0).unwrap(),
                Component::gaussian_1d(2.0, 0.3).unwrap(),
            ],
        )
        .unwrap();
        let r = crot(&m, &m, &GroundSpec::new(GroundKind::Tv), &Solver::Exact).unwrap();
        assert_eq!(r.value, 0.0);
    }
}
