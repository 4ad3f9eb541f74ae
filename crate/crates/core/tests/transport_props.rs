use proptest::prelude::*;

use crot::bounds::{gelbrich_lb, max_bound, scub};
use crot::ground::{kl_numeric_1d, tv_numeric_1d};
use crot::{
    cost_matrix, crot, solve_exact, solve_sinkhorn, Component, GroundKind, GroundSpec, Matrix, Mixture,
    SinkhornConfig, Solver,
};

fn weights(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

fn gmm_1d() -> impl Strategy<Value = Mixture> {
    prop::collection::vec((-3.0..3.0f64, 0.3..2.0f64, 0.2..1.0f64), 1..=4).prop_map(|parts| {
        let w = weights(&parts.iter().map(|p| p.2).collect::<Vec<_>>());
        let comps = parts
            .iter()
            .map(|&(mu, s, _)| Component::gaussian_1d(mu, s).unwrap())
            .collect();
        Mixture::new(w, comps).unwrap()
    })
}

fn gmm_2d() -> impl Strategy<Value = Mixture> {
    prop::collection::vec(((-2.0..2.0f64, -2.0..2.0f64), (0.2..1.5f64, 0.2..1.5f64), 0.2..1.0f64), 1..=3)
        .prop_map(|parts| {
            let w = weights(&parts.iter().map(|p| p.2).collect::<Vec<_>>());
            let comps = parts
                .iter()
                .map(|&((m0, m1), (v0, v1), _)| Component::gaussian_diag(vec![m0, m1], vec![v0, v1]).unwrap())
                .collect();
            Mixture::new(w, comps).unwrap()
        })
}

fn problem() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Matrix)> {
    (1..=5usize, 1..=5usize).prop_flat_map(|(r, c)| {
        (
            prop::collection::vec(0.05..1.0f64, r),
            prop::collection::vec(0.05..1.0f64, c),
            prop::collection::vec(0.0..10.0f64, r * c),
        )
            .prop_map(move |(a, b, m)| {
                let m = Matrix::from_fn(r, c, |i, j| m[i * c + j]);
                (weights(&a), weights(&b), m)
            })
    })
}

/// Northwest-corner rule: a feasible plan built without any optimization.
fn northwest_corner(a: &[f64], b: &[f64]) -> Matrix {
    let mut p = Matrix::zeros(a.len(), b.len());
    let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let t = ra[i].min(rb[j]);
        p[(i, j)] = t;
        ra[i] -= t;
        rb[j] -= t;
        if ra[i] <= rb[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_plan_is_feasible_and_optimal((a, b, m) in problem()) {
        let plan = solve_exact(&a, &b, &m).unwrap();
        for (r, x) in plan.coupling.row_sums().iter().zip(&a) {
            prop_assert!((r - x).abs() < 1e-12);
        }
        for (c, x) in plan.coupling.col_sums().iter().zip(&b) {
            prop_assert!((c - x).abs() < 1e-12);
        }
        prop_assert!(plan.coupling.iter().all(|&x| x >= 0.0));
        prop_assert!((plan.value - plan.coupling.dot(&m)).abs() < 1e-12);
        let product = Matrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j]);
        prop_assert!(plan.value <= product.dot(&m) + 1e-12);
        prop_assert!(plan.value <= northwest_corner(&a, &b).dot(&m) + 1e-12);
    }

    #[test]
    fn sinkhorn_dominates_exact((a, b, m) in problem(), level in 0.5..20.0f64) {
        let exact = solve_exact(&a, &b, &m).unwrap().value;
        let s = solve_sinkhorn(&a, &b, &m, &SinkhornConfig::lambda_level(level)).unwrap();
        prop_assert!(s.value >= exact - 1e-12);
        for (r, x) in s.coupling.row_sums().iter().zip(&a) {
            prop_assert!((r - x).abs() < 1e-12);
        }
    }

    #[test]
    fn tv_transport_is_a_metric(a in gmm_1d(), b in gmm_1d(), c in gmm_1d()) {
        let spec = GroundSpec::new(GroundKind::Tv);
        let h = |x: &Mixture, y: &Mixture| crot(x, y, &spec, &Solver::Exact).unwrap().value;
        let (ab, ba, bc, ac) = (h(&a, &b), h(&b, &a), h(&b, &c), h(&a, &c));
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!(h(&a, &a) <= 1e-12);
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn bounds_sandwich_tv(a in gmm_1d(), b in gmm_1d()) {
        let spec = GroundSpec::new(GroundKind::Tv);
        let h = crot(&a, &b, &spec, &Solver::Exact).unwrap().value;
        let tv = tv_numeric_1d(&a, &b, 1e-10).unwrap();
        prop_assert!(tv <= h + 1e-8, "tv {} above transport {}", tv, h);
        prop_assert!(h <= scub(&a, &b, &spec).unwrap() + 1e-12);
        prop_assert!(h <= max_bound(&cost_matrix(&a, &b, &spec).unwrap()) + 1e-12);
    }

    #[test]
    fn kl_transport_dominates_kl(a in gmm_1d(), b in gmm_1d()) {
        let h = crot(&a, &b, &GroundSpec::new(GroundKind::Kl), &Solver::Exact).unwrap().value;
        let kl = kl_numeric_1d(&a, &b, 1e-10).unwrap();
        prop_assert!(kl <= h + 1e-7, "kl {} above transport {}", kl, h);
    }

    #[test]
    fn w2_transport_above_gelbrich(a in gmm_2d(), b in gmm_2d()) {
        let h = crot(&a, &b, &GroundSpec::new(GroundKind::W2Squared), &Solver::Exact).unwrap().value;
        let g = gelbrich_lb(&a, &b).unwrap();
        prop_assert!(h.sqrt() >= g - 1e-9);
    }
}

#[test]
fn single_components_reduce_to_ground_distance() {
    let p = Component::gaussian_1d(0.0, 1.0).unwrap();
    let q = Component::gaussian_1d(1.5, 0.7).unwrap();
    let spec = GroundSpec::new(GroundKind::Kl);
    let h = crot(&Mixture::single(p.clone()), &Mixture::single(q.clone()), &spec, &Solver::Exact)
        .unwrap()
        .value;
    // KL(N(0,1) || N(1.5, 0.49)) by hand
    let (s1, s2) = (1.0f64, 0.7f64);
    let kl = (s2 / s1).ln() + (s1 * s1 + 1.5 * 1.5) / (2.0 * s2 * s2) - 0.5;
    assert!((h - kl).abs() < 1e-12);
}

#[test]
fn permuted_components_have_zero_distance() {
    let c = |mu| Component::gaussian_1d(mu, 1.0).unwrap();
    let a = Mixture::new(vec![0.3, 0.7], vec![c(0.0), c(2.0)]).unwrap();
    let b = Mixture::new(vec![0.7, 0.3], vec![c(2.0), c(0.0)]).unwrap();
    for kind in [GroundKind::Kl, GroundKind::Tv, GroundKind::W2] {
        let h = crot(&a, &b, &GroundSpec::new(kind), &Solver::Exact).unwrap().value;
        assert!(h.abs() < 1e-12, "{kind:?}: {h}");
    }
}
