//! Chain-rule optimal transport between finite mixtures.
//!
//! The transport value `H_D(m1, m2) = min_W sum_ij W_ij D(p_i, q_j)` over
//! couplings of the mixture weights upper-bounds any jointly convex
//! divergence `D(m1 : m2)`. This crate computes it exactly or with Sinkhorn
//! scaling, along with the ground distances between components, a set of
//! cheaper and analytic bounds, Monte Carlo references, and a learner that
//! simplifies a kernel density estimate into a small Gaussian mixture.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod ground;
pub mod io;
pub mod learn;
pub mod matrix;
pub mod mixture;
pub mod numeric;
pub mod points;
pub mod quadrature;
pub mod rng;
pub mod transport;

pub use error::{Error, Result};
pub use estimators::{McConfig, McEstimate};
pub use ground::{cost_matrix, ground_distance, CostMatrix, GroundKind, GroundSpec};
pub use matrix::Matrix;
pub use mixture::{Component, Density, Family, Kde, Mixture, Univariate};
pub use points::Points;
pub use transport::{crot, solve_exact, solve_sinkhorn, Crot, SinkhornConfig, Solver, TransportPlan};
