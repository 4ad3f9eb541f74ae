//! Exact transport by the network simplex method specialised to the
//! bipartite transportation problem (the u-v / MODI method). Bases are
//! spanning trees over the `k1 + k2` row and column nodes.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Consecutive degenerate pivots after which entering-arc selection falls
/// back to Bland's rule, which cannot cycle.
const DEGENERATE_STREAK: usize = 64;

pub(crate) struct Solution {
    pub flow: Matrix,
    pub pivots: usize,
}

struct Tree {
    k1: usize,
    k2: usize,
    basic: Vec<(usize, usize)>,
}

impl Tree {
    fn node_count(&self) -> usize {
        self.k1 + self.k2
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        // node ids: rows 0..k1, columns k1..k1+k2; payload = basic index
        let mut adj = vec![Vec::new(); self.node_count()];
        for (b, &(i, j)) in self.basic.iter().enumerate() {
            adj[i].push((self.k1 + j, b));
            adj[self.k1 + j].push((i, b));
        }
        adj
    }
}

/// Northwest-corner basic feasible solution with exactly `k1 + k2 - 1`
/// basic cells, degenerate ones included.
fn northwest_corner(alpha: &[f64], beta: &[f64], flow: &mut Matrix) -> Vec<(usize, usize)> {
    let (k1, k2) = (alpha.len(), beta.len());
    let mut a = alpha.to_vec();
    let mut b = beta.to_vec();
    let mut basic = Vec::with_capacity(k1 + k2 - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = a[i].min(b[j]).max(0.0);
        flow[(i, j)] = x;
        basic.push((i, j));
        a[i] -= x;
        b[j] -= x;
        if i == k1 - 1 && j == k2 - 1 {
            break;
        }
        if j == k2 - 1 || (i < k1 - 1 && a[i] <= b[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    basic
}

/// Solves `min <W, C>` over couplings with marginals `alpha`, `beta`
/// (assumed valid and of equal mass).
pub(crate) fn solve(alpha: &[f64], beta: &[f64], cost: &Matrix) -> Result<Solution> {
    let (k1, k2) = (alpha.len(), beta.len());
    let mut flow = Matrix::zeros(k1, k2);
    let mut tree = Tree {
        k1,
        k2,
        basic: northwest_corner(alpha, beta, &mut flow),
    };
    let mut is_basic = vec![false; k1 * k2];
    for &(i, j) in &tree.basic {
        is_basic[i * k2 + j] = true;
    }
    let scale = cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let eps = 1e-12 * (1.0 + scale);
    let max_pivots = 50 * (k1 + k2) * (k1 + k2) + 1000;
    let mut u = vec![0.0; k1];
    let mut v = vec![0.0; k2];
    let mut streak = 0;
    let mut pivots = 0;

    loop {
        let adj = tree.adjacency();
        potentials(&tree, &adj, cost, &mut u, &mut v);

        // Entering cell: Dantzig's most negative reduced cost, first in
        // row-major order on ties; Bland's first negative cell while a long
        // degenerate streak lasts.
        let bland = streak >= DEGENERATE_STREAK;
        let mut entering = None;
        let mut best = -eps;
        'scan: for i in 0..k1 {
            for j in 0..k2 {
                if is_basic[i * k2 + j] {
                    continue;
                }
                let r = cost[(i, j)] - u[i] - v[j];
                if r < best {
                    entering = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = r;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            return Ok(Solution { flow, pivots });
        };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Numerical(format!(
                "network simplex exceeded {max_pivots} pivots"
            )));
        }

        // Tree path from row ei to column ej closes the cycle with the
        // entering cell; cells on it alternate -, +, -, ... from ej back.
        let path = tree_path(&tree, &adj, ei, k1 + ej);
        let mut theta = f64::INFINITY;
        let mut leaving: Option<usize> = None;
        for (pos, &b) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let (i, j) = tree.basic[b];
                let f = flow[(i, j)];
                let better = match leaving {
                    None => true,
                    Some(l) => f < theta || (f == theta && (i, j) < tree.basic[l]),
                };
                if better {
                    theta = f;
                    leaving = Some(b);
                }
            }
        }
        let leaving = leaving.expect("cycle has a decreasing cell");
        streak = if theta > 0.0 { 0 } else { streak + 1 };

        flow[(ei, ej)] = theta;
        for (pos, &b) in path.iter().enumerate() {
            let (i, j) = tree.basic[b];
            if pos % 2 == 0 {
                flow[(i, j)] -= theta;
            } else {
                flow[(i, j)] += theta;
            }
        }
        let (li, lj) = tree.basic[leaving];
        flow[(li, lj)] = 0.0;
        is_basic[li * k2 + lj] = false;
        is_basic[ei * k2 + ej] = true;
        tree.basic[leaving] = (ei, ej);
    }
}

/// Dual potentials with `u_0 = 0` and `u_i + v_j = c_ij` on basic cells.
fn potentials(
    tree: &Tree,
    adj: &[Vec<(usize, usize)>],
    cost: &Matrix,
    u: &mut [f64],
    v: &mut [f64],
) {
    let k1 = tree.k1;
    let mut seen = vec![false; tree.node_count()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    u[0] = 0.0;
    while let Some(node) = queue.pop_front() {
        for &(next, b) in &adj[node] {
            if seen[next] {
                continue;
            }
            seen[next] = true;
            let (i, j) = tree.basic[b];
            if next >= k1 {
                v[j] = cost[(i, j)] - u[i];
            } else {
                u[i] = cost[(i, j)] - v[j];
            }
            queue.push_back(next);
        }
    }
}

/// Basic-cell indices on the tree path, listed from `to` back to `from`.
fn tree_path(tree: &Tree, adj: &[Vec<(usize, usize)>], from: usize, to: usize) -> Vec<usize> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; tree.node_count()];
    let mut seen = vec![false; tree.node_count()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &(next, b) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                parent[next] = Some((node, b));
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = to;
    while node != from {
        let (prev, b) = parent[node].expect("basis is a spanning tree");
        path.push(b);
        node = prev;
    }
    path
}
