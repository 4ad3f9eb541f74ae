//! Minimum-cost perfect assignment by shortest augmenting paths with dual
//! potentials (the O(n^3) Hungarian method).

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Row-to-column assignment minimizing the summed cost of a square matrix,
/// and that minimum.
pub fn solve_assignment(cost: &Matrix) -> Result<(Vec<usize>, f64)> {
    let n = cost.rows();
    if cost.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: cost.cols(),
        });
    }
    if cost.iter().any(|c| c.is_nan() || *c == f64::NEG_INFINITY) {
        return Err(Error::Numerical("assignment cost is NaN or -inf".into()));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    // +inf entries become a penalty larger than any finite assignment.
    let finite_max = cost
        .iter()
        .filter(|c| c.is_finite())
        .fold(0.0f64, |m, c| m.max(c.abs()));
    let big = (finite_max + 1.0) * (n as f64 + 1.0) * 4.0;
    let c = |i: usize, j: usize| {
        let v = cost[(i, j)];
        if v.is_finite() {
            v
        } else {
            big
        }
    };

    // 1-based arrays with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[(i, j)])
        .sum();
    Ok((assignment, total))
}

/// Like [`solve_assignment`] but returns the lexicographically smallest
/// optimal permutation (values equal within `1e-12` relative count as ties).
/// Cost grows as `n^5`, so this is meant for small problems.
pub fn solve_assignment_lexicographic(cost: &Matrix) -> Result<(Vec<usize>, f64)> {
    let n = cost.rows();
    let (_, best) = solve_assignment(cost)?;
    if !best.is_finite() {
        return solve_assignment(cost);
    }
    let tol = 1e-12 * (1.0 + best.abs());
    let mut fixed: Vec<usize> = Vec::with_capacity(n);
    let mut spent = 0.0;
    for i in 0..n {
        let free_cols: Vec<usize> = (0..n).filter(|j| !fixed.contains(j)).collect();
        let mut chosen = None;
        for &j in &free_cols {
            let rest_rows: Vec<usize> = (i + 1..n).collect();
            let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&c| c != j).collect();
            let sub = Matrix::from_fn(rest_rows.len(), rest_cols.len(), |a, b| {
                cost[(rest_rows[a], rest_cols[b])]
            });
            let (_, rest) = solve_assignment(&sub)?;
            if spent + cost[(i, j)] + rest <= best + tol {
                chosen = Some(j);
                break;
            }
        }
        let j = chosen.ok_or_else(|| Error::Numerical("assignment refinement lost the optimum".into()))?;
        spent += cost[(i, j)];
        fixed.push(j);
    }
    Ok((fixed, spent))
}

#[cfg(test)]
pub(crate) fn brute_force(cost: &Matrix) -> (Vec<usize>, f64) {
    fn rec(cost: &Matrix, row: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, acc: f64, best: &mut (Vec<usize>, f64)) {
        let n = cost.rows();
        if row == n {
            if acc < best.1 {
                *best = (cur.clone(), acc);
            }
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(cost, row + 1, used, cur, acc + cost[(row, j)], best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (Vec::new(), f64::INFINITY);
    rec(cost, 0, &mut vec![false; cost.rows()], &mut Vec::new(), 0.0, &mut best);
    best
}
