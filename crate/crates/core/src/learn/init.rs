use rand::Rng;

use crate::error::{Error, Result};
use crate::points::{squared_distance, Points};

/// Farthest-point seeding: a random first point, then repeatedly the point
/// farthest from those already chosen (lowest index on ties).
pub(crate) fn farthest_points<R: Rng + ?Sized>(data: &Points, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    let n = data.len();
    if m == 0 {
        return Err(Error::param("m", "need at least one component"));
    }
    if n < m {
        return Err(Error::InsufficientData(format!(
            "{n} points for {m} components"
        )));
    }
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut taken = vec![false; n];
    taken[first] = true;
    let mut nearest: Vec<f64> = data
        .rows()
        .map(|x| squared_distance(x, data.row(first)))
        .collect();
    while chosen.len() < m {
        let mut best = None;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in nearest.iter().enumerate() {
            if !taken[i] && d > best_d {
                best = Some(i);
                best_d = d;
            }
        }
        let next = best.expect("n >= m leaves an untaken point");
        taken[next] = true;
        chosen.push(next);
        for (i, x) in data.rows().enumerate() {
            nearest[i] = nearest[i].min(squared_distance(x, data.row(next)));
        }
    }
    Ok(chosen)
}
