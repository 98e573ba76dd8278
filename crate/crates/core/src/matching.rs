//! Minimum-cost perfect matching between two equally sized center sets.
//!
//! Small problems (`n <= 8`) are solved by enumerating permutations in
//! lexicographic order, which makes tie-breaking deterministic. Larger ones
//! use the O(n^3) Hungarian method with row/column potentials.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::types::{dist, Centers};

pub const EXHAUSTIVE_MAX: usize = 8;

/// Solves the square assignment problem.
///
/// Returns `assignment` with `assignment[row] = column` and its total cost.
pub fn min_cost_assignment(cost: ArrayView2<'_, f64>) -> Result<(Vec<usize>, f64)> {
    let n = cost.nrows();
    if n != cost.ncols() {
        return Err(Error::ShapeMismatch(format!("cost matrix is {}x{}", n, cost.ncols())));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("cost matrix"));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    if n <= EXHAUSTIVE_MAX {
        Ok(exhaustive(cost))
    } else {
        Ok(hungarian(cost))
    }
}

fn exhaustive(cost: ArrayView2<'_, f64>) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let total = |p: &[usize]| p.iter().enumerate().map(|(r, &c)| cost[[r, c]]).sum::<f64>();
    let mut best = perm.clone();
    let mut best_cost = total(&perm);
    while next_permutation(&mut perm) {
        let c = total(&perm);
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    (best, best_cost)
}

/// Advances `p` to the next lexicographic permutation; false once exhausted.
fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn hungarian(cost: ArrayView2<'_, f64>) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    // 1-based potentials; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
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
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[col_owner[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(r, &c)| cost[[r, c]]).sum();
    (assignment, total)
}

/// Euclidean distance matrix between the rows of `a` and the rows of `b`.
pub fn center_distance_matrix(a: &Centers, b: &Centers) -> Array2<f64> {
    Array2::from_shape_fn((a.k(), b.k()), |(i, j)| dist(a.center(i), b.center(j)))
}

/// Finds the order in which `candidate` best lines up with `reference`.
///
/// `candidate.permuted(&order)` has row `j` matched to `reference` row `j`.
/// The second value is the matched sum of Euclidean distances.
pub fn align_centers(reference: &Centers, candidate: &Centers) -> Result<(Vec<usize>, f64)> {
    if reference.k() != candidate.k() {
        return Err(Error::ShapeMismatch(format!(
            "cannot match {} centers against {}",
            candidate.k(),
            reference.k()
        )));
    }
    candidate.check_dim(reference.dim())?;
    let cost = center_distance_matrix(reference, candidate);
    min_cost_assignment(cost.view())
}
