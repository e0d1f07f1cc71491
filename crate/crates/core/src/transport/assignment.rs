//! Exact linear assignment with a lexicographic tie-break.
//!
//! Shortest augmenting paths with row/column potentials (the O(n³) Hungarian
//! variant), then a pass over the tight-edge subgraph that makes the optimum
//! lexicographically smallest among all optimal permutations.

use std::collections::VecDeque;

use super::cost::{centered_cost_matrix, check_finite, DenseMatrix};
use crate::geometry::PointCloud;
use crate::error::{param, Result};

/// Permutation `σ` minimising `Σ_i cost[i][σ(i)]`; ties go to the lexicographically smallest `σ`.
///
/// Entries whose reduced cost is within `1e-9·max(1, max|c|)` of zero count as ties.
pub fn solve_assignment(cost: &DenseMatrix) -> Result<Vec<usize>> {
    if !cost.is_square() {
        return param(format!(
            "assignment needs a square cost matrix, got {}x{}",
            cost.nrows(),
            cost.ncols()
        ));
    }
    check_finite(cost)?;
    let n = cost.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let tol = 1e-9 * cost.max_abs().max(1.0);
    let reduced = reduce(cost);
    let (col_of_row, u, v) = hungarian(&reduced);
    Ok(lexmin_refine(&reduced, &u, &v, col_of_row, tol))
}

/// Optimal matching `x_i → y_σ(i)` for squared Euclidean cost between equal-size clouds.
pub fn match_clouds(x: &PointCloud, y: &PointCloud) -> Result<Vec<usize>> {
    if x.len() != y.len() {
        return param(format!("matching needs equal sizes ({} vs {})", x.len(), y.len()));
    }
    solve_assignment(&centered_cost_matrix(x, y)?)
}

pub fn assignment_cost(cost: &DenseMatrix, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum()
}

/// Subtract row minima, then column minima. Optimal permutations are unchanged, and
/// offsets separable into row and column terms (a translated target) drop out.
fn reduce(cost: &DenseMatrix) -> DenseMatrix {
    let n = cost.nrows();
    let mut c = cost.clone();
    for i in 0..n {
        let row = c.row_mut(i);
        let m = row.iter().copied().fold(f64::INFINITY, f64::min);
        row.iter_mut().for_each(|x| *x -= m);
    }
    let mut col_min = vec![f64::INFINITY; n];
    for i in 0..n {
        for (m, &x) in col_min.iter_mut().zip(c.row(i)) {
            *m = m.min(x);
        }
    }
    for i in 0..n {
        for (x, m) in c.row_mut(i).iter_mut().zip(&col_min) {
            *x -= m;
        }
    }
    c
}

fn hungarian(cost: &DenseMatrix) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.nrows();
    // 1-based with a virtual row/column 0, as in the classical formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = cost.row(i0 - 1);
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - ui0 - v[j];
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        col_of_row[p[j] - 1] = j - 1;
    }
    (col_of_row, u[1..].to_vec(), v[1..].to_vec())
}

/// Greedy row-by-row improvement: give each row the smallest tight column that still
/// admits a perfect tight matching of the remaining rows, found as an alternating path.
fn lexmin_refine(
    cost: &DenseMatrix,
    u: &[f64],
    v: &[f64],
    mut col_of_row: Vec<usize>,
    tol: f64,
) -> Vec<usize> {
    let n = col_of_row.len();
    let tight = |i: usize, j: usize| cost[(i, j)] - u[i] - v[j] <= tol;
    let mut row_of_col = vec![0; n];
    for (i, &j) in col_of_row.iter().enumerate() {
        row_of_col[j] = i;
    }
    let mut locked = vec![false; n];
    // pred[q] = the row that wants q's current column.
    let mut pred = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for i in 0..n {
        let home = col_of_row[i];
        for j in 0..home {
            if locked[j] || !tight(i, j) {
                continue;
            }
            // Row k holding j must be re-routed, ending on `home`, along tight edges.
            let k = row_of_col[j];
            seen.iter_mut().for_each(|s| *s = false);
            queue.clear();
            seen[k] = true;
            seen[i] = true;
            queue.push_back(k);
            let mut found = None;
            'bfs: while let Some(r) = queue.pop_front() {
                for c in 0..n {
                    if locked[c] || c == j || c == col_of_row[r] || !tight(r, c) {
                        continue;
                    }
                    if c == home {
                        found = Some(r);
                        break 'bfs;
                    }
                    let owner = row_of_col[c];
                    if !seen[owner] {
                        seen[owner] = true;
                        pred[owner] = r;
                        queue.push_back(owner);
                    }
                }
            }
            let Some(mut r) = found else { continue };
            let mut take = home;
            loop {
                let old = col_of_row[r];
                col_of_row[r] = take;
                row_of_col[take] = r;
                if r == k {
                    break;
                }
                take = old;
                r = pred[r];
            }
            col_of_row[i] = j;
            row_of_col[j] = i;
            break;
        }
        locked[col_of_row[i]] = true;
    }
    col_of_row
}
