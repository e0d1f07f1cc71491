//! Exact discrete OT between weighted clouds of any sizes, by successive
//! shortest paths on the transportation network (dense Dijkstra with potentials).

use super::cost::{check_finite, DenseMatrix};
use crate::error::{check_dim, param, Result};

const MASS_EPS: f64 = 1e-14;

/// Optimal plan with row sums `src_w` and column sums `tgt_w`.
pub fn exact_plan(cost: &DenseMatrix, src_w: &[f64], tgt_w: &[f64]) -> Result<DenseMatrix> {
    let (n, m) = (cost.nrows(), cost.ncols());
    check_dim(n, src_w.len(), "plan source weights")?;
    check_dim(m, tgt_w.len(), "plan target weights")?;
    check_finite(cost)?;
    if (src_w.iter().sum::<f64>() - tgt_w.iter().sum::<f64>()).abs() > 1e-9 {
        return param("source and target masses differ");
    }
    let mut flow = DenseMatrix::zeros(n, m);
    let mut supply = src_w.to_vec();
    let mut demand = tgt_w.to_vec();
    // Reduced cost of row i → column j is c_ij + phi_r[i] − phi_c[j] ≥ 0.
    let mut phi_r = vec![0.0; n];
    let mut phi_c: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| cost[(i, j)]).fold(f64::INFINITY, f64::min))
        .collect();
    let mut dist_r = vec![0.0; n];
    let mut dist_c = vec![0.0; m];
    let mut done_r = vec![false; n];
    let mut done_c = vec![false; m];
    let mut parent_c = vec![0usize; m]; // row that reached column j
    let mut parent_r = vec![usize::MAX; n]; // column that reached row i (MAX = source)
    loop {
        if supply.iter().all(|&s| s <= MASS_EPS) {
            break;
        }
        for i in 0..n {
            dist_r[i] = if supply[i] > MASS_EPS { 0.0 } else { f64::INFINITY };
            parent_r[i] = usize::MAX;
        }
        dist_c.iter_mut().for_each(|d| *d = f64::INFINITY);
        done_r.iter_mut().for_each(|d| *d = false);
        done_c.iter_mut().for_each(|d| *d = false);
        let target = loop {
            let mut best = f64::INFINITY;
            let mut pick: Option<(bool, usize)> = None;
            for i in 0..n {
                if !done_r[i] && dist_r[i] < best {
                    best = dist_r[i];
                    pick = Some((true, i));
                }
            }
            for j in 0..m {
                if !done_c[j] && dist_c[j] < best {
                    best = dist_c[j];
                    pick = Some((false, j));
                }
            }
            match pick {
                None => break None,
                Some((true, i)) => {
                    done_r[i] = true;
                    let row = cost.row(i);
                    for j in 0..m {
                        let nd = best + row[j] + phi_r[i] - phi_c[j];
                        if !done_c[j] && nd < dist_c[j] {
                            dist_c[j] = nd;
                            parent_c[j] = i;
                        }
                    }
                }
                Some((false, j)) => {
                    done_c[j] = true;
                    if demand[j] > MASS_EPS {
                        break Some(j);
                    }
                    for i in 0..n {
                        if flow[(i, j)] > 0.0 && !done_r[i] {
                            let nd = best - cost[(i, j)] + phi_c[j] - phi_r[i];
                            if nd < dist_r[i] {
                                dist_r[i] = nd;
                                parent_r[i] = j;
                            }
                        }
                    }
                }
            }
        };
        let Some(t) = target else { break };
        let dt = dist_c[t];
        for i in 0..n {
            phi_r[i] += dist_r[i].min(dt);
        }
        for j in 0..m {
            phi_c[j] += dist_c[j].min(dt);
        }
        // Bottleneck along the path back to a supplying row.
        let mut delta = demand[t];
        let mut j = t;
        let start = loop {
            let i = parent_c[j];
            match parent_r[i] {
                usize::MAX => break i,
                pj => {
                    delta = delta.min(flow[(i, pj)]);
                    j = pj;
                }
            }
        };
        delta = delta.min(supply[start]);
        let mut j = t;
        loop {
            let i = parent_c[j];
            flow[(i, j)] += delta;
            match parent_r[i] {
                usize::MAX => break,
                pj => {
                    flow[(i, pj)] -= delta;
                    if flow[(i, pj)] < MASS_EPS {
                        flow[(i, pj)] = 0.0;
                    }
                    j = pj;
                }
            }
        }
        supply[start] -= delta;
        demand[t] -= delta;
    }
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RngStream, StreamId};
    use crate::transport::{assignment_cost, solve_assignment};

    #[test]
    fn uniform_square_matches_assignment() {
        let mut rng = RngStream::new(8, StreamId::Oracle);
        for n in [1, 3, 7, 12] {
            let c = DenseMatrix::from_fn(n, n, |_, _| rng.uniform() * 10.0);
            let w = vec![1.0 / n as f64; n];
            let plan = exact_plan(&c, &w, &w).unwrap();
            let exact = assignment_cost(&c, &solve_assignment(&c).unwrap()) / n as f64;
            assert!((plan.dot(&c) - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn marginals_hold_for_unequal_sizes() {
        let mut rng = RngStream::new(9, StreamId::Oracle);
        let c = DenseMatrix::from_fn(5, 3, |_, _| rng.uniform());
        let a = [0.1, 0.3, 0.2, 0.25, 0.15];
        let b = [0.5, 0.2, 0.3];
        let plan = exact_plan(&c, &a, &b).unwrap();
        for (s, w) in plan.row_sums().iter().zip(&a) {
            assert!((s - w).abs() < 1e-12);
        }
        for (s, w) in plan.col_sums().iter().zip(&b) {
            assert!((s - w).abs() < 1e-12);
        }
        assert!(plan.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn one_to_many_split() {
        let c = DenseMatrix::from_rows(&[vec![1.0, 4.0]]).unwrap();
        let plan = exact_plan(&c, &[1.0], &[0.25, 0.75]).unwrap();
        assert_eq!(plan.as_slice(), &[0.25, 0.75]);
    }

    #[test]
    fn two_by_three_against_lp_vertex_enumeration() {
        // 2×3 transportation problems have a one-parameter family of vertices; the
        // optimum over a fine grid of the free variable bounds the solver from below.
        let c = DenseMatrix::from_rows(&[vec![1.0, 3.0, 2.0], vec![4.0, 1.0, 3.0]]).unwrap();
        let a = [0.6, 0.4];
        let b = [0.3, 0.3, 0.4];
        let got = exact_plan(&c, &a, &b).unwrap().dot(&c);
        let mut best = f64::INFINITY;
        let steps = 600;
        for p in 0..=steps {
            for q in 0..=steps {
                let x00 = 0.3 * p as f64 / steps as f64;
                let x01 = 0.3 * q as f64 / steps as f64;
                let x02 = a[0] - x00 - x01;
                if !(0.0..=0.4 + 1e-12).contains(&x02) {
                    continue;
                }
                let row1 = [b[0] - x00, b[1] - x01, b[2] - x02];
                if row1.iter().any(|&v| v < -1e-12) {
                    continue;
                }
                let val = x00 * 1.0 + x01 * 3.0 + x02 * 2.0 + row1[0] * 4.0 + row1[1] + row1[2] * 3.0;
                best = best.min(val);
            }
        }
        assert!((got - best).abs() < 1e-9, "{got} vs {best}");
    }
}
