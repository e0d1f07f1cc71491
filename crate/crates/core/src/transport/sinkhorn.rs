use super::cost::{check_finite, DenseMatrix};
use crate::error::{check_dim, param, Result};

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    pub plan: DenseMatrix,
    /// `Σ_i |Σ_j π_ij − a_i|` after the last column update (columns are then exact).
    pub marginal_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn log_sum_exp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + vals.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Entropic OT in the log domain.
///
/// Non-convergence is reported through `converged`, not as an error.
pub fn sinkhorn(
    cost: &DenseMatrix,
    src_w: &[f64],
    tgt_w: &[f64],
    eps: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornResult> {
    if !(eps > 0.0) {
        return param(format!("sinkhorn eps must be positive, got {eps}"));
    }
    let (n, m) = (cost.nrows(), cost.ncols());
    check_dim(n, src_w.len(), "sinkhorn source weights")?;
    check_dim(m, tgt_w.len(), "sinkhorn target weights")?;
    check_finite(cost)?;
    for w in [src_w, tgt_w] {
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-9 || w.iter().any(|&x| !(x >= 0.0)) {
            return param("sinkhorn weights must be nonnegative and sum to 1");
        }
    }
    let log_a: Vec<f64> = src_w.iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = tgt_w.iter().map(|w| w.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut err = f64::INFINITY;
    let mut iterations = 0;
    let plan_entry = |f: &[f64], g: &[f64], i: usize, j: usize| {
        let v = (f[i] + g[j] - cost[(i, j)]) / eps;
        if v.is_nan() {
            0.0
        } else {
            v.exp()
        }
    };
    while iterations < max_iter {
        iterations += 1;
        for i in 0..n {
            let row = cost.row(i);
            f[i] = eps * log_a[i] - eps * log_sum_exp((0..m).map(|j| (g[j] - row[j]) / eps));
        }
        for j in 0..m {
            g[j] = eps * log_b[j] - eps * log_sum_exp((0..n).map(|i| (f[i] - cost[(i, j)]) / eps));
        }
        err = (0..n)
            .map(|i| ((0..m).map(|j| plan_entry(&f, &g, i, j)).sum::<f64>() - src_w[i]).abs())
            .sum();
        if err <= tol {
            break;
        }
    }
    let plan = DenseMatrix::from_fn(n, m, |i, j| plan_entry(&f, &g, i, j));
    Ok(SinkhornResult {
        plan,
        marginal_error: err,
        iterations,
        converged: err <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{assignment_cost, solve_assignment};

    #[test]
    fn one_by_one() {
        let c = DenseMatrix::from_rows(&[vec![7.0]]).unwrap();
        let r = sinkhorn(&c, &[1.0], &[1.0], 0.1, 10, 1e-12).unwrap();
        assert!((r.plan[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn symmetric_two_by_two() {
        let c = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let r = sinkhorn(&c, &[0.5, 0.5], &[0.5, 0.5], 0.5, 1000, 1e-12).unwrap();
        assert!((r.plan[(0, 0)] - r.plan[(1, 1)]).abs() < 1e-12);
        assert!((r.plan[(0, 1)] - r.plan[(1, 0)]).abs() < 1e-12);
    }

    #[test]
    fn small_eps_approaches_assignment() {
        let rows = vec![
            vec![4.0, 1.0, 3.0, 7.0, 2.0],
            vec![2.0, 0.0, 5.0, 1.0, 9.0],
            vec![3.0, 2.0, 2.0, 8.0, 4.0],
            vec![6.0, 3.0, 1.0, 2.0, 5.0],
            vec![1.0, 7.0, 4.0, 3.0, 2.0],
        ];
        let c = DenseMatrix::from_rows(&rows).unwrap();
        let w = vec![0.2; 5];
        let r = sinkhorn(&c, &w, &w, 0.05, 50_000, 1e-9).unwrap();
        assert!(r.converged, "err {}", r.marginal_error);
        let exact = assignment_cost(&c, &solve_assignment(&c).unwrap()) / 5.0;
        let ent = r.plan.dot(&c);
        assert!((ent - exact).abs() <= 0.01 * exact, "{ent} vs {exact}");
        for (s, w) in r.plan.col_sums().iter().zip(&w) {
            assert!((s - w).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_eps() {
        let c = DenseMatrix::zeros(1, 1);
        assert!(sinkhorn(&c, &[1.0], &[1.0], 0.0, 1, 1e-9).is_err());
    }
}
