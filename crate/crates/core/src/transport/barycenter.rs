use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::assignment::match_clouds;
use super::cost::{squared_cost_matrix, squared_distance, DenseMatrix};
use super::exact::exact_plan;
use crate::error::{check_dim, param, Result};
use crate::geometry::{PointCloud, RngStream, StreamId};

#[derive(Debug, Clone, PartialEq)]
pub enum BarycenterInit {
    /// Copy of (a prefix or resampling of) the first marginal.
    FirstMarginal,
    /// Indices into the first marginal drawn from this seed.
    Seed(u64),
    Cloud(PointCloud),
}

#[derive(Debug, Clone)]
pub struct BarycenterOptions {
    /// Defaults to the size of the first marginal.
    pub support_size: Option<usize>,
    pub init: BarycenterInit,
    /// Stop once the mean support movement falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BarycenterOptions {
    fn default() -> Self {
        Self {
            support_size: None,
            init: BarycenterInit::FirstMarginal,
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarycenterReport {
    pub iterations: usize,
    pub final_movement: f64,
    pub wall_time_ms: f64,
    pub converged: bool,
    /// `Σ_j λ_j W2²(support, marginal_j)` measured at every iterate, starting with the initial one.
    pub objective: Vec<f64>,
}

/// Plan from the uniform support to one marginal, as `π[i][k]`.
enum Plan {
    Perm(Vec<usize>),
    Dense(DenseMatrix),
}

fn plan_to(support: &PointCloud, marginal: &PointCloud) -> Result<(Plan, f64)> {
    if support.len() == marginal.len() && marginal.is_uniform() {
        let perm = match_clouds(support, marginal)?;
        let cost = perm
            .iter()
            .enumerate()
            .map(|(i, &k)| squared_distance(support.point(i), marginal.point(k)))
            .sum::<f64>()
            / support.len() as f64;
        Ok((Plan::Perm(perm), cost))
    } else {
        let c = squared_cost_matrix(support, marginal)?;
        let plan = exact_plan(&c, support.weights(), marginal.weights())?;
        let cost = plan.dot(&c);
        Ok((Plan::Dense(plan), cost))
    }
}

/// Free-support Wasserstein barycenter by the barycentric-projection fixed point.
pub fn free_support_barycenter(
    marginals: &[PointCloud],
    lambdas: &[f64],
    opts: &BarycenterOptions,
) -> Result<(PointCloud, BarycenterReport)> {
    let started = Instant::now();
    let Some(first) = marginals.first() else {
        return param("barycenter needs at least one marginal");
    };
    check_dim(marginals.len(), lambdas.len(), "barycenter weights")?;
    if lambdas.iter().any(|&l| !(l >= 0.0)) {
        return param(
            "barycenter weights must be nonnegative; the free-support oracle is undefined outside the simplex",
        );
    }
    if (lambdas.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return param("barycenter weights must sum to 1");
    }
    let d = first.dim();
    for m in marginals {
        check_dim(d, m.dim(), "barycenter marginal")?;
    }
    let size = opts.support_size.unwrap_or(first.len());
    if size == 0 {
        return param("support size must be positive");
    }
    let mut support = match &opts.init {
        BarycenterInit::FirstMarginal => {
            let idx: Vec<usize> = (0..size).map(|i| i % first.len()).collect();
            first.select(&idx)
        }
        BarycenterInit::Seed(seed) => {
            let mut rng = RngStream::new(*seed, StreamId::Oracle);
            let idx: Vec<usize> = (0..size).map(|_| rng.index(first.len())).collect();
            first.select(&idx)
        }
        BarycenterInit::Cloud(c) => {
            check_dim(d, c.dim(), "barycenter init")?;
            check_dim(size, c.len(), "barycenter init size")?;
            c.select(&(0..size).collect::<Vec<_>>())
        }
    };
    let w_support = 1.0 / size as f64;
    let mut objective = Vec::new();
    let mut movement = f64::INFINITY;
    let mut iterations = 0;
    let mut next = vec![0.0; size * d];
    loop {
        let mut j_val = 0.0;
        next.iter_mut().for_each(|v| *v = 0.0);
        for (marg, &lam) in marginals.iter().zip(lambdas) {
            if lam == 0.0 {
                continue;
            }
            let (plan, cost) = plan_to(&support, marg)?;
            j_val += lam * cost;
            match plan {
                Plan::Perm(p) => {
                    for (i, &k) in p.iter().enumerate() {
                        for (o, y) in next[i * d..(i + 1) * d].iter_mut().zip(marg.point(k)) {
                            *o += lam * y;
                        }
                    }
                }
                Plan::Dense(pi) => {
                    for i in 0..size {
                        let out = &mut next[i * d..(i + 1) * d];
                        for (k, &mass) in pi.row(i).iter().enumerate() {
                            if mass == 0.0 {
                                continue;
                            }
                            let scale = lam * mass / w_support;
                            for (o, y) in out.iter_mut().zip(marg.point(k)) {
                                *o += scale * y;
                            }
                        }
                    }
                }
            }
        }
        objective.push(j_val);
        if iterations >= opts.max_iter || movement < opts.tol {
            break;
        }
        iterations += 1;
        movement = support
            .points()
            .zip(next.chunks_exact(d))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .sum::<f64>()
            / size as f64;
        support = PointCloud::new(d, next.clone())?;
    }
    let report = BarycenterReport {
        iterations,
        final_movement: movement,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        converged: movement < opts.tol,
        objective,
    };
    Ok((support, report))
}

/// `Σ_j λ_j W2²(support, marginal_j)` with exact plans.
pub fn barycenter_objective(
    support: &PointCloud,
    marginals: &[PointCloud],
    lambdas: &[f64],
) -> Result<f64> {
    let mut total = 0.0;
    for (m, &l) in marginals.iter().zip(lambdas) {
        if l != 0.0 {
            total += l * plan_to(support, m)?.1;
        }
    }
    Ok(total)
}
