use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::gaussian::{sample_oracle, GaussianSpec};
use super::metric::Metric;
use crate::error::{check_dim, param, Result};
use crate::field::VectorField;
use crate::geometry::{empirical_moments, PointCloud, RngStream, StreamId};
use crate::inference::{generate, Integrator, Strategy, DEFAULT_STEPS};
use crate::training::DataSource;
use crate::transport::{free_support_barycenter, BarycenterInit, BarycenterOptions};

#[derive(Debug, Clone, PartialEq)]
pub enum Oracle {
    FreeSupport,
    AnalyticGaussian(GaussianSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    FreeSupport,
    AnalyticGaussian,
    None,
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    /// Points in the model's source cloud and in every oracle draw.
    pub n_points: usize,
    pub steps: usize,
    /// Retargeted to each grid point.
    pub strategy: Strategy,
    pub metric: Metric,
    pub seed: u64,
    pub barycenter: BarycenterOptions,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            n_points: 512,
            steps: DEFAULT_STEPS,
            strategy: Strategy::diagonal(Vec::new()),
            metric: Metric::Auto,
            seed: 0,
            barycenter: BarycenterOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridEntry {
    pub param_point: Vec<f64>,
    pub oracle: OracleKind,
    pub w2: Option<f64>,
    /// W2 between two independent draws at the same sample size.
    pub sampling_floor: Option<f64>,
    pub model_mean: Vec<f64>,
    pub oracle_mean: Option<Vec<f64>>,
    pub model_wall_ms: f64,
    pub oracle_wall_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarycenterGridReport {
    pub metric: String,
    pub strategy: String,
    pub entries: Vec<GridEntry>,
}

/// Model endpoint and oracle cloud for one grid point, for plotting.
#[derive(Debug, Clone)]
pub struct GridClouds {
    pub model: PointCloud,
    pub oracle: Option<PointCloud>,
}

/// Oracle-stream key of the model's source draw.
pub const SOURCE_KEY: u32 = 2_000_000;

fn in_simplex(t: &[f64]) -> bool {
    const TOL: f64 = 1e-12;
    t.iter().all(|&v| v >= -TOL) && t.iter().sum::<f64>() <= 1.0 + TOL
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Compare model endpoints on `grid` against a barycenter oracle.
///
/// `marginals` are `ρ_0, …, ρ_n`; the model starts from a fresh draw of `ρ_0`.
pub fn barycenter_compare(
    field: &dyn VectorField,
    marginals: &[DataSource],
    grid: &[Vec<f64>],
    oracle: &Oracle,
    opts: &CompareOptions,
) -> Result<(BarycenterGridReport, Vec<GridClouds>)> {
    let n = field.n_params();
    check_dim(n + 1, marginals.len(), "barycenter comparison marginals")?;
    for m in marginals {
        m.validate()?;
        check_dim(field.dim(), m.dim(), "barycenter comparison marginal")?;
    }
    if let Oracle::AnalyticGaussian(spec) = oracle {
        spec.validate()?;
        check_dim(n, spec.n_targets(), "gaussian oracle targets")?;
    }
    if grid.is_empty() {
        return param("comparison grid must contain at least one point");
    }
    let size = opts.n_points;
    if size == 0 {
        return param("comparison needs at least one point per cloud");
    }
    let seed = opts.seed;
    let source = marginals[0].sample(size, &mut RngStream::keyed(seed, StreamId::Oracle, SOURCE_KEY))?;
    let draw = |j: usize, key: u32| marginals[j].sample(size, &mut RngStream::keyed(seed, StreamId::Oracle, key));

    // Fixed marginal draws for the free-support oracle and their resampling floors.
    let mut oracle_marginals = Vec::new();
    let mut marginal_floor = Vec::new();
    if matches!(oracle, Oracle::FreeSupport) {
        for j in 0..=n {
            let base = 1_000_000 + 3 * j as u32;
            oracle_marginals.push(draw(j, base)?);
            let (f1, f2) = (draw(j, base + 1)?, draw(j, base + 2)?);
            marginal_floor.push(opts.metric.distance(&f1, &f2, seed, base)?);
        }
    }

    let mut entries = Vec::with_capacity(grid.len());
    let mut clouds = Vec::with_capacity(grid.len());
    for (k, t) in grid.iter().enumerate() {
        check_dim(n, t.len(), "grid point")?;
        let key = 3 * k as u32;
        let started = Instant::now();
        let model = generate(field, &source, &opts.strategy.with_terminal(t), opts.steps, Integrator::Euler)?;
        let model_wall_ms = elapsed_ms(started);
        let model_mean = empirical_moments(&model)?.0;

        let started = Instant::now();
        let (kind, oracle_cloud, floor) = match oracle {
            Oracle::AnalyticGaussian(spec) => {
                let mut rng = RngStream::keyed(seed, StreamId::Oracle, key);
                let cloud = sample_oracle(spec, t, size, &mut rng)?;
                let f1 = sample_oracle(spec, t, size, &mut RngStream::keyed(seed, StreamId::Oracle, key + 1))?;
                let f2 = sample_oracle(spec, t, size, &mut RngStream::keyed(seed, StreamId::Oracle, key + 2))?;
                let floor = opts.metric.distance(&f1, &f2, seed, key + 1)?;
                (OracleKind::AnalyticGaussian, Some(cloud), Some(floor))
            }
            Oracle::FreeSupport if in_simplex(t) => {
                let mut lambdas = vec![(1.0 - t.iter().sum::<f64>()).max(0.0)];
                lambdas.extend(t.iter().map(|v| v.max(0.0)));
                let total: f64 = lambdas.iter().sum();
                lambdas.iter_mut().for_each(|l| *l /= total);
                let mut bopts = opts.barycenter.clone();
                // Start from the heaviest marginal so vertices converge in one step.
                let heaviest = (0..lambdas.len())
                    .max_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                if matches!(bopts.init, BarycenterInit::FirstMarginal) {
                    bopts.init = BarycenterInit::Cloud(oracle_marginals[heaviest].clone());
                }
                let (bary, _) = free_support_barycenter(&oracle_marginals, &lambdas, &bopts)?;
                let floor = lambdas
                    .iter()
                    .zip(&marginal_floor)
                    .filter(|(l, _)| **l > 0.0)
                    .map(|(_, f)| *f)
                    .fold(0.0, f64::max);
                (OracleKind::FreeSupport, Some(bary), Some(floor))
            }
            Oracle::FreeSupport => (OracleKind::None, None, None),
        };
        let oracle_wall_ms = oracle_cloud.as_ref().map(|_| elapsed_ms(started));
        let w2 = oracle_cloud
            .as_ref()
            .map(|o| opts.metric.distance(&model, o, seed, key))
            .transpose()?;
        let oracle_mean = oracle_cloud
            .as_ref()
            .map(|o| empirical_moments(o).map(|m| m.0))
            .transpose()?;
        entries.push(GridEntry {
            param_point: t.clone(),
            oracle: kind,
            w2,
            sampling_floor: floor,
            model_mean,
            oracle_mean,
            model_wall_ms,
            oracle_wall_ms,
        });
        clouds.push(GridClouds {
            model,
            oracle: oracle_cloud,
        });
    }
    Ok((
        BarycenterGridReport {
            metric: opts.metric.label(size),
            strategy: opts.strategy.label(),
            entries,
        },
        clouds,
    ))
}
