use std::path::Path;

use serde::{Deserialize, Serialize};

use super::paths::{strategy_to_path, PathSpec, Strategy};
use crate::error::{check_dim, param, Result};
use crate::field::VectorField;
use crate::geometry::{io, PointCloud};

pub const DEFAULT_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    #[default]
    Euler,
    /// Explicit midpoint, second order.
    Midpoint,
}

/// Snapshots `(parameter point, cloud)` from start to end, one per step plus the start.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<(Vec<f64>, PointCloud)>,
}

impl Trajectory {
    pub fn endpoint(&self) -> &PointCloud {
        &self.snapshots.last().expect("trajectory has a start").1
    }
}

struct Stepper<'a> {
    field: &'a dyn VectorField,
    integrator: Integrator,
    d: usize,
    buf: Vec<f64>,
    mid: Vec<f64>,
    gamma_mid: Vec<f64>,
}

impl Stepper<'_> {
    /// `x ← x + Σ_i δ_i u_i(x, γ)` (or its midpoint version).
    fn step(&mut self, x: &mut [f64], gamma: &[f64], delta: &[f64]) {
        let d = self.d;
        self.field.eval(x, gamma, &mut self.buf);
        match self.integrator {
            Integrator::Euler => {
                for (i, &di) in delta.iter().enumerate() {
                    if di == 0.0 {
                        continue;
                    }
                    for (xv, u) in x.iter_mut().zip(&self.buf[i * d..(i + 1) * d]) {
                        *xv += di * u;
                    }
                }
            }
            Integrator::Midpoint => {
                self.mid.copy_from_slice(x);
                for (i, &di) in delta.iter().enumerate() {
                    for (m, u) in self.mid.iter_mut().zip(&self.buf[i * d..(i + 1) * d]) {
                        *m += 0.5 * di * u;
                    }
                }
                for ((g, &g0), &di) in self.gamma_mid.iter_mut().zip(gamma).zip(delta) {
                    *g = g0 + 0.5 * di;
                }
                self.field.eval(&self.mid, &self.gamma_mid, &mut self.buf);
                for (i, &di) in delta.iter().enumerate() {
                    for (xv, u) in x.iter_mut().zip(&self.buf[i * d..(i + 1) * d]) {
                        *xv += di * u;
                    }
                }
            }
        }
    }
}

/// Walk `path`, calling `visit` on the start and after every step.
pub fn integrate_with(
    field: &dyn VectorField,
    cloud: &PointCloud,
    path: &PathSpec,
    integrator: Integrator,
    mut visit: impl FnMut(&[f64], &PointCloud),
) -> Result<PointCloud> {
    path.validate()?;
    let (d, n) = (field.dim(), field.n_params());
    check_dim(d, cloud.dim(), "cloud vs field dimension")?;
    check_dim(n, path.n_params(), "path vs field parameter count")?;
    let mut stepper = Stepper {
        field,
        integrator,
        d,
        buf: vec![0.0; n * d],
        mid: vec![0.0; d],
        gamma_mid: vec![0.0; n],
    };
    let mut cur = cloud.clone();
    visit(path.start(), &cur);
    let k = path.steps_per_segment;
    let mut gamma = vec![0.0; n];
    let mut delta = vec![0.0; n];
    for seg in path.waypoints.windows(2) {
        let (p, q) = (&seg[0], &seg[1]);
        for ((dv, a), b) in delta.iter_mut().zip(p).zip(q) {
            *dv = (b - a) / k as f64;
        }
        for step in 0..k {
            let frac = step as f64 / k as f64;
            for ((g, a), b) in gamma.iter_mut().zip(p).zip(q) {
                *g = a + frac * (b - a);
            }
            for x in cur.points_mut() {
                stepper.step(x, &gamma, &delta);
            }
            if step + 1 == k {
                gamma.copy_from_slice(q);
            } else {
                let f = (step + 1) as f64 / k as f64;
                for ((g, a), b) in gamma.iter_mut().zip(p).zip(q) {
                    *g = a + f * (b - a);
                }
            }
            visit(&gamma, &cur);
        }
    }
    Ok(cur)
}

pub fn integrate_path(
    field: &dyn VectorField,
    cloud: &PointCloud,
    path: &PathSpec,
    integrator: Integrator,
) -> Result<Trajectory> {
    let mut snapshots = Vec::with_capacity(path.total_steps() + 1);
    integrate_with(field, cloud, path, integrator, |g, c| snapshots.push((g.to_vec(), c.clone())))?;
    Ok(Trajectory { snapshots })
}

/// Endpoint of a strategy with `total_steps` Euler (or midpoint) steps.
pub fn generate(
    field: &dyn VectorField,
    cloud: &PointCloud,
    strategy: &Strategy,
    total_steps: usize,
    integrator: Integrator,
) -> Result<PointCloud> {
    let path = strategy_to_path(strategy, field.n_params(), total_steps)?;
    integrate_with(field, cloud, &path, integrator, |_, _| {})
}

/// One endpoint per grid point, each reached by `strategy` retargeted to that point.
pub fn generate_grid(
    field: &dyn VectorField,
    cloud: &PointCloud,
    grid: &[Vec<f64>],
    strategy: &Strategy,
    total_steps: usize,
    integrator: Integrator,
) -> Result<Vec<(Vec<f64>, PointCloud)>> {
    if grid.is_empty() {
        return param("grid must contain at least one point");
    }
    grid.iter()
        .map(|t| {
            let end = generate(field, cloud, &strategy.with_terminal(t), total_steps, integrator)?;
            Ok((t.clone(), end))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryManifest {
    strategy: String,
    steps: usize,
    param_points: Vec<Vec<f64>>,
    files: Vec<String>,
}

/// Write `snapshot_XXXX.csv` files plus `trajectory.json` into `dir`.
pub fn export_trajectory(traj: &Trajectory, strategy: &str, dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (k, (_, cloud)) in traj.snapshots.iter().enumerate() {
        let name = format!("snapshot_{k:04}.csv");
        io::save_csv(cloud, false, &dir.join(&name))?;
        files.push(name);
    }
    let manifest = TrajectoryManifest {
        strategy: strategy.to_string(),
        steps: traj.snapshots.len().saturating_sub(1),
        param_points: traj.snapshots.iter().map(|(g, _)| g.clone()).collect(),
        files: files.clone(),
    };
    std::fs::write(dir.join("trajectory.json"), serde_json::to_string_pretty(&manifest)?)?;
    files.push("trajectory.json".into());
    Ok(files)
}
