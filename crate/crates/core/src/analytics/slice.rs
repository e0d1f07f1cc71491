use serde::{Deserialize, Serialize};

use super::metric::Metric;
use crate::error::{check_dim, param, Result};
use crate::field::VectorField;
use crate::geometry::{empirical_moments, PointCloud};
use crate::inference::{generate, integrate_with, Integrator, PathSpec, Strategy};
use crate::transport::{free_support_barycenter, BarycenterOptions};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceEntry {
    pub t: f64,
    pub s: f64,
    /// W2(model endpoint, barycenter of `A_s`, `B_s` with weights `(1 − t, t)`).
    pub horizontal_w2: f64,
    /// W2(model endpoint, barycenter of `C_t`, `D_t` with weights `(1 − s, s)`).
    pub vertical_w2: f64,
    pub horizontal_mean: Vec<f64>,
    pub vertical_mean: Vec<f64>,
    pub model_mean: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceReport {
    pub metric: String,
    pub entries: Vec<SliceEntry>,
}

/// Move `cloud` (sitting at `from`) along the segment to `to`.
fn transport_along(
    field: &dyn VectorField,
    cloud: &PointCloud,
    from: [f64; 2],
    to: [f64; 2],
    steps: usize,
) -> Result<PointCloud> {
    if from == to {
        return Ok(cloud.clone());
    }
    let path = PathSpec::new(vec![from.to_vec(), to.to_vec()], steps.max(1))?;
    integrate_with(field, cloud, &path, Integrator::Euler, |_, _| {})
}

fn two_way_barycenter(a: &PointCloud, b: &PointCloud, w: f64) -> Result<PointCloud> {
    Ok(free_support_barycenter(&[a.clone(), b.clone()], &[1.0 - w, w], &BarycenterOptions::default())?.0)
}

/// Compare the model at each `(t, s)` with barycenters of slice endpoints.
///
/// `marginals` are samples of `ρ_0`, `ρ_1`, `ρ_2`; the model endpoint is reached
/// along the diagonal, and slices are integrated with `steps` Euler steps each.
pub fn slice_barycenter_check(
    field: &dyn VectorField,
    marginals: &[PointCloud],
    points: &[(f64, f64)],
    steps: usize,
    metric: Metric,
    seed: u64,
) -> Result<SliceReport> {
    if field.n_params() != 2 {
        return param(format!(
            "slice barycenter checks need n = 2 flow parameters, got {}",
            field.n_params()
        ));
    }
    check_dim(3, marginals.len(), "slice check marginals")?;
    for m in marginals {
        check_dim(field.dim(), m.dim(), "slice check marginal")?;
    }
    let [r0, r1, r2] = [&marginals[0], &marginals[1], &marginals[2]];
    let mut entries = Vec::with_capacity(points.len());
    for (k, &(t, s)) in points.iter().enumerate() {
        if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&s) {
            return param(format!("slice weights must lie in [0, 1], got ({t}, {s})"));
        }
        let a_s = transport_along(field, r0, [0.0, 0.0], [0.0, s], steps)?;
        let b_s = transport_along(field, r1, [1.0, 0.0], [1.0, s], steps)?;
        let c_t = transport_along(field, r0, [0.0, 0.0], [t, 0.0], steps)?;
        let d_t = transport_along(field, r2, [0.0, 1.0], [t, 1.0], steps)?;
        let horizontal = two_way_barycenter(&a_s, &b_s, t)?;
        let vertical = two_way_barycenter(&c_t, &d_t, s)?;
        let model = generate(field, r0, &Strategy::diagonal(vec![t, s]), steps, Integrator::Euler)?;
        let key = 2 * k as u32;
        entries.push(SliceEntry {
            t,
            s,
            horizontal_w2: metric.distance(&model, &horizontal, seed, key)?,
            vertical_w2: metric.distance(&model, &vertical, seed, key + 1)?,
            horizontal_mean: empirical_moments(&horizontal)?.0,
            vertical_mean: empirical_moments(&vertical)?.0,
            model_mean: empirical_moments(&model)?.0,
        });
    }
    Ok(SliceReport {
        metric: metric.label(r0.len()),
        entries,
    })
}
