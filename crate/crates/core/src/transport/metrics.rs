use super::assignment::match_clouds;
use super::cost::{squared_cost_matrix, squared_distance};
use super::exact::exact_plan;
use crate::error::{check_dim, param, Result};
use crate::geometry::{PointCloud, RngStream};

/// Exact W2 between equal-size uniform clouds, via assignment.
pub fn w2_exact(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    if x.len() != y.len() {
        return param(format!(
            "w2_exact needs equal sizes ({} vs {}); use sliced_w2 or w2_weighted",
            x.len(),
            y.len()
        ));
    }
    if !x.is_uniform() || !y.is_uniform() {
        return param("w2_exact needs uniformly weighted clouds");
    }
    let perm = match_clouds(x, y)?;
    let total: f64 = perm.iter().enumerate().map(|(i, &j)| squared_distance(x.point(i), y.point(j))).sum();
    Ok((total / x.len() as f64).sqrt())
}

/// Exact W2 between arbitrary weighted clouds (transportation simplex, slower).
pub fn w2_weighted(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    let c = squared_cost_matrix(x, y)?;
    let plan = exact_plan(&c, x.weights(), y.weights())?;
    Ok(plan.dot(&c).max(0.0).sqrt())
}

/// Squared W2 between weighted 1-D samples by walking the two quantile functions.
pub fn w2_squared_1d(xs: &[f64], wx: &[f64], ys: &[f64], wy: &[f64]) -> f64 {
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        idx
    };
    let (ox, oy) = (order(xs), order(ys));
    let (mut i, mut j) = (0, 0);
    let (mut rx, mut ry) = (wx[ox[0]], wy[oy[0]]);
    let mut acc = 0.0;
    while i < ox.len() && j < oy.len() {
        let m = rx.min(ry);
        let diff = xs[ox[i]] - ys[oy[j]];
        acc += m * diff * diff;
        rx -= m;
        ry -= m;
        // Advance whichever side ran out; ties advance both.
        if rx <= 1e-15 {
            i += 1;
            if i < ox.len() {
                rx = wx[ox[i]];
            }
        }
        if ry <= 1e-15 {
            j += 1;
            if j < oy.len() {
                ry = wy[oy[j]];
            }
        }
    }
    acc
}

/// Root-mean over random unit directions of squared 1-D W2 between projections.
pub fn sliced_w2(
    x: &PointCloud,
    y: &PointCloud,
    n_projections: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    check_dim(x.dim(), y.dim(), "sliced_w2 clouds")?;
    if n_projections == 0 {
        return param("sliced_w2 needs at least one projection");
    }
    if x.is_empty() || y.is_empty() {
        return param("sliced_w2 needs non-empty clouds");
    }
    let d = x.dim();
    let mut theta = vec![0.0; d];
    let mut px = vec![0.0; x.len()];
    let mut py = vec![0.0; y.len()];
    let mut total = 0.0;
    for _ in 0..n_projections {
        let norm = loop {
            theta.iter_mut().for_each(|t| *t = rng.normal());
            let nrm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
            if nrm > 0.0 {
                break nrm;
            }
        };
        theta.iter_mut().for_each(|t| *t /= norm);
        let project = |p: &[f64]| p.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>();
        px.iter_mut().zip(x.points()).for_each(|(o, p)| *o = project(p));
        py.iter_mut().zip(y.points()).for_each(|(o, p)| *o = project(p));
        total += w2_squared_1d(&px, x.weights(), &py, y.weights());
    }
    Ok((total / n_projections as f64).sqrt())
}

/// Mean squared distance of aligned point pairs; the cost of the identity pairing.
pub fn paired_cost(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    check_dim(x.len(), y.len(), "paired clouds")?;
    check_dim(x.dim(), y.dim(), "paired clouds")?;
    let total: f64 = x.points().zip(y.points()).map(|(a, b)| squared_distance(a, b)).sum();
    Ok(total / x.len() as f64)
}
