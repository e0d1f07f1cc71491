use nalgebra::DMatrix;

use crate::error::{check_dim, param, Result};

const WEIGHT_TOL: f64 = 1e-9;

/// Weighted empirical distribution of `len()` points in `R^dim`.
///
/// Coordinates are stored row-major in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl PointCloud {
    /// Uniformly weighted cloud from flat row-major coordinates.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return param("point dimension must be positive");
        }
        if !coords.len().is_multiple_of(dim) {
            return param(format!(
                "coordinate buffer of length {} is not a multiple of dim {dim}",
                coords.len()
            ));
        }
        let n = coords.len() / dim;
        let weights = vec![1.0 / n as f64; n];
        Ok(Self {
            dim,
            coords,
            weights,
        })
    }

    pub fn with_weights(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut cloud = Self::new(dim, coords)?;
        check_dim(cloud.len(), weights.len(), "weights vs points")?;
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return param("weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return param(format!("weights sum to {total}, expected 1"));
        }
        cloud.weights = weights;
        Ok(cloud)
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = points.first() else {
            return param("cannot infer dimension of an empty point list");
        };
        let dim = first.len();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            check_dim(dim, p.len(), "point")?;
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn points_mut(&mut self) -> impl ExactSizeIterator<Item = &mut [f64]> + '_ {
        self.coords.chunks_exact_mut(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|&x| (x - w).abs() <= 1e-12)
    }

    /// Sub-cloud of the given indices, re-weighted uniformly.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointCloud {
            dim: self.dim,
            weights: vec![1.0 / indices.len() as f64; indices.len()],
            coords,
        }
    }

    pub fn translated(&self, offset: &[f64]) -> Result<PointCloud> {
        check_dim(self.dim, offset.len(), "translation offset")?;
        let mut out = self.clone();
        for p in out.points_mut() {
            for (x, o) in p.iter_mut().zip(offset) {
                *x += o;
            }
        }
        Ok(out)
    }
}

/// Replace every point `x` by `A x + r`; weights are kept.
pub fn apply_map(cloud: &PointCloud, matrix: &DMatrix<f64>, offset: &[f64]) -> Result<PointCloud> {
    let d = cloud.dim();
    check_dim(d, matrix.ncols(), "map matrix columns")?;
    check_dim(d, matrix.nrows(), "map matrix rows")?;
    check_dim(d, offset.len(), "map offset")?;
    let mut coords = Vec::with_capacity(cloud.coords.len());
    for p in cloud.points() {
        for r in 0..d {
            let mut acc = offset[r];
            for (c, x) in p.iter().enumerate() {
                acc += matrix[(r, c)] * x;
            }
            coords.push(acc);
        }
    }
    Ok(PointCloud {
        dim: d,
        coords,
        weights: cloud.weights.clone(),
    })
}

/// Weighted mean and (biased, weight-normalised) covariance.
pub fn empirical_moments(cloud: &PointCloud) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if cloud.is_empty() {
        return param("moments of an empty cloud");
    }
    let d = cloud.dim();
    let mut mean = vec![0.0; d];
    for (p, &w) in cloud.points().zip(cloud.weights()) {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += w * x;
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for (p, &w) in cloud.points().zip(cloud.weights()) {
        for r in 0..d {
            let dr = p[r] - mean[r];
            for c in 0..d {
                cov[(r, c)] += w * dr * (p[c] - mean[c]);
            }
        }
    }
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RngStream, ShapeSpec, StreamId};

    #[test]
    fn rejects_bad_weights() {
        assert!(PointCloud::with_weights(1, vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(PointCloud::with_weights(1, vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
        assert!(PointCloud::new(2, vec![0.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn negation_map() {
        let c = PointCloud::from_points(&[vec![1.0, 2.0]]).unwrap();
        let out = apply_map(&c, &(-DMatrix::identity(2, 2)), &[0.0, 0.0]).unwrap();
        assert_eq!(out.point(0), &[-1.0, -2.0]);
    }

    #[test]
    fn identity_map_is_exact() {
        let mut rng = RngStream::new(1, StreamId::Data);
        let c = ShapeSpec::disc(vec![0.3, -1.0], 2.0).sample(64, &mut rng).unwrap();
        let out = apply_map(&c, &DMatrix::identity(2, 2), &[0.0, 0.0]).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn expansion_map() {
        let c = PointCloud::from_points(&[vec![1.0, 0.0]]).unwrap();
        let out = apply_map(&c, &(DMatrix::identity(2, 2) * 3.0), &[0.0, 0.0]).unwrap();
        assert_eq!(out.point(0), &[3.0, 0.0]);
    }

    #[test]
    fn map_dimension_mismatch() {
        let c = PointCloud::from_points(&[vec![1.0, 0.0]]).unwrap();
        assert!(apply_map(&c, &DMatrix::identity(3, 3), &[0.0, 0.0, 0.0]).is_err());
        assert!(apply_map(&c, &DMatrix::identity(2, 2), &[0.0]).is_err());
    }

    #[test]
    fn maps_compose() {
        // Small-integer matrices keep every product exact in f64.
        let mut rng = RngStream::new(9, StreamId::Data);
        let mut coords = Vec::new();
        for _ in 0..40 {
            coords.push(rng.index(21) as f64 - 10.0);
        }
        let c = PointCloud::new(2, coords).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 3.0, 0.5]);
        let b = DMatrix::from_row_slice(2, 2, &[-1.0, 4.0, 0.25, 2.0]);
        let two_step = apply_map(&apply_map(&c, &a, &[0.0, 0.0]).unwrap(), &b, &[0.0, 0.0]).unwrap();
        let one_step = apply_map(&c, &(&b * &a), &[0.0, 0.0]).unwrap();
        assert_eq!(two_step, one_step);
    }

    #[test]
    fn single_point_moments() {
        let c = PointCloud::from_points(&[vec![2.0, 3.0]]).unwrap();
        let (m, cov) = empirical_moments(&c).unwrap();
        assert_eq!(m, vec![2.0, 3.0]);
        assert!(cov.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn midpoint_mean() {
        let c = PointCloud::from_points(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let (m, _) = empirical_moments(&c).unwrap();
        assert_eq!(m, vec![1.0, 0.0]);
    }

    #[test]
    fn gaussian_sample_mean() {
        let mut rng = RngStream::new(5, StreamId::Data);
        let spec = ShapeSpec::gaussian(vec![1.0, 2.0], vec![vec![0.25, 0.0], vec![0.0, 0.25]]);
        let c = spec.sample(4096, &mut rng).unwrap();
        let (m, cov) = empirical_moments(&c).unwrap();
        assert!((m[0] - 1.0).abs() < 0.05 && (m[1] - 2.0).abs() < 0.05, "{m:?}");
        assert!((cov[(0, 0)] - 0.25).abs() < 0.03);
    }
}
