use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{apply_map, PointCloud, RngStream};
use crate::error::{check_dim, param, Result};

/// Parametric toy distribution.
///
/// `spiral` and `moons` are planar; the others work in any dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShapeSpec {
    /// Uniform on the ball of `radius` around `center`.
    Disc { center: Vec<f64>, radius: f64 },
    /// Uniform on the axis-aligned cube `center ± half_width`.
    Square { center: Vec<f64>, half_width: f64 },
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    /// Archimedean spiral arm: angle `2π·turns·√u`, radius growing linearly to `scale`.
    Spiral {
        center: Vec<f64>,
        turns: f64,
        scale: f64,
        noise: f64,
    },
    /// Two interleaving half circles, centred on `center` and scaled by `scale`.
    Moons {
        center: Vec<f64>,
        scale: f64,
        noise: f64,
    },
    AffineOf {
        base: Box<ShapeSpec>,
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
}

impl ShapeSpec {
    pub fn disc(center: Vec<f64>, radius: f64) -> Self {
        ShapeSpec::Disc { center, radius }
    }

    pub fn square(center: Vec<f64>, half_width: f64) -> Self {
        ShapeSpec::Square { center, half_width }
    }

    pub fn gaussian(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Self {
        ShapeSpec::Gaussian { mean, cov }
    }

    /// `N(mean, variance · I)`.
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Self {
        let d = mean.len();
        let cov = (0..d)
            .map(|r| (0..d).map(|c| if r == c { variance } else { 0.0 }).collect())
            .collect();
        ShapeSpec::Gaussian { mean, cov }
    }

    pub fn affine_of(base: ShapeSpec, matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Self {
        ShapeSpec::AffineOf {
            base: Box::new(base),
            matrix,
            offset,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ShapeSpec::Disc { center, .. } | ShapeSpec::Square { center, .. } => center.len(),
            ShapeSpec::Gaussian { mean, .. } => mean.len(),
            ShapeSpec::Spiral { .. } | ShapeSpec::Moons { .. } => 2,
            ShapeSpec::AffineOf { offset, .. } => offset.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ShapeSpec::Disc { center, radius } => {
                nonempty(center)?;
                if !(*radius > 0.0) {
                    return param(format!("disc radius must be positive, got {radius}"));
                }
            }
            ShapeSpec::Square { center, half_width } => {
                nonempty(center)?;
                if !(*half_width > 0.0) {
                    return param(format!("square half-width must be positive, got {half_width}"));
                }
            }
            ShapeSpec::Gaussian { mean, cov } => {
                nonempty(mean)?;
                gaussian_factor(mean.len(), cov)?;
            }
            ShapeSpec::Spiral {
                center,
                turns,
                scale,
                noise,
            } => {
                check_dim(2, center.len(), "spiral center")?;
                if !(*turns > 0.0 && *scale > 0.0 && *noise >= 0.0) {
                    return param("spiral needs turns > 0, scale > 0, noise >= 0");
                }
            }
            ShapeSpec::Moons {
                center,
                scale,
                noise,
            } => {
                check_dim(2, center.len(), "moons center")?;
                if !(*scale > 0.0 && *noise >= 0.0) {
                    return param("moons needs scale > 0, noise >= 0");
                }
            }
            ShapeSpec::AffineOf {
                base,
                matrix,
                offset,
            } => {
                base.validate()?;
                to_matrix(matrix, base.dim(), offset.len())?;
            }
        }
        Ok(())
    }

    /// Draw `n` i.i.d. points with uniform weights.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Result<PointCloud> {
        if n == 0 {
            return param("sample count must be at least 1");
        }
        self.validate()?;
        let d = self.dim();
        let mut coords = Vec::with_capacity(n * d);
        match self {
            ShapeSpec::Disc { center, radius } => {
                let mut dir = vec![0.0; d];
                for _ in 0..n {
                    let norm = loop {
                        dir.iter_mut().for_each(|v| *v = rng.normal());
                        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if norm > 0.0 {
                            break norm;
                        }
                    };
                    let r = radius * rng.uniform().powf(1.0 / d as f64);
                    coords.extend(center.iter().zip(&dir).map(|(c, v)| c + r * v / norm));
                }
            }
            ShapeSpec::Square { center, half_width } => {
                for _ in 0..n {
                    coords.extend(
                        center
                            .iter()
                            .map(|c| c + half_width * (2.0 * rng.uniform() - 1.0)),
                    );
                }
            }
            ShapeSpec::Gaussian { mean, cov } => {
                let factor = gaussian_factor(d, cov)?;
                let mut xi = vec![0.0; d];
                for _ in 0..n {
                    xi.iter_mut().for_each(|v| *v = rng.normal());
                    for r in 0..d {
                        let mut acc = mean[r];
                        for (c, x) in xi.iter().enumerate() {
                            acc += factor[(r, c)] * x;
                        }
                        coords.push(acc);
                    }
                }
            }
            ShapeSpec::Spiral {
                center,
                turns,
                scale,
                noise,
            } => {
                for _ in 0..n {
                    let frac = rng.uniform().sqrt();
                    let angle = 2.0 * PI * turns * frac;
                    let r = scale * frac;
                    coords.push(center[0] + r * angle.cos() + noise * rng.normal());
                    coords.push(center[1] + r * angle.sin() + noise * rng.normal());
                }
            }
            ShapeSpec::Moons {
                center,
                scale,
                noise,
            } => {
                for _ in 0..n {
                    let theta = PI * rng.uniform();
                    // Upper arc, or the lower arc shifted by (1, -0.5); centred at (0.5, 0.25).
                    let (x, y) = if rng.uniform() < 0.5 {
                        (theta.cos(), theta.sin())
                    } else {
                        (1.0 - theta.cos(), 0.5 - theta.sin())
                    };
                    coords.push(center[0] + scale * (x - 0.5) + noise * rng.normal());
                    coords.push(center[1] + scale * (y - 0.25) + noise * rng.normal());
                }
            }
            ShapeSpec::AffineOf {
                base,
                matrix,
                offset,
            } => {
                let a = to_matrix(matrix, base.dim(), offset.len())?;
                let inner = base.sample(n, rng)?;
                return apply_map(&inner, &a, offset);
            }
        }
        PointCloud::new(d, coords)
    }

    /// Analytic mean, where one is cheap to state.
    pub fn mean(&self) -> Option<Vec<f64>> {
        match self {
            ShapeSpec::Disc { center, .. }
            | ShapeSpec::Square { center, .. }
            | ShapeSpec::Moons { center, .. } => Some(center.clone()),
            ShapeSpec::Gaussian { mean, .. } => Some(mean.clone()),
            ShapeSpec::Spiral { .. } => None,
            ShapeSpec::AffineOf {
                base,
                matrix,
                offset,
            } => {
                let m = base.mean()?;
                Some(
                    matrix
                        .iter()
                        .zip(offset)
                        .map(|(row, o)| o + row.iter().zip(&m).map(|(a, x)| a * x).sum::<f64>())
                        .collect(),
                )
            }
        }
    }
}

fn nonempty(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return param("shape center/mean must be non-empty");
    }
    Ok(())
}

pub(crate) fn to_matrix(rows: &[Vec<f64>], ncols: usize, nrows: usize) -> Result<DMatrix<f64>> {
    check_dim(nrows, rows.len(), "matrix rows")?;
    for row in rows {
        check_dim(ncols, row.len(), "matrix columns")?;
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

/// Square-root factor `L` with `L Lᵀ = Σ`, for symmetric positive semidefinite `Σ`.
pub(crate) fn gaussian_factor(d: usize, cov: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = to_matrix(cov, d, d)?;
    let scale = m.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    for r in 0..d {
        for c in 0..r {
            if (m[(r, c)] - m[(c, r)]).abs() > 1e-12 * scale {
                return param("covariance is not symmetric");
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return param("covariance has non-finite entries");
    }
    let eig = SymmetricEigen::new(m);
    let mut factor = eig.eigenvectors.clone();
    for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -1e-10 * scale {
            return param(format!(
                "covariance is not positive semidefinite (eigenvalue {lambda})"
            ));
        }
        let root = lambda.max(0.0).sqrt();
        factor.column_mut(c).scale_mut(root);
    }
    Ok(factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{empirical_moments, StreamId};

    fn rng() -> RngStream {
        RngStream::new(11, StreamId::Data)
    }

    #[test]
    fn degenerate_gaussian_repeats_mean() {
        let spec = ShapeSpec::isotropic(vec![0.0, 0.0], 0.0);
        let c = spec.sample(5, &mut rng()).unwrap();
        assert_eq!(c.len(), 5);
        assert!(c.coords().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn disc_moments() {
        let c = ShapeSpec::disc(vec![0.0, 0.0], 1.0)
            .sample(4096, &mut rng())
            .unwrap();
        let (m, _) = empirical_moments(&c).unwrap();
        assert!(m[0].abs() < 0.05 && m[1].abs() < 0.05, "{m:?}");
        // E|x - c|^2 = r^2 / 2 for the uniform unit disc.
        let second: f64 = c.points().map(|p| p[0] * p[0] + p[1] * p[1]).sum::<f64>() / 4096.0;
        assert!((second - 0.5).abs() < 0.05, "{second}");
        assert!(c.points().all(|p| p[0].hypot(p[1]) <= 1.0));
    }

    #[test]
    fn scaled_disc_bound() {
        let spec = ShapeSpec::affine_of(
            ShapeSpec::disc(vec![0.0, 0.0], 1.0),
            vec![vec![3.0, 0.0], vec![0.0, 3.0]],
            vec![0.0, 0.0],
        );
        let c = spec.sample(1000, &mut rng()).unwrap();
        assert!(c.points().all(|p| p[0].hypot(p[1]) <= 3.0 + 1e-12));
    }

    #[test]
    fn square_bounds() {
        let c = ShapeSpec::square(vec![5.0, 0.0], 0.5)
            .sample(500, &mut rng())
            .unwrap();
        assert!(c
            .points()
            .all(|p| (4.5..=5.5).contains(&p[0]) && (-0.5..=0.5).contains(&p[1])));
    }

    #[test]
    fn rejects_invalid_specs() {
        let not_psd = ShapeSpec::gaussian(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(not_psd.sample(3, &mut rng()).is_err());
        let asym = ShapeSpec::gaussian(vec![0.0, 0.0], vec![vec![1.0, 0.5], vec![0.0, 1.0]]);
        assert!(asym.validate().is_err());
        assert!(ShapeSpec::disc(vec![0.0], 0.0).validate().is_err());
        assert!(ShapeSpec::square(vec![0.0], -1.0).validate().is_err());
        assert!(ShapeSpec::disc(vec![0.0, 0.0], 1.0).sample(0, &mut rng()).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = ShapeSpec::Moons {
            center: vec![1.0, 1.0],
            scale: 2.0,
            noise: 0.05,
        };
        let a = spec.sample(100, &mut rng()).unwrap();
        let b = spec.sample(100, &mut rng()).unwrap();
        assert_eq!(a, b);
        let spiral = ShapeSpec::Spiral {
            center: vec![0.0, 0.0],
            turns: 1.5,
            scale: 1.0,
            noise: 0.02,
        };
        assert_eq!(
            spiral.sample(64, &mut rng()).unwrap(),
            spiral.sample(64, &mut rng()).unwrap()
        );
    }

    #[test]
    fn shape_spec_json_tagging() {
        let spec: ShapeSpec =
            serde_json::from_str(r#"{"kind":"disc","center":[0,5],"radius":0.5}"#).unwrap();
        assert_eq!(spec, ShapeSpec::disc(vec![0.0, 5.0], 0.5));
    }
}
