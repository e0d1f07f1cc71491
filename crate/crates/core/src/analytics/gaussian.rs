use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, param, Result};
use crate::geometry::{gaussian_factor, PointCloud, RngStream, ShapeSpec};

/// Gaussians `N(m_i, Σ)` sharing one covariance; `means[0]` is the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub means: Vec<Vec<f64>>,
    pub cov: Vec<Vec<f64>>,
}

impl GaussianSpec {
    pub fn validate(&self) -> Result<()> {
        let Some(m0) = self.means.first() else {
            return param("gaussian spec needs at least the source mean");
        };
        let d = m0.len();
        for m in &self.means {
            check_dim(d, m.len(), "gaussian mean")?;
        }
        gaussian_factor(d, &self.cov)?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// Number of targets `n`.
    pub fn n_targets(&self) -> usize {
        self.means.len() - 1
    }

    pub fn marginal(&self, i: usize) -> ShapeSpec {
        ShapeSpec::gaussian(self.means[i].clone(), self.cov.clone())
    }
}

/// Mean `(1 − Σ t_i) m_0 + Σ t_i m_i` and the shared covariance; valid for any `t`.
pub fn gaussian_barycenter_oracle(spec: &GaussianSpec, t: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    spec.validate()?;
    check_dim(spec.n_targets(), t.len(), "oracle parameter point")?;
    let d = spec.dim();
    let w0 = 1.0 - t.iter().sum::<f64>();
    let mut mean: Vec<f64> = spec.means[0].iter().map(|v| w0 * v).collect();
    for (m, &ti) in spec.means[1..].iter().zip(t) {
        for (o, v) in mean.iter_mut().zip(m) {
            *o += ti * v;
        }
    }
    let cov = DMatrix::from_fn(d, d, |r, c| spec.cov[r][c]);
    Ok((mean, cov))
}

pub fn sample_oracle(spec: &GaussianSpec, t: &[f64], n: usize, rng: &mut RngStream) -> Result<PointCloud> {
    let (mean, _) = gaussian_barycenter_oracle(spec, t)?;
    ShapeSpec::gaussian(mean, spec.cov.clone()).sample(n, rng)
}
