use serde::{Deserialize, Serialize};

use super::conditional::ConditionalPath;
use crate::error::{param, Result};
use crate::field::{Activation, ModelConfig};
use crate::geometry::{PointCloud, RngStream, ShapeSpec};
use crate::transport::CouplingMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Number of flow parameters (and heads).
    pub n: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    /// Standard deviation of the conditional Gaussian path.
    pub sigma: f64,
    /// Weight of the bracket regularizer.
    pub lambda: f64,
    pub coupling: CouplingMode,
    pub path: ConditionalPath,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Total-gradient norm cap; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Linear learning-rate ramp over this many steps (0 = constant).
    pub warmup_steps: usize,
    pub seed: u64,
    pub width: usize,
    pub depth: usize,
    pub activation: Activation,
    pub fourier_features: usize,
    /// Evaluate the regularizer value even when `lambda = 0`, for the loss history.
    pub monitor_pi: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n: 2,
            batch_size: 256,
            steps: 4000,
            learning_rate: 2e-4,
            sigma: 0.05,
            lambda: 0.0,
            coupling: CouplingMode::OtToSource,
            path: ConditionalPath::Affine,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip: Some(1.0),
            warmup_steps: 0,
            seed: 0,
            width: 64,
            depth: 3,
            activation: Activation::Silu,
            fourier_features: 0,
            monitor_pi: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return param("n must be at least 1");
        }
        if self.batch_size == 0 {
            return param("batch_size must be at least 1");
        }
        if !(self.sigma >= 0.0) {
            return param(format!("sigma must be ≥ 0, got {}", self.sigma));
        }
        if !(self.lambda >= 0.0) {
            return param(format!("lambda must be ≥ 0, got {}", self.lambda));
        }
        if !(self.learning_rate > 0.0) {
            return param("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return param("adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return param("adam_eps must be positive");
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return param("grad_clip must be positive when set");
            }
        }
        if let CouplingMode::PrescribedMap { maps } = &self.coupling {
            if maps.len() != self.n {
                return param(format!(
                    "prescribed-map coupling needs exactly n = {} maps, got {}",
                    self.n,
                    maps.len()
                ));
            }
        }
        self.path.validate(self.n)?;
        self.model_config(1).validate()
    }

    pub fn model_config(&self, d: usize) -> ModelConfig {
        ModelConfig {
            n: self.n,
            d,
            width: self.width,
            depth: self.depth,
            activation: self.activation,
            fourier_features: self.fourier_features,
        }
    }
}

/// Where training samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Shape(ShapeSpec),
    /// Resampled with replacement.
    Cloud(PointCloud),
}

impl DataSource {
    pub fn dim(&self) -> usize {
        match self {
            DataSource::Shape(s) => s.dim(),
            DataSource::Cloud(c) => c.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DataSource::Shape(s) => s.validate(),
            DataSource::Cloud(c) if c.is_empty() => param("data cloud is empty"),
            DataSource::Cloud(_) => Ok(()),
        }
    }

    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Result<PointCloud> {
        match self {
            DataSource::Shape(s) => s.sample(n, rng),
            DataSource::Cloud(c) => {
                if n == 0 {
                    return param("sample count must be at least 1");
                }
                let idx: Vec<usize> = (0..n).map(|_| rng.index(c.len())).collect();
                Ok(c.select(&idx))
            }
        }
    }
}

impl From<ShapeSpec> for DataSource {
    fn from(s: ShapeSpec) -> Self {
        DataSource::Shape(s)
    }
}

impl From<PointCloud> for DataSource {
    fn from(c: PointCloud) -> Self {
        DataSource::Cloud(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        for cfg in [
            TrainConfig { sigma: -1.0, ..Default::default() },
            TrainConfig { lambda: -0.1, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig {
                coupling: CouplingMode::PrescribedMap { maps: vec![] },
                ..Default::default()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn cloud_resampling_draws_members() {
        let c = PointCloud::new(1, vec![1.0, 2.0, 3.0]).unwrap();
        let mut rng = RngStream::new(0, crate::geometry::StreamId::Data);
        let s = DataSource::from(c).sample(10, &mut rng).unwrap();
        assert!(s.coords().iter().all(|v| [1.0, 2.0, 3.0].contains(v)));
    }
}
