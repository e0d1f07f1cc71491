//! Run configuration: a TOML file with `[data]`, `[model]`, `[train]` and `[eval]` tables.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pifm::analytics::Metric;
use pifm::field::Activation;
use pifm::geometry::{io, ShapeSpec};
use pifm::training::{ConditionalPath, DataSource, TrainConfig};
use pifm::transport::{AffineMap, CouplingMode};

/// A distribution given inline as a shape, or as a CSV cloud on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceSpec {
    File { file: PathBuf },
    Shape(ShapeSpec),
}

impl SourceSpec {
    pub fn load(&self, base: &Path) -> Result<DataSource> {
        match self {
            SourceSpec::Shape(s) => {
                s.validate()?;
                Ok(DataSource::Shape(s.clone()))
            }
            SourceSpec::File { file } => {
                let path = if file.is_absolute() { file.clone() } else { base.join(file) };
                let cloud = io::load_csv(&path).with_context(|| format!("loading cloud {}", path.display()))?;
                Ok(DataSource::Cloud(cloud))
            }
        }
    }
}

impl From<ShapeSpec> for SourceSpec {
    fn from(s: ShapeSpec) -> Self {
        SourceSpec::Shape(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    pub source: SourceSpec,
    /// One target per flow parameter; empty with prescribed maps.
    pub targets: Vec<SourceSpec>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            source: ShapeSpec::disc(vec![0.0, 0.0], 1.0).into(),
            targets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub width: usize,
    pub depth: usize,
    pub activation: Activation,
    pub fourier_features: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            width: t.width,
            depth: t.depth,
            activation: t.activation,
            fourier_features: t.fourier_features,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub n: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub sigma: f64,
    pub lambda: f64,
    /// `independent`, `ot` or `prescribed`.
    pub coupling: String,
    /// Used when `coupling = "prescribed"`.
    pub maps: Vec<AffineMap>,
    /// `affine` or `curly`.
    pub path: String,
    pub curly_angle: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Global gradient-norm cap; 0 disables clipping.
    pub grad_clip: f64,
    pub warmup_steps: usize,
    pub seed: u64,
    pub monitor_pi: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            n: t.n,
            batch_size: t.batch_size,
            steps: t.steps,
            learning_rate: t.learning_rate,
            sigma: t.sigma,
            lambda: t.lambda,
            coupling: "ot".into(),
            maps: Vec::new(),
            path: "affine".into(),
            curly_angle: PI,
            beta1: t.beta1,
            beta2: t.beta2,
            adam_eps: t.adam_eps,
            grad_clip: t.grad_clip.unwrap_or(0.0),
            warmup_steps: t.warmup_steps,
            seed: t.seed,
            monitor_pi: t.monitor_pi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    /// Points per generated cloud.
    pub n_points: usize,
    /// Euler steps per generated endpoint.
    pub steps: usize,
    /// Grid spec, e.g. `simplex:0.25;1,1;1.2,0.3`.
    pub grid: String,
    /// `diagonal`, `order:2,1` or `path:<file>`.
    pub strategy: String,
    pub all_orders: bool,
    /// `auto`, `exact` or `sliced`.
    pub metric: String,
    pub projections: usize,
    /// Points per marginal in free-support barycenter oracles.
    pub barycenter_points: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            n_points: 1024,
            steps: pifm::inference::DEFAULT_STEPS,
            grid: "simplex:0.25".into(),
            strategy: "diagonal".into(),
            all_orders: false,
            metric: "auto".into(),
            projections: pifm::analytics::DEFAULT_PROJECTIONS,
            barycenter_points: 512,
        }
    }
}

impl EvalSection {
    pub fn metric(&self) -> Result<Metric> {
        Ok(match self.metric.as_str() {
            "auto" => Metric::Auto,
            "exact" => Metric::Exact,
            "sliced" => Metric::Sliced {
                projections: self.projections,
            },
            other => bail!("unknown metric {other:?}; expected auto, exact or sliced"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

const SECTIONS: [(&str, &[&str]); 4] = [
    ("data", &["source", "targets"]),
    ("model", &["width", "depth", "activation", "fourier_features"]),
    (
        "train",
        &[
            "n",
            "batch_size",
            "steps",
            "learning_rate",
            "sigma",
            "lambda",
            "coupling",
            "maps",
            "path",
            "curly_angle",
            "beta1",
            "beta2",
            "adam_eps",
            "grad_clip",
            "warmup_steps",
            "seed",
            "monitor_pi",
        ],
    ),
    (
        "eval",
        &[
            "n_points",
            "steps",
            "grid",
            "strategy",
            "all_orders",
            "metric",
            "projections",
            "barycenter_points",
        ],
    ),
];

/// Every top-level or section key not in the schema, as `section.key`.
pub fn unknown_keys(doc: &toml::Table) -> Vec<String> {
    let mut out = Vec::new();
    for (k, v) in doc {
        match SECTIONS.iter().find(|(s, _)| s == k) {
            None => out.push(k.clone()),
            Some((_, keys)) => match v.as_table() {
                Some(t) => out.extend(t.keys().filter(|key| !keys.contains(&key.as_str())).map(|key| format!("{k}.{key}"))),
                None => out.push(format!("{k} (expected a table)")),
            },
        }
    }
    out
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Parse TOML text layered over `base`. All unknown keys are reported at once.
    pub fn from_toml_over(base: &RunConfig, text: &str) -> Result<RunConfig> {
        let doc: toml::Table = toml::from_str(text).context("config is not valid TOML")?;
        let unknown = unknown_keys(&doc);
        if !unknown.is_empty() {
            bail!("unknown config keys: {}", unknown.join(", "));
        }
        let mut merged = toml::Table::try_from(base).context("serializing base config")?;
        merge(&mut merged, doc);
        let cfg: RunConfig = merged.try_into().context("invalid config value")?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<RunConfig> {
        Self::from_toml_over(&RunConfig::default(), text)
    }

    pub fn load_over(base: &RunConfig, path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml_over(base, &text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn coupling(&self) -> Result<CouplingMode> {
        Ok(match self.train.coupling.as_str() {
            "independent" => CouplingMode::Independent,
            "ot" | "ot-to-source" => CouplingMode::OtToSource,
            "prescribed" | "prescribed-map" => {
                if self.train.maps.is_empty() {
                    bail!("coupling \"prescribed\" needs train.maps");
                }
                CouplingMode::PrescribedMap {
                    maps: self.train.maps.clone(),
                }
            }
            other => bail!("unknown coupling {other:?}; expected independent, ot or prescribed"),
        })
    }

    pub fn conditional_path(&self) -> Result<ConditionalPath> {
        Ok(match self.train.path.as_str() {
            "affine" => ConditionalPath::Affine,
            "curly" => ConditionalPath::Curly {
                angle: self.train.curly_angle,
            },
            other => bail!("unknown conditional path {other:?}; expected affine or curly"),
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let m = &self.model;
        let cfg = TrainConfig {
            n: t.n,
            batch_size: t.batch_size,
            steps: t.steps,
            learning_rate: t.learning_rate,
            sigma: t.sigma,
            lambda: t.lambda,
            coupling: self.coupling()?,
            path: self.conditional_path()?,
            beta1: t.beta1,
            beta2: t.beta2,
            adam_eps: t.adam_eps,
            grad_clip: (t.grad_clip > 0.0).then_some(t.grad_clip),
            warmup_steps: t.warmup_steps,
            seed: t.seed,
            width: m.width,
            depth: m.depth,
            activation: m.activation,
            fourier_features: m.fourier_features,
            monitor_pi: t.monitor_pi,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Source and target distributions; relative CSV paths resolve against `base`.
    pub fn data(&self, base: &Path) -> Result<(DataSource, Vec<DataSource>)> {
        let src = self.data.source.load(base)?;
        let targets = self
            .data
            .targets
            .iter()
            .map(|t| t.load(base))
            .collect::<Result<Vec<_>>>()?;
        Ok((src, targets))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn all_unknown_keys_listed() {
        let err = RunConfig::from_toml("[train]\nstepz = 3\nlambda = 1.0\n[eval]\ngird = \"x\"\n[plot]\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("train.stepz"), "{err}");
        assert!(err.contains("eval.gird"), "{err}");
        assert!(err.contains("plot"), "{err}");
    }

    #[test]
    fn partial_file_overrides_base() {
        let cfg = RunConfig::from_toml(
            "[data]\nsource = { kind = \"disc\", center = [1.0, 2.0], radius = 0.5 }\ntargets = [{ file = \"t.csv\" }]\n[train]\nsteps = 7\n",
        )
        .unwrap();
        assert_eq!(cfg.train.steps, 7);
        assert_eq!(cfg.train.batch_size, 256);
        assert_eq!(cfg.data.source, SourceSpec::Shape(ShapeSpec::disc(vec![1.0, 2.0], 0.5)));
        assert_eq!(cfg.data.targets, vec![SourceSpec::File { file: "t.csv".into() }]);
    }

    #[test]
    fn coupling_names() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.coupling().unwrap(), CouplingMode::OtToSource);
        cfg.train.coupling = "prescribed".into();
        assert!(cfg.coupling().is_err());
        cfg.train.maps = vec![AffineMap::scaling(2, -1.0)];
        assert!(matches!(cfg.coupling().unwrap(), CouplingMode::PrescribedMap { .. }));
        cfg.train.coupling = "sinkhorn".into();
        assert!(cfg.coupling().is_err());
    }
}
