//! Text checkpoint format.
//!
//! ```text
//! pifm-checkpoint v1
//! n=<heads>
//! d=<state dim>
//! width=<hidden width>
//! depth=<hidden layers>
//! activation=<silu|tanh|identity>
//! fourier_features=<frequencies per parameter>
//! seed=<u64>
//! config=<single-line JSON>
//! tensor backbone.<l>.weight <rows> <cols>
//! <rows*cols values, row-major, space-separated>
//! tensor backbone.<l>.bias <rows>
//! <values>
//! ... (all backbone layers, then head.<k>.weight / head.<k>.bias for every head)
//! end
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so loading restores
//! every weight bit for bit. Lines end with `\n`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::activation::Activation;
use super::mlp::{Block, ModelConfig, ModelParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "pifm-checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelParams,
    pub seed: u64,
    /// Echo of the configuration that produced the weights.
    pub config: serde_json::Value,
}

fn tensor_list(model: &ModelParams) -> Vec<(String, Block)> {
    let mut out = Vec::new();
    for (l, b) in model.backbone_blocks().iter().enumerate() {
        out.push((format!("backbone.{l}"), *b));
    }
    for (k, b) in model.head_blocks().iter().enumerate() {
        out.push((format!("head.{k}"), *b));
    }
    out
}

fn push_values(s: &mut String, vals: &[f64]) {
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v:?}");
    }
    s.push('\n');
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let cfg = self.model.config();
        let theta = self.model.theta();
        let mut s = String::new();
        let _ = writeln!(s, "{CHECKPOINT_MAGIC}");
        let _ = writeln!(s, "n={}", cfg.n);
        let _ = writeln!(s, "d={}", cfg.d);
        let _ = writeln!(s, "width={}", cfg.width);
        let _ = writeln!(s, "depth={}", cfg.depth);
        let _ = writeln!(s, "activation={}", cfg.activation);
        let _ = writeln!(s, "fourier_features={}", cfg.fourier_features);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "config={}", self.config);
        for (name, b) in tensor_list(&self.model) {
            let _ = writeln!(s, "tensor {name}.weight {} {}", b.rows, b.cols);
            push_values(&mut s, &theta[b.w..b.b]);
            let _ = writeln!(s, "tensor {name}.bias {}", b.rows);
            push_values(&mut s, &theta[b.b..b.b + b.rows]);
        }
        s.push_str("end\n");
        s
    }

    /// Parse; `origin` only labels error messages.
    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let fail = |reason: String| Error::Checkpoint {
            path: origin.to_path_buf(),
            reason,
        };
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(i, l)| (i + 1, l))
                .ok_or_else(|| fail(format!("file ends early, expected {what} (truncated?)")))
        };
        let (_, magic) = next("header")?;
        if magic != CHECKPOINT_MAGIC {
            return Err(fail(format!(
                "unsupported header `{magic}`, expected `{CHECKPOINT_MAGIC}`"
            )));
        }
        let mut field = |key: &str| -> Result<String> {
            let (no, line) = next(key)?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_owned)
                .ok_or_else(|| fail(format!("line {no}: expected `{key}=...`, got `{line}`")))
        };
        let num = |key: &str, v: String| -> Result<usize> {
            v.parse()
                .map_err(|_| fail(format!("`{key}` is not a non-negative integer: `{v}`")))
        };
        let n = num("n", field("n")?)?;
        let d = num("d", field("d")?)?;
        let width = num("width", field("width")?)?;
        let depth = num("depth", field("depth")?)?;
        let activation: Activation = field("activation")?
            .parse()
            .map_err(|e: Error| fail(e.to_string()))?;
        let fourier_features = num("fourier_features", field("fourier_features")?)?;
        let seed_s = field("seed")?;
        let seed: u64 = seed_s
            .parse()
            .map_err(|_| fail(format!("bad seed `{seed_s}`")))?;
        let config: serde_json::Value = serde_json::from_str(&field("config")?)
            .map_err(|e| fail(format!("config echo is not JSON: {e}")))?;
        let cfg = ModelConfig {
            n,
            d,
            width,
            depth,
            activation,
            fourier_features,
        };
        let mut model = ModelParams::zeros(cfg).map_err(|e| fail(e.to_string()))?;
        for (name, b) in tensor_list(&model) {
            for (suffix, shape, range) in [
                ("weight", vec![b.rows, b.cols], b.w..b.b),
                ("bias", vec![b.rows], b.b..b.b + b.rows),
            ] {
                let (no, head) = next("tensor header")?;
                let want: String = std::iter::once(format!("tensor {name}.{suffix}"))
                    .chain(shape.iter().map(|s| s.to_string()))
                    .collect::<Vec<_>>()
                    .join(" ");
                if head != want {
                    return Err(fail(format!(
                        "line {no}: expected `{want}`, got `{head}` (shape corruption)"
                    )));
                }
                let (no, body) = next("tensor values")?;
                let vals: Vec<f64> = body
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| fail(format!("line {no}: non-numeric value")))?;
                if vals.len() != range.len() {
                    return Err(fail(format!(
                        "line {no}: {name}.{suffix} has {} values, expected {}",
                        vals.len(),
                        range.len()
                    )));
                }
                model.theta_mut()[range].copy_from_slice(&vals);
            }
        }
        let (no, end) = next("`end`")?;
        if end != "end" {
            return Err(fail(format!("line {no}: expected `end`, got `{end}`")));
        }
        Ok(Checkpoint {
            model,
            seed,
            config,
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, ckpt.to_text())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Checkpoint {
        path: PathBuf::from(path),
        reason: e.to_string(),
    })?;
    Checkpoint::from_text(&text, path)
}
