//! Multi-head vector fields: the trainable MLP, closed-form test fields, and the
//! bracket residual between heads.

mod activation;
mod analytic;
mod checkpoint;
mod composed;
mod lie;
mod mlp;

pub use activation::Activation;
pub use analytic::{AffineHead, AnalyticField};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use composed::Composed;
pub use lie::lie_residual;
pub use mlp::{Block, ModelConfig, ModelParams, Scratch, Tape};

use crate::error::{check_dim, Result};

/// `n` vector fields `u^(i)_t(x)` on `R^d`, indexed by a parameter vector `t ∈ R^n`.
///
/// Output buffers are head-major: head `i` occupies `out[i*d..(i+1)*d]`.
/// Slices must have the documented lengths; use [`forward`] and [`jvp`] for checked calls.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn n_params(&self) -> usize;
    fn eval(&self, x: &[f64], t: &[f64], out: &mut [f64]);
    /// Value and directional derivative along `(dx, dt)` of every head.
    fn jvp(&self, x: &[f64], t: &[f64], dx: &[f64], dt: &[f64], value: &mut [f64], tangent: &mut [f64]);
}

/// All head values at one `(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEval {
    d: usize,
    values: Vec<f64>,
}

impl FieldEval {
    pub fn head(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn n_heads(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

fn check_io(field: &dyn VectorField, x: &[f64], t: &[f64]) -> Result<()> {
    check_dim(field.dim(), x.len(), "field state")?;
    check_dim(field.n_params(), t.len(), "field parameter point")
}

pub fn forward(field: &dyn VectorField, x: &[f64], t: &[f64]) -> Result<FieldEval> {
    check_io(field, x, t)?;
    let d = field.dim();
    let mut values = vec![0.0; field.n_params() * d];
    field.eval(x, t, &mut values);
    Ok(FieldEval { d, values })
}

/// Directional derivative of every head along `(dx, dt)`.
pub fn jvp(field: &dyn VectorField, x: &[f64], t: &[f64], dx: &[f64], dt: &[f64]) -> Result<FieldEval> {
    check_io(field, x, t)?;
    check_io(field, dx, dt)?;
    let d = field.dim();
    let mut value = vec![0.0; field.n_params() * d];
    let mut values = vec![0.0; field.n_params() * d];
    field.jvp(x, t, dx, dt, &mut value, &mut values);
    Ok(FieldEval { d, values })
}
