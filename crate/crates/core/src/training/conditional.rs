use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, param, Result};
use crate::geometry::RngStream;
use crate::transport::CoupledTuple;

/// `a + Σ_i t_i (b_i − a)`, evaluated as `(1 − Σ t_i) a + Σ t_i b_i` so the
/// vertices `t = 0` and `t = e_i` return `a` and `b_i` exactly.
pub fn cond_mu(z: &CoupledTuple, t: &[f64]) -> Vec<f64> {
    let w0 = 1.0 - t.iter().sum::<f64>();
    let mut mu: Vec<f64> = z.a.iter().map(|v| w0 * v).collect();
    for (b, &ti) in z.b.iter().zip(t) {
        for (m, bv) in mu.iter_mut().zip(b) {
            *m += ti * bv;
        }
    }
    mu
}

/// Conditional velocities of the affine path: field `i` is `b_i − a`.
pub fn cond_fields(z: &CoupledTuple) -> Vec<Vec<f64>> {
    z.b.iter()
        .map(|b| b.iter().zip(&z.a).map(|(bv, av)| bv - av).collect())
        .collect()
}

/// `mu + σ ξ`, `ξ ~ N(0, I)`.
pub fn sample_conditional_x(mu: &[f64], sigma: f64, rng: &mut RngStream) -> Vec<f64> {
    if sigma == 0.0 {
        return mu.to_vec();
    }
    mu.iter().map(|m| m + sigma * rng.normal()).collect()
}

/// Family of conditional paths `μ_t(z)` with per-head regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConditionalPath {
    /// `μ = a + Σ t_i (b_i − a)`, `u_i = b_i − a`. Satisfies the bracket condition pointwise.
    #[default]
    Affine,
    /// Planar two-parameter path for a rotation composed with a radial flow:
    /// `μ = R(angle·t_1)(a + t_2 (b_2 − a))`.
    ///
    /// Head 1 regresses onto the true rotation velocity `angle·J·μ`; head 2 onto the
    /// unrotated displacement `b_2 − a`, as if each field were fit on its own axis.
    /// The two conditional fields do not commute, so the regularizer matters here.
    Curly { angle: f64 },
}

impl ConditionalPath {
    pub fn curly() -> Self {
        ConditionalPath::Curly { angle: PI }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ConditionalPath::Affine => Ok(()),
            ConditionalPath::Curly { angle } => {
                if n != 2 {
                    return param("the curly path needs exactly two flow parameters");
                }
                if !angle.is_finite() {
                    return param("curly angle must be finite");
                }
                Ok(())
            }
        }
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self {
            ConditionalPath::Affine => Ok(()),
            ConditionalPath::Curly { .. } => check_dim(2, d, "curly path state"),
        }
    }

    pub fn mu(&self, z: &CoupledTuple, t: &[f64]) -> Vec<f64> {
        match *self {
            ConditionalPath::Affine => cond_mu(z, t),
            ConditionalPath::Curly { angle } => {
                let s = t[1];
                let p: Vec<f64> = z.a.iter().zip(&z.b[1]).map(|(a, b)| a + s * (b - a)).collect();
                rotate(&p, angle * t[0])
            }
        }
    }

    /// Regression targets, head-major, written into `out` (`n·d`).
    pub fn targets(&self, z: &CoupledTuple, t: &[f64], out: &mut [f64]) {
        let d = z.a.len();
        match *self {
            ConditionalPath::Affine => {
                for (b, o) in z.b.iter().zip(out.chunks_exact_mut(d)) {
                    for ((ov, bv), av) in o.iter_mut().zip(b).zip(&z.a) {
                        *ov = bv - av;
                    }
                }
            }
            ConditionalPath::Curly { angle } => {
                let mu = self.mu(z, t);
                out[0] = -angle * mu[1];
                out[1] = angle * mu[0];
                out[2] = z.b[1][0] - z.a[0];
                out[3] = z.b[1][1] - z.a[1];
            }
        }
    }
}

fn rotate(p: &[f64], phi: f64) -> Vec<f64> {
    let (s, c) = phi.sin_cos();
    vec![c * p[0] - s * p[1], s * p[0] + c * p[1]]
}
