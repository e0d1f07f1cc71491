use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Smooth pointwise nonlinearity. ReLU is deliberately absent: the bracket
/// residual differentiates the field, so kinks are not allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Silu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Silu => z / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// `(σ(z), σ'(z), σ''(z))`.
    #[inline]
    pub fn eval3(self, z: f64) -> (f64, f64, f64) {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                (
                    z * s,
                    s * (1.0 + z * (1.0 - s)),
                    s * (1.0 - s) * (2.0 + z * (1.0 - 2.0 * s)),
                )
            }
            Activation::Tanh => {
                let t = z.tanh();
                let d = 1.0 - t * t;
                (t, d, -2.0 * t * d)
            }
            Activation::Identity => (z, 1.0, 0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Silu => "silu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "silu" | "swish" => Ok(Activation::Silu),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            "relu" => Err(Error::Param(
                "relu is not differentiable at 0; the bracket residual needs a smooth activation (use silu or tanh)".into(),
            )),
            other => Err(Error::Param(format!("unknown activation `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        for act in [Activation::Silu, Activation::Tanh, Activation::Identity] {
            for &z in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
                let h = 1e-5;
                let (v, d1, d2) = act.eval3(z);
                assert!((v - act.value(z)).abs() < 1e-15);
                let fd1 = (act.value(z + h) - act.value(z - h)) / (2.0 * h);
                let fd2 = (act.eval3(z + h).1 - act.eval3(z - h).1) / (2.0 * h);
                assert!((d1 - fd1).abs() < 1e-8, "{act} d1 at {z}");
                assert!((d2 - fd2).abs() < 1e-8, "{act} d2 at {z}");
            }
        }
    }

    #[test]
    fn relu_rejected() {
        assert!("relu".parse::<Activation>().is_err());
        assert_eq!("SiLU".parse::<Activation>().unwrap(), Activation::Silu);
    }
}
