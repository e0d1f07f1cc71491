use serde::{Deserialize, Serialize};

use super::VectorField;
use crate::error::{check_dim, param, Result};

/// `u(x, t) = A x + c + Σ_k t_k g_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineHead {
    /// `None` is the zero matrix.
    pub matrix: Option<Vec<Vec<f64>>>,
    pub constant: Vec<f64>,
    /// One vector per flow parameter, or empty for no time dependence.
    #[serde(default)]
    pub time: Vec<Vec<f64>>,
}

impl AffineHead {
    pub fn constant(c: Vec<f64>) -> Self {
        Self {
            matrix: None,
            constant: c,
            time: Vec::new(),
        }
    }

    pub fn linear(a: Vec<Vec<f64>>) -> Self {
        let d = a.len();
        Self {
            matrix: Some(a),
            constant: vec![0.0; d],
            time: Vec::new(),
        }
    }
}

/// Closed-form field with affine heads, for tests and oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticField {
    d: usize,
    heads: Vec<AffineHead>,
}

impl AnalyticField {
    pub fn new(heads: Vec<AffineHead>) -> Result<Self> {
        let Some(first) = heads.first() else {
            return param("analytic field needs at least one head");
        };
        let d = first.constant.len();
        let n = heads.len();
        for h in &heads {
            check_dim(d, h.constant.len(), "analytic head constant")?;
            if let Some(a) = &h.matrix {
                check_dim(d, a.len(), "analytic head matrix rows")?;
                for row in a {
                    check_dim(d, row.len(), "analytic head matrix columns")?;
                }
            }
            if !h.time.is_empty() {
                check_dim(n, h.time.len(), "analytic head time terms")?;
                for g in &h.time {
                    check_dim(d, g.len(), "analytic head time vector")?;
                }
            }
        }
        Ok(Self { d, heads })
    }

    pub fn constant(ws: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(ws.into_iter().map(AffineHead::constant).collect())
    }

    pub fn linear(mats: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        Self::new(mats.into_iter().map(AffineHead::linear).collect())
    }

    pub fn heads(&self) -> &[AffineHead] {
        &self.heads
    }
}

fn matvec(a: &[Vec<f64>], x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(a) {
        *o += row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
    }
}

impl VectorField for AnalyticField {
    fn dim(&self) -> usize {
        self.d
    }

    fn n_params(&self) -> usize {
        self.heads.len()
    }

    fn eval(&self, x: &[f64], t: &[f64], out: &mut [f64]) {
        let d = self.d;
        for (h, o) in self.heads.iter().zip(out.chunks_exact_mut(d)) {
            o.copy_from_slice(&h.constant);
            if let Some(a) = &h.matrix {
                matvec(a, x, o);
            }
            for (g, &tk) in h.time.iter().zip(t) {
                o.iter_mut().zip(g).for_each(|(v, gv)| *v += tk * gv);
            }
        }
    }

    fn jvp(&self, x: &[f64], t: &[f64], dx: &[f64], dt: &[f64], value: &mut [f64], tangent: &mut [f64]) {
        self.eval(x, t, value);
        let d = self.d;
        for (h, o) in self.heads.iter().zip(tangent.chunks_exact_mut(d)) {
            o.iter_mut().for_each(|v| *v = 0.0);
            if let Some(a) = &h.matrix {
                matvec(a, dx, o);
            }
            for (g, &dk) in h.time.iter().zip(dt) {
                o.iter_mut().zip(g).for_each(|(v, gv)| *v += dk * gv);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{forward, jvp};

    #[test]
    fn constant_field_has_zero_jvp() {
        let f = AnalyticField::constant(vec![vec![1.0, -2.0], vec![0.5, 0.5]]).unwrap();
        let j = jvp(&f, &[3.0, 4.0], &[0.1, 0.9], &[1.0, 2.0], &[0.3, -1.0]).unwrap();
        assert!(j.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(forward(&f, &[3.0, 4.0], &[0.1, 0.9]).unwrap().head(0), &[1.0, -2.0]);
    }

    #[test]
    fn linear_field_jvp() {
        let a = vec![vec![1.0, 2.0], vec![-3.0, 0.5]];
        let f = AnalyticField::linear(vec![a]).unwrap();
        let j = jvp(&f, &[0.3, 0.2], &[0.0], &[1.0, -1.0], &[0.0]).unwrap();
        assert_eq!(j.head(0), &[-1.0, -3.5]);
    }

    #[test]
    fn shape_errors() {
        assert!(AnalyticField::constant(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        let f = AnalyticField::constant(vec![vec![1.0]]).unwrap();
        assert!(forward(&f, &[1.0, 2.0], &[0.0]).is_err());
    }
}
