use super::VectorField;
use crate::error::{check_dim, param, Result};

/// Independent single-parameter fields glued together: head `i` is part `i`
/// evaluated at `t_i` alone. This is how separately trained one-parameter
/// flows are composed for comparison with a jointly trained model.
pub struct Composed {
    d: usize,
    parts: Vec<Box<dyn VectorField>>,
}

impl Composed {
    pub fn new(parts: Vec<Box<dyn VectorField>>) -> Result<Self> {
        let Some(first) = parts.first() else {
            return param("composition needs at least one field");
        };
        let d = first.dim();
        for p in &parts {
            check_dim(1, p.n_params(), "composed part parameter count")?;
            check_dim(d, p.dim(), "composed part dimension")?;
        }
        Ok(Self { d, parts })
    }
}

impl VectorField for Composed {
    fn dim(&self) -> usize {
        self.d
    }

    fn n_params(&self) -> usize {
        self.parts.len()
    }

    fn eval(&self, x: &[f64], t: &[f64], out: &mut [f64]) {
        for ((p, o), ti) in self.parts.iter().zip(out.chunks_exact_mut(self.d)).zip(t) {
            p.eval(x, std::slice::from_ref(ti), o);
        }
    }

    fn jvp(&self, x: &[f64], t: &[f64], dx: &[f64], dt: &[f64], value: &mut [f64], tangent: &mut [f64]) {
        let d = self.d;
        for (i, p) in self.parts.iter().enumerate() {
            p.jvp(
                x,
                &t[i..=i],
                dx,
                &dt[i..=i],
                &mut value[i * d..(i + 1) * d],
                &mut tangent[i * d..(i + 1) * d],
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{forward, AffineHead, AnalyticField};

    #[test]
    fn heads_read_their_own_parameter() {
        let part = |g: f64| {
            Box::new(
                AnalyticField::new(vec![AffineHead {
                    matrix: None,
                    constant: vec![0.0],
                    time: vec![vec![g]],
                }])
                .unwrap(),
            ) as Box<dyn VectorField>
        };
        let c = Composed::new(vec![part(1.0), part(10.0)]).unwrap();
        let e = forward(&c, &[0.0], &[0.5, 0.25]).unwrap();
        assert_eq!(e.as_slice(), &[0.5, 2.5]);
    }
}
