use serde::{Deserialize, Serialize};

use super::assignment::match_clouds;
use super::cost::DenseMatrix;
use crate::error::{check_dim, param, Result};
use crate::geometry::{PointCloud, RngStream};

/// A transport plan: a bijection for equal-size uniform clouds, dense otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingPlan {
    Permutation(Vec<usize>),
    Dense(DenseMatrix),
}

impl CouplingPlan {
    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            CouplingPlan::Permutation(p) => {
                let n = p.len();
                let mut m = DenseMatrix::zeros(n, n);
                for (i, &j) in p.iter().enumerate() {
                    m[(i, j)] = 1.0 / n as f64;
                }
                m
            }
            CouplingPlan::Dense(m) => m.clone(),
        }
    }

    /// Largest absolute deviation of the plan's marginals from the given weights.
    pub fn marginal_error(&self, src_w: &[f64], tgt_w: &[f64]) -> f64 {
        let m = self.to_dense();
        m.row_sums()
            .iter()
            .zip(src_w)
            .chain(m.col_sums().iter().zip(tgt_w))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `x ↦ A x + r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

impl AffineMap {
    pub fn scaling(d: usize, factor: f64) -> Self {
        Self {
            matrix: (0..d)
                .map(|r| (0..d).map(|c| if r == c { factor } else { 0.0 }).collect())
                .collect(),
            offset: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        check_dim(d, self.matrix.len(), "affine map rows")?;
        for row in &self.matrix {
            check_dim(d, row.len(), "affine map columns")?;
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, o)| o + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum CouplingMode {
    Independent,
    /// Each target batch is matched to the source batch by exact assignment, separately.
    OtToSource,
    /// `b_i = T_i(a)`; target batches are ignored.
    PrescribedMap { maps: Vec<AffineMap> },
}

impl CouplingMode {
    pub fn label(&self) -> &'static str {
        match self {
            CouplingMode::Independent => "independent",
            CouplingMode::OtToSource => "ot-to-source",
            CouplingMode::PrescribedMap { .. } => "prescribed-map",
        }
    }
}

/// Joint sample `(a, b_1, …, b_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTuple {
    pub a: Vec<f64>,
    pub b: Vec<Vec<f64>>,
}

pub fn minibatch_couple(
    a_batch: &PointCloud,
    target_batches: &[PointCloud],
    mode: &CouplingMode,
    rng: &mut RngStream,
) -> Result<Vec<CoupledTuple>> {
    let n_src = a_batch.len();
    let mut tuples: Vec<CoupledTuple> = a_batch
        .points()
        .map(|a| CoupledTuple {
            a: a.to_vec(),
            b: Vec::new(),
        })
        .collect();
    match mode {
        CouplingMode::PrescribedMap { maps } => {
            if maps.is_empty() {
                return param("prescribed-map coupling needs at least one map");
            }
            for m in maps {
                m.validate()?;
                check_dim(a_batch.dim(), m.dim(), "prescribed map")?;
            }
            for t in &mut tuples {
                t.b = maps.iter().map(|m| m.apply(&t.a)).collect();
            }
        }
        CouplingMode::Independent | CouplingMode::OtToSource => {
            if target_batches.is_empty() {
                return param("coupling needs at least one target batch");
            }
            for tb in target_batches {
                if tb.len() != n_src {
                    return param(format!(
                        "batch size mismatch: source {n_src}, target {}",
                        tb.len()
                    ));
                }
                check_dim(a_batch.dim(), tb.dim(), "target batch")?;
                let perm = if *mode == CouplingMode::Independent {
                    rng.permutation(n_src)
                } else {
                    match_clouds(a_batch, tb)?
                };
                for (t, &k) in tuples.iter_mut().zip(&perm) {
                    t.b.push(tb.point(k).to_vec());
                }
            }
        }
    }
    Ok(tuples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ShapeSpec, StreamId};

    fn rng() -> RngStream {
        RngStream::new(1, StreamId::Data)
    }

    #[test]
    fn prescribed_maps() {
        let a = PointCloud::from_points(&[vec![1.0, 1.0]]).unwrap();
        let mode = CouplingMode::PrescribedMap {
            maps: vec![AffineMap::scaling(2, -1.0), AffineMap::scaling(2, 3.0)],
        };
        let z = minibatch_couple(&a, &[], &mode, &mut rng()).unwrap();
        assert_eq!(z[0].a, vec![1.0, 1.0]);
        assert_eq!(z[0].b, vec![vec![-1.0, -1.0], vec![3.0, 3.0]]);
    }

    #[test]
    fn identical_batches_pair_identically() {
        let a = ShapeSpec::disc(vec![0.0, 0.0], 1.0)
            .sample(32, &mut rng())
            .unwrap();
        let z = minibatch_couple(&a, std::slice::from_ref(&a), &CouplingMode::OtToSource, &mut rng()).unwrap();
        for (t, p) in z.iter().zip(a.points()) {
            assert_eq!(t.b[0], p);
        }
    }

    #[test]
    fn translation_pairing() {
        let a = ShapeSpec::disc(vec![0.0, 0.0], 1.0)
            .sample(8, &mut rng())
            .unwrap();
        let b = a.translated(&[5.0, 0.0]).unwrap();
        let z = minibatch_couple(&a, &[b], &CouplingMode::OtToSource, &mut rng()).unwrap();
        for t in &z {
            assert!((t.b[0][0] - t.a[0] - 5.0).abs() < 1e-12);
            assert!((t.b[0][1] - t.a[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn independent_uses_each_target_once() {
        let a = ShapeSpec::disc(vec![0.0, 0.0], 1.0)
            .sample(16, &mut rng())
            .unwrap();
        let b = a.translated(&[1.0, 0.0]).unwrap();
        let z = minibatch_couple(&a, std::slice::from_ref(&b), &CouplingMode::Independent, &mut rng()).unwrap();
        let mut used: Vec<usize> = z
            .iter()
            .map(|t| b.points().position(|p| p == t.b[0].as_slice()).unwrap())
            .collect();
        used.sort_unstable();
        assert_eq!(used, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn size_mismatch() {
        let a = PointCloud::from_points(&[vec![0.0], vec![1.0]]).unwrap();
        let b = PointCloud::from_points(&[vec![0.0]]).unwrap();
        assert!(minibatch_couple(&a, &[b], &CouplingMode::OtToSource, &mut rng()).is_err());
    }

    #[test]
    fn permutation_plan_marginals() {
        let plan = CouplingPlan::Permutation(vec![2, 0, 1]);
        let w = [1.0 / 3.0; 3];
        assert!(plan.marginal_error(&w, &w) < 1e-15);
    }
}
