use serde::{Deserialize, Serialize};

use super::metric::Metric;
use crate::error::{check_dim, param, Result};
use crate::field::VectorField;
use crate::geometry::PointCloud;
use crate::inference::{all_axis_orders, generate, Integrator, Strategy};

pub const MAX_ORDER_PARAMS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairGap {
    pub a: String,
    pub b: String,
    pub w2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommutativityReport {
    pub param_point: Vec<f64>,
    pub metric: String,
    pub strategies: Vec<String>,
    pub gaps: Vec<PairGap>,
    pub max_gap: f64,
    /// W2 of each strategy's endpoint to the reference, in `strategies` order.
    pub target_w2: Option<Vec<f64>>,
}

impl CommutativityReport {
    pub fn gap(&self, a: &str, b: &str) -> Option<f64> {
        if a == b {
            return self.strategies.iter().any(|s| s == a).then_some(0.0);
        }
        self.gaps
            .iter()
            .find(|g| (g.a == a && g.b == b) || (g.a == b && g.b == a))
            .map(|g| g.w2)
    }
}

/// Every axis order plus the diagonal aimed at `t`.
pub fn comparison_strategies(t: &[f64]) -> Result<Vec<Strategy>> {
    let n = t.len();
    if n == 0 || n > MAX_ORDER_PARAMS {
        return param(format!(
            "commutativity checks enumerate n! orders and need 1 <= n <= {MAX_ORDER_PARAMS}, got n = {n}"
        ));
    }
    let mut out: Vec<Strategy> = all_axis_orders(n)
        .into_iter()
        .map(|o| Strategy::axis_order(o, t.to_vec()))
        .collect();
    out.push(Strategy::diagonal(t.to_vec()));
    Ok(out)
}

/// Endpoints of all strategies from `comparison_strategies`.
pub fn strategy_endpoints(
    field: &dyn VectorField,
    cloud: &PointCloud,
    t: &[f64],
    steps: usize,
) -> Result<Vec<(Strategy, PointCloud)>> {
    check_dim(field.n_params(), t.len(), "commutativity parameter point")?;
    comparison_strategies(t)?
        .into_iter()
        .map(|s| {
            let end = generate(field, cloud, &s, steps, Integrator::Euler)?;
            Ok((s, end))
        })
        .collect()
}

/// Pairwise endpoint distances between all integration strategies reaching `t`.
///
/// `seed` keys the projection streams when the metric is sliced.
pub fn commutativity_gap(
    field: &dyn VectorField,
    cloud: &PointCloud,
    t: &[f64],
    steps: usize,
    metric: Metric,
    reference: Option<&PointCloud>,
    seed: u64,
) -> Result<CommutativityReport> {
    let ends = strategy_endpoints(field, cloud, t, steps)?;
    gap_report(t, &ends, metric, reference, seed)
}

pub fn gap_report(
    t: &[f64],
    ends: &[(Strategy, PointCloud)],
    metric: Metric,
    reference: Option<&PointCloud>,
    seed: u64,
) -> Result<CommutativityReport> {
    let mut gaps = Vec::new();
    let mut key = 0u32;
    for i in 0..ends.len() {
        for j in i + 1..ends.len() {
            let w2 = metric.distance(&ends[i].1, &ends[j].1, seed, key)?;
            key += 1;
            gaps.push(PairGap {
                a: ends[i].0.label(),
                b: ends[j].0.label(),
                w2,
            });
        }
    }
    let target_w2 = reference
        .map(|r| {
            ends.iter()
                .enumerate()
                .map(|(k, (_, e))| metric.distance(e, r, seed, 10_000 + k as u32))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let max_gap = gaps.iter().map(|g| g.w2).fold(0.0, f64::max);
    Ok(CommutativityReport {
        param_point: t.to_vec(),
        metric: metric.label(ends.first().map_or(0, |e| e.1.len())),
        strategies: ends.iter().map(|(s, _)| s.label()).collect(),
        gaps,
        max_gap,
        target_w2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{AffineHead, AnalyticField};
    use crate::geometry::{RngStream, ShapeSpec, StreamId};

    fn cloud(n: usize) -> PointCloud {
        ShapeSpec::disc(vec![0.0, 0.0], 1.0)
            .sample(n, &mut RngStream::new(3, StreamId::Data))
            .unwrap()
    }

    #[test]
    fn constant_fields_commute_exactly() {
        let f = AnalyticField::constant(vec![vec![1.0, 0.5], vec![-0.25, 2.0]]).unwrap();
        let r = commutativity_gap(&f, &cloud(64), &[0.7, 0.4], 20, Metric::Exact, None, 0).unwrap();
        assert_eq!(r.strategies, vec!["order:1,2", "order:2,1", "diagonal"]);
        assert_eq!(r.gaps.len(), 3);
        assert!(r.max_gap < 1e-12, "{}", r.max_gap);
        assert_eq!(r.gap("diagonal", "diagonal"), Some(0.0));
        assert_eq!(r.gap("order:2,1", "order:1,2"), r.gap("order:1,2", "order:2,1"));
    }

    #[test]
    fn linear_non_commuting_fields_show_a_gap() {
        // u1 = (y, 0), u2 = (0, 1): flows do not commute.
        let f = AnalyticField::new(vec![
            AffineHead::linear(vec![vec![0.0, 1.0], vec![0.0, 0.0]]),
            AffineHead::constant(vec![0.0, 1.0]),
        ])
        .unwrap();
        let c = cloud(32);
        let r = commutativity_gap(&f, &c, &[1.0, 1.0], 40, Metric::Exact, Some(&c), 0).unwrap();
        // s then t shifts x by 1 more than t then s.
        let g = r.gap("order:1,2", "order:2,1").unwrap();
        assert!((g - 1.0).abs() < 1e-9, "{g}");
        assert_eq!(r.target_w2.as_ref().unwrap().len(), 3);
        assert!(r.gaps.iter().all(|g| g.w2 >= 0.0));
    }

    #[test]
    fn rejects_too_many_params() {
        assert!(comparison_strategies(&[0.1; 5]).is_err());
        assert_eq!(comparison_strategies(&[0.1; 3]).unwrap().len(), 7);
    }
}
