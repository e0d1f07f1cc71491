use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, param, Result};

/// Piecewise-linear path in parameter space, walked with a fixed number of
/// steps per segment. The cloud being integrated is assumed to sit at the first
/// waypoint, which is usually the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub waypoints: Vec<Vec<f64>>,
    pub steps_per_segment: usize,
}

impl PathSpec {
    pub fn new(waypoints: Vec<Vec<f64>>, steps_per_segment: usize) -> Result<Self> {
        let p = Self {
            waypoints,
            steps_per_segment,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.waypoints.first() else {
            return param("path needs at least one waypoint");
        };
        let n = first.len();
        if n == 0 {
            return param("waypoints must have at least one coordinate");
        }
        for w in &self.waypoints {
            check_dim(n, w.len(), "path waypoint")?;
            if w.iter().any(|v| !v.is_finite()) {
                return param("waypoints must be finite");
            }
        }
        if self.waypoints.windows(2).any(|p| p[0] == p[1]) {
            return param("consecutive waypoints must differ");
        }
        if self.steps_per_segment == 0 && self.waypoints.len() > 1 {
            return param("steps per segment must be at least 1");
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.waypoints[0].len()
    }

    pub fn segments(&self) -> usize {
        self.waypoints.len() - 1
    }

    pub fn total_steps(&self) -> usize {
        self.segments() * self.steps_per_segment
    }

    pub fn start(&self) -> &[f64] {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &[f64] {
        self.waypoints.last().expect("validated path is non-empty")
    }
}

/// How to get from the origin to a terminal parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Strategy {
    /// Move one coordinate at a time, in the given (0-based) axis order.
    AxisOrder { order: Vec<usize>, terminal: Vec<f64> },
    /// Straight line from the origin.
    Diagonal { terminal: Vec<f64> },
    Custom { path: PathSpec },
}

impl Strategy {
    pub fn axis_order(order: Vec<usize>, terminal: Vec<f64>) -> Self {
        Strategy::AxisOrder { order, terminal }
    }

    pub fn diagonal(terminal: Vec<f64>) -> Self {
        Strategy::Diagonal { terminal }
    }

    /// Same strategy aimed at a different terminal point (custom paths are unchanged).
    pub fn with_terminal(&self, t: &[f64]) -> Self {
        match self {
            Strategy::AxisOrder { order, .. } => Strategy::AxisOrder {
                order: order.clone(),
                terminal: t.to_vec(),
            },
            Strategy::Diagonal { .. } => Strategy::Diagonal { terminal: t.to_vec() },
            Strategy::Custom { path } => Strategy::Custom { path: path.clone() },
        }
    }

    /// Short name: `order:2,1` (1-based), `diagonal` or `custom`.
    pub fn label(&self) -> String {
        match self {
            Strategy::AxisOrder { order, .. } => format!(
                "order:{}",
                order
                    .iter()
                    .map(|i| (i + 1).to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            Strategy::Diagonal { .. } => "diagonal".into(),
            Strategy::Custom { .. } => "custom".into(),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Waypoints of a strategy, with `total_steps` split evenly over its segments.
///
/// Axis moves of length zero are dropped, so `order:1,2` to `(1, 0)` is one segment.
pub fn strategy_to_path(strategy: &Strategy, n: usize, total_steps: usize) -> Result<PathSpec> {
    let origin = vec![0.0; n];
    let waypoints = match strategy {
        Strategy::Custom { path } => {
            check_dim(n, path.n_params(), "custom path")?;
            path.validate()?;
            return Ok(path.clone());
        }
        Strategy::Diagonal { terminal } => {
            check_dim(n, terminal.len(), "diagonal terminal")?;
            let mut w = vec![origin];
            if terminal.iter().any(|&v| v != 0.0) {
                w.push(terminal.clone());
            }
            w
        }
        Strategy::AxisOrder { order, terminal } => {
            check_dim(n, terminal.len(), "axis-order terminal")?;
            check_dim(n, order.len(), "axis order")?;
            let mut seen = vec![false; n];
            for &i in order {
                if i >= n || seen[i] {
                    return param(format!("axis order {order:?} is not a permutation of 0..{n}"));
                }
                seen[i] = true;
            }
            let mut w = vec![origin];
            let mut cur = vec![0.0; n];
            for &i in order {
                if terminal[i] != 0.0 {
                    cur[i] = terminal[i];
                    w.push(cur.clone());
                }
            }
            w
        }
    };
    let segments = waypoints.len().saturating_sub(1);
    let per = match (segments, total_steps) {
        (0, _) => total_steps.max(1),
        (_, 0) => return param("total steps must be at least 1"),
        _ => (total_steps / segments).max(1),
    };
    PathSpec::new(waypoints, per)
}

/// All `n!` axis orders in lexicographic order.
pub fn all_axis_orders(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}
