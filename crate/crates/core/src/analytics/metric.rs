use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{PointCloud, RngStream, StreamId};
use crate::transport::{sliced_w2, w2_exact, w2_weighted};

/// Largest cloud size compared with the exact assignment solver under `Auto`.
pub const EXACT_LIMIT: usize = 1024;
pub const DEFAULT_PROJECTIONS: usize = 256;

/// Cloud-to-cloud distance used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Metric {
    /// Exact W2 up to [`EXACT_LIMIT`] points per cloud, sliced beyond.
    #[default]
    Auto,
    Exact,
    Sliced { projections: usize },
}

impl Metric {
    /// Distance between two clouds; `key` selects the projection stream for sliced W2.
    pub fn distance(&self, x: &PointCloud, y: &PointCloud, seed: u64, key: u32) -> Result<f64> {
        let sliced = |p| sliced_w2(x, y, p, &mut RngStream::keyed(seed, StreamId::Projections, key));
        let exact = || {
            if x.len() == y.len() && x.is_uniform() && y.is_uniform() {
                w2_exact(x, y)
            } else {
                w2_weighted(x, y)
            }
        };
        match *self {
            Metric::Exact => exact(),
            Metric::Sliced { projections } => sliced(projections),
            Metric::Auto => {
                if x.len().max(y.len()) <= EXACT_LIMIT && x.len() == y.len() {
                    exact()
                } else {
                    sliced(DEFAULT_PROJECTIONS)
                }
            }
        }
    }

    pub fn label(&self, n: usize) -> String {
        match *self {
            Metric::Exact => "w2-exact".into(),
            Metric::Sliced { projections } => format!("sliced-w2-{projections}"),
            Metric::Auto if n <= EXACT_LIMIT => "w2-exact".into(),
            Metric::Auto => format!("sliced-w2-{DEFAULT_PROJECTIONS}"),
        }
    }
}
