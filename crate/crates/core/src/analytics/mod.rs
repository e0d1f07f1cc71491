//! Commutativity gaps, barycenter oracles and transport-cost checks.

mod commutativity;
mod compare;
mod cost;
mod gaussian;
mod metric;
mod slice;
pub mod svg;

pub use commutativity::{
    commutativity_gap, comparison_strategies, gap_report, strategy_endpoints, CommutativityReport, PairGap,
    MAX_ORDER_PARAMS,
};
pub use compare::{
    barycenter_compare, BarycenterGridReport, CompareOptions, GridClouds, GridEntry, Oracle, OracleKind, SOURCE_KEY,
};
pub use cost::pifm_transport_cost;
pub use gaussian::{gaussian_barycenter_oracle, sample_oracle, GaussianSpec};
pub use metric::{Metric, DEFAULT_PROJECTIONS, EXACT_LIMIT};
pub use slice::{slice_barycenter_check, SliceEntry, SliceReport};
