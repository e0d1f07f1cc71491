//! Discrete optimal transport on point clouds.

mod assignment;
mod barycenter;
mod cost;
mod coupling;
mod exact;
mod metrics;
mod sinkhorn;

pub use assignment::{assignment_cost, match_clouds, solve_assignment};
pub use barycenter::{
    barycenter_objective, free_support_barycenter, BarycenterInit, BarycenterOptions,
    BarycenterReport,
};
pub use cost::{centered_cost_matrix, squared_cost_matrix, DenseMatrix};
pub(crate) use cost::squared_distance;
pub use coupling::{minibatch_couple, AffineMap, CoupledTuple, CouplingMode, CouplingPlan};
pub use exact::exact_plan;
pub use metrics::{paired_cost, sliced_w2, w2_exact, w2_squared_1d, w2_weighted};
pub use sinkhorn::{sinkhorn, SinkhornResult};
