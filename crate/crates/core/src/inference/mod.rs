//! Integrating multi-parameter fields along paths in parameter space.

mod integrate;
mod paths;

pub use integrate::{
    export_trajectory, generate, generate_grid, integrate_path, integrate_with, Integrator, Trajectory,
    DEFAULT_STEPS,
};
pub use paths::{all_axis_orders, strategy_to_path, PathSpec, Strategy};
