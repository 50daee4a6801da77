//! Catalog state-space systems and their numerical integration.

mod model;
mod response;
mod solver;
mod trajectory;

pub use model::{
    cubic_hp, default_system, linear_hp, nonsmooth_pi, pi_closed_loop, sector_hp, sinh_hp, SectorSpec,
    SystemKind, SystemModel, CATALOG, DEFAULT_SIGN_SMOOTHING,
};
pub use response::{frequency_response, FrequencyResponse};
pub use solver::{
    simulate, Method, SolverConfig, DEFAULT_ATOL, DEFAULT_MAX_STEP, DEFAULT_MIN_STEP,
    DEFAULT_OUTPUT_LIMIT, DEFAULT_RTOL,
};
pub use trajectory::{SolverStats, Trajectory};

/// `dy/dt` from the catalog chain-rule formula.
pub fn output_derivative(sys: &SystemModel, x: &[f64], u: f64, du: f64) -> f64 {
    sys.output_derivative(x, u, du)
}
