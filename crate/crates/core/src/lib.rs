//! Simulation and certificate checking for nonlinear high-pass input-output systems.
//!
//! A system is high-pass in the dissipative sense when a nonnegative storage
//! function `V(x, u)` satisfies `dV/dt <= beta(|du/dt|) - alpha(|y|)`: the
//! output cost is bounded by the cost of the input *derivative*. The
//! asymptotic variant adds a second certificate bounding `dy/dt` by `du/dt`,
//! which is what forces `y(t) -> 0` once the input stops moving.
//!
//! The crate is organised bottom-up:
//!
//! * [`signals`]: differentiable test inputs, sampled traces, gain functions, norms.
//! * [`systems`]: the catalog of scalar filters and PI closed loops plus RK4/RK45 integration.
//! * [`certificates`]: storage functions, supply rates, pointwise/integral checks,
//!   convergence verdicts, the auxiliary inequalities and gain fitting.
//! * [`composition`]: series interconnections and the composite certificate.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod composition;
pub mod format;
pub mod nonlinearity;
pub mod signals;
pub mod systems;

mod error;
mod parallel;

pub use error::{Error, Result};
pub use parallel::{default_workers, map_ordered};
