//! Executable constructions for width-bounded ReLU network expressivity.
//!
//! The crate provides four things:
//!
//! - [`net`]: a plain fully-connected ReLU network model with evaluation,
//!   composition, parameter counting, and a JSON on-disk format.
//! - [`universal`]: the constructive width-(n+4) approximator — cover a
//!   target function with weighted cubes and chain one trapezoid-carving
//!   block per cube, with an explicit L1 error budget.
//! - [`wide`]: explicit wide-and-shallow interpolation targets over the
//!   2k^4 comparison grid, built from admissible value vectors.
//! - [`train`] / [`eval`]: from-scratch backprop with AdaDelta plus the
//!   experiment harness and the error-measurement utilities used to compare
//!   narrow trained approximators against wide targets.

pub mod error;
pub mod eval;
pub mod net;
pub mod train;
pub mod universal;
pub mod wide;

pub use error::{Error, Result};
pub use net::{concat, param_count, Activation, Layer, Network};
pub use universal::{
    approximate_function, build_block, build_universal, decompose_grid, l1_error_bound,
    select_delta, trapezoid_oracle, ApproximationPlan, BlockReport, Cube, GridSamples,
};
pub use wide::{
    build_wide_target, check_e0, grid_points, max_grid_relative_error, pwl_to_affine, sample_e0,
    second_layer_values, E0Vector, E0Violation, GridSpec,
};
