//! Numerical laboratory for the two-dimensional boundary-layer vorticity
//! system on the periodic strip T x [0, Y].
//!
//! The crate provides, in dependency order:
//!
//! - [`grid`]: fields on the strip, discrete derivatives, weighted quadrature;
//! - [`calculus`]: runnable Hardy / Sobolev / trace inequalities, pointwise
//!   interpolation checks and decay-rate fitting;
//! - [`norms`]: the weighted Sobolev norms, the cancellation quantities
//!   g_k and a = d_y omega / omega, and solution-class membership;
//! - [`solver`]: IMEX time integration of the vorticity system, velocity
//!   reconstruction, cutoff truncation, Picard iteration;
//! - [`heat`]: a reflection-kernel propagator used to cross-validate the
//!   stepper on linear problems;
//! - [`monitors`]: the a priori estimates turned into runtime bound checks
//!   and the lifespan formulas;
//! - [`verify`]: structural identity residuals (boundary reduction, the
//!   evolution equations for a and g_s, the momentum form), the L^2
//!   comparison harness and limit studies;
//! - [`io`]: the binary field container and CSV export.

pub mod calculus;
pub mod error;
pub mod grid;
pub mod heat;
pub mod io;
pub mod monitors;
pub mod norms;
pub mod scenario;
pub mod solver;
pub mod stencil;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{
    build_grid, deriv_x, deriv_x_scheme, deriv_y, integrate_y_from_wall, integrate_y_upper,
    weighted_l2, weighted_l2_below, DerivScheme, Field, Grading, Grid, GridSpec, Profile,
    UpperIntegral, YBoundary,
};
pub use norms::{MembershipReport, NormParams, NormReport};
pub use solver::{SchemeConfig, SolverState};
