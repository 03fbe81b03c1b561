//! Sixth-order compact finite differences (Compact6) with forward Euler time
//! stepping for Sobolev-type equations
//!
//! ```text
//! u_t + f(u)_x - gamma u_xx - delta u_xxt = g(x, t)
//! ```
//!
//! on bounded intervals with Dirichlet data, plus the linear two-dimensional
//! analogue. The crate is organised bottom-up:
//!
//! - [`grid`]: uniform grids and sampled fields
//! - [`banded`]: band storage, pivoted band LU, and a dense reference solver
//! - [`operators`]: compact first/second derivative operators and their
//!   Dirichlet closures
//! - [`models`]: the equation catalogue (linear Sobolev, Equal Width, BBM-Burgers)
//! - [`stepper`]: the fully discrete scheme in 1D and 2D
//! - [`stability`]: Fourier symbols, amplification factors and step bounds
//! - [`diagnostics`]: error norms, observed orders, invariants, bore metrics
//! - [`cli`]: JSON-configured experiment runner with CSV output

pub mod banded;
pub mod cli;
pub mod diagnostics;
mod error;
pub mod grid;
pub mod models;
pub mod operators;
pub mod stability;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::{make_grid, sample, Field1D, Field2D, Grid1D, Grid2D};
pub use models::EquationSpec;
pub use operators::{BoundaryQuad, Closure, DerivativeOperator, DerivativeOrder};
pub use stepper::{SimState, Status};
