//! Spectral instrument for the incompressible Euler equations in the periodic
//! channel `T x (0,1)` with prescribed (inflow-outflow) normal velocity.
//!
//! The crate is organised around a handful of layers:
//!
//! * [`mode_field`]: exact algebra of separable modes, used as an oracle.
//! * [`grid_field`]: Fourier x Chebyshev coefficient fields for the solver.
//! * [`analytic_norms`]: truncated analytic norms with a shrinking radius.
//! * [`combinatorics`]: exact certificates for the coefficient inequalities.
//! * [`pressure`]: Neumann pressure solves, closed form and Chebyshev tau.
//! * [`estimates`]: measured constants of the product, pressure and a priori estimates.
//! * [`solver`]: RK4 and Picard drivers for the shifted system.
//! * [`config`], [`report`] and [`cli`]: configuration, scenarios and outputs.

pub mod analytic_norms;
pub mod chebyshev;
pub mod checkpoint;
pub mod cli;
pub mod combinatorics;
pub mod config;
pub mod error;
pub mod estimates;
pub mod grid_field;
pub mod mode_field;
pub mod pressure;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod suites;

pub use error::{Error, Result};
pub use num_complex::Complex64;
