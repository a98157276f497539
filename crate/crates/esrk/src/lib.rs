//! Discovery, optimization, and certification of 16-stage fourth-order
//! extended-stability Runge-Kutta (ESRK) schemes in low-storage Van der
//! Houwen form.
//!
//! The crate is organized around a pipeline:
//!
//! 1. [`tableau`] — the reduced `2s - 1` parameterization and its expansion
//!    into a full Butcher tableau.
//! 2. [`order_conditions`] — the eight fourth-order residuals and their
//!    exact Jacobian.
//! 3. [`stability`] — stability polynomials, beta conditions, real-axis
//!    extents, and plot grids.
//! 4. [`heuristics`] — symbolic constraints (`b(5) = a(2,1)^2`) that remove
//!    free parameters: generation, mutation, parsing, application.
//! 5. [`solver`] — a damped Gauss-Newton feasibility solver over the free
//!    parameters, with box bounds and stability penalties.
//! 6. [`search`] — the generate / solve / validate / mutate-on-failure /
//!    fallback discovery loop with persistent records.
//! 7. [`benchmarks`] — Brusselator and Stokes test problems, generic and
//!    low-storage steppers, convergence studies.
//! 8. [`persist`] — file formats: tableau documents, heuristic stores,
//!    CSV tables.
//!
//! See the book under `book/` for a guided tour with runnable examples.

// Indexed loops here mirror the summation formulas they implement.
#![allow(clippy::needless_range_loop)]

pub mod benchmarks;
mod eval;
pub mod heuristics;
pub mod order_conditions;
pub mod persist;
pub mod rng;
pub mod search;
pub mod solver;
pub mod stability;
pub mod tableau;

pub use heuristics::{parse_expression, HeuristicExpression};
pub use order_conditions::{order_residuals, OrderResiduals};
pub use solver::{SolveConfig, SolveReport, SolveStatus};
pub use stability::{validate_scheme, StabilityConfig, StabilityReport};
pub use tableau::{apply_constraints, ButcherTableau, ReducedParameters};
