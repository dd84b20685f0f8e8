//! Simulation and control toolkit for a continuously diluted, age-structured
//! population (a chemostat whose outflow rate is the control input).
//!
//! The library covers:
//!
//! - the population model with age-dependent mortality and birth modulus,
//!   its one-parameter equilibrium family, and the characteristic-equation
//!   solver for the equilibrium dilution rate ([`model`]);
//! - cell quadrature rules exact for weighted exponentials, used for the
//!   renewal boundary and the measured output ([`quadrature`]);
//! - a characteristic-aligned transport simulator for the controlled
//!   hyperbolic PDE ([`pde_sim`]);
//! - sampled-data clamped dilution-rate feedback with zero-order hold
//!   ([`control`]);
//! - the scalar renewal (integral delay) equation equivalent to the PDE,
//!   envelope certificates, and ergodicity diagnostics ([`ide`]);
//! - stability functionals and rate constants measured from run data
//!   ([`metrics`]);
//! - bundled study scenarios and a batch runner with an optional
//!   data-parallel backend ([`scenarios`], [`batch`]).

pub mod batch;
pub mod control;
pub mod error;
pub mod grid;
pub mod ide;
pub mod metrics;
pub mod model;
pub mod pde_sim;
pub mod quadrature;
pub mod scenarios;

pub use error::{Error, Result};
pub use grid::{AgeProfile, Grid};
