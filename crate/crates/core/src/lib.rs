//! Steady-state hydraulics of water distribution networks by successive linearization.
//!
//! Every nonlinear head-loss relation is frozen at the previous iterate, which leaves a
//! square sparse linear system in heads and flows per iteration. The same rows can be
//! written as monomial equalities of a geometric program ([`assembly::emit_gp_monomials`]).
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix it to `f64`.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops over several parallel arrays read better than zipped iterators here.
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod document;
pub mod error;
pub mod fixtures;
pub mod hydraulics;
pub mod inp;
pub mod linalg;
pub mod model;
pub mod network;
pub mod oracle;
pub mod scalar;
pub mod solver;
pub mod state;
pub mod units;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Network = network::Network<f64>;
pub type HydraulicState = state::HydraulicState<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
pub type SolverReport = solver::SolverReport<f64>;
pub type Solution = solver::Solution<f64>;
pub type LinearSystem = assembly::LinearSystem<f64>;
pub type ErrorMetrics = oracle::ErrorMetrics<f64>;

pub type NetworkF32 = network::Network<f32>;
pub type HydraulicStateF32 = state::HydraulicState<f32>;
pub type SolverConfigF32 = solver::SolverConfig<f32>;
pub type SolutionF32 = solver::Solution<f32>;
