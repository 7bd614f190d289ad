//! Reader and writer for the subset of the EPANET `.inp` format used by the solver.

mod canonical;
mod parse;
mod write;

pub use canonical::{canonicalize, fit_pump_curve, PumpCurveFit};
pub use parse::{parse_inp, RawNetworkDescription, Record};
pub use write::write_inp;

use crate::error::Result;
use crate::network::Network;

/// Parses and canonicalizes `.inp` text in one step.
pub fn read_network(text: &str) -> Result<Network<f64>> {
    canonicalize(&parse_inp(text)?)
}
