pub mod analysis;
pub mod bernstein;
pub mod cf_kinetic;
pub mod characteristics;
pub mod equilibrium;
pub mod error;
pub mod fixtures;
pub mod hj_solver;
pub mod io;
pub mod measures;
mod nnls;
pub mod validation;

pub use error::{Error, Result};
