//! Simulation and estimation workbench for quantum state tomography.
//!
//! The crate builds measurement strategies ([`povm`]), simulates tomographic
//! data under fixed per-setting unitary errors ([`simulate`]), reconstructs
//! states by constrained maximum likelihood ([`estimate`]) and runs the
//! comparison experiments ([`bench`]).

pub mod bench;
pub mod error;
pub mod estimate;
pub mod io;
pub mod povm;
pub mod qcore;
pub mod simulate;

pub use error::{Error, Result};
