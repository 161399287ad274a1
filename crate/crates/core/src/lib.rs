//! Simulation and analysis toolkit for single-photon non-reciprocity in a
//! cold-atom medium with Zeeman-resolved electromagnetically induced
//! transparency.
//!
//! All rates and detunings are expressed in units of the excited-state decay
//! rate Γ and all times in units of 1/Γ. Conversion to laboratory units only
//! happens at the I/O boundary (see [`units`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atom;
pub mod channel;
pub mod cli;
pub mod coincidence;
pub mod config;
pub mod error;
pub mod io;
pub mod pulse;
pub mod qubit;
pub mod storage;
pub mod susceptibility;
pub mod tomography;
pub mod units;

pub use atom::{AtomSpec, Direction, TransitionTable, ZeemanState};
pub use error::{Error, Result};
pub use qubit::QubitState;
pub use susceptibility::{Chi, CouplingParams, MediumParams, ProbeParams};
