//! Simulation and estimation toolkit for a phonon mode dispersively coupled to
//! a two-level qubit (a "mechanical qubit").
//!
//! The crate is organized bottom-up:
//!
//! * [`hilbert`]: truncated qubit ⊗ Fock operators, states and spectral routines.
//! * [`device`]: device parameters and closed-form dressed-state theory.
//! * [`dynamics`]: Lindblad integration and the analytic Kerr oracle.
//! * [`sequences`]: pulse-sequence IR and the experiment protocols.
//! * [`estimation`]: population inversion, curve fits, Wigner functions, MLE tomography.
//! * [`io`] and [`cli`]: file formats and the `mechq` command line.

pub mod cli;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod hilbert;
pub mod io;
pub mod sequences;

pub use device::{DeviceParams, Frame};
pub use error::{Error, Result};
pub use hilbert::{Dims, Operator, QuantumState, Qubit};
