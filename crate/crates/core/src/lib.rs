//! Single-particle dynamics in tight-binding lattice arrays driven by selective
//! in-phase harmonic modulations.
//!
//! The crate covers the discrete lattice (amplitude equations, Floquet
//! spectra, the high-frequency effective model and the transport protocols
//! built on coherent destruction of tunneling) and its continuum realization
//! as a longitudinally modulated optical waveguide array.
//!
//! Site indices are zero-based throughout the library. Output files label
//! sites one-based (`P_1 .. P_N`).

pub mod cli;
pub mod effective;
pub mod error;
pub mod floquet;
pub mod integrator;
pub mod model;
pub mod protocols;
pub mod waveguide;

pub use error::{CdtError, Result};
pub use model::{DriveSpec, LatticeModel, Mask, PhasePolicy, Schedule, Segment, StateVector, C64};
pub use integrator::Trajectory;
