//! Continuum realization: paraxial light propagation in a longitudinally
//! modulated array of super-Gaussian waveguides, Wannier modes, and the
//! coupled-mode parameters that map the array onto the lattice model.

mod array;
mod bpm;
mod modes;
mod tridiag;

pub use array::{channel, index_profile, Field, Grid, WaveguideArray, DEFAULT_DX, DEFAULT_DZ, PADDING_SPACINGS};
pub use bpm::{propagate, Propagation, PropagationOptions, RasterHeader, EDGE_POWER_LIMIT, NORM_DRIFT_LIMIT};
pub use modes::{
    effective_drive_amplitude, extract_couplings, extract_couplings_with, reduced_model, wannier_mode, wannier_mode_on,
    wannier_modes, Couplings, WannierMode,
};
pub use tridiag::{solve_tridiagonal, SymTridiagonal};
