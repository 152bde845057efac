//! Isolated-guide Wannier modes, coupling extraction by eigen-splitting and
//! the reduction of an array to the discrete lattice model.

use serde::{Deserialize, Serialize};

use super::array::{channel, Field, Grid, WaveguideArray, DEFAULT_DX};
use super::tridiag::SymTridiagonal;
use crate::error::{CdtError, Result};
use crate::model::{DriveSpec, LatticeModel, C64};

/// Largest mode amplitude (relative to the peak) tolerated at the domain edges.
const EDGE_TOLERANCE: f64 = 1e-6;

/// Bound mode of one isolated guide, sampled on a grid's interior nodes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WannierMode {
    pub guide: i64,
    pub center: f64,
    pub dx: f64,
    /// Normalized so that `integral phi^2 dx = 1`; positive peak.
    pub profile: Vec<f64>,
    pub beta0: f64,
}

impl WannierMode {
    /// `integral phi_j(x) phi(x) dx`.
    pub fn overlap(&self, field: &Field) -> C64 {
        self.profile.iter().zip(&field.values).map(|(p, f)| f * *p).sum::<C64>() * self.dx
    }

    /// Modal power `|integral phi_j phi dx|^2`.
    pub fn power(&self, field: &Field) -> f64 {
        self.overlap(field).norm_sqr()
    }

    pub fn to_field(&self) -> Field {
        Field::from_real(&self.profile, 0.0)
    }
}

/// Finite-difference `H0 = -1/2 d^2/dx^2 - p * sum channel` on `grid`, with the
/// channels centered at `centers`.
fn static_operator(array: &WaveguideArray, grid: &Grid, centers: &[f64]) -> SymTridiagonal {
    let dx = grid.dx();
    let kinetic = 1.0 / (dx * dx);
    let diag = grid
        .xs()
        .iter()
        .map(|&x| kinetic - array.contrast() * centers.iter().map(|c| channel(x - c, array.width())).sum::<f64>())
        .collect();
    SymTridiagonal { diag, off: -0.5 * kinetic }
}

fn edge_ratio(v: &[f64]) -> f64 {
    let peak = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let (first, last) = (v[0].abs(), v[v.len() - 1].abs());
    first.max(last) / peak
}

/// Wannier mode of the guide at list position `k`, computed on `grid`.
pub fn wannier_mode_on(array: &WaveguideArray, k: usize, grid: &Grid) -> Result<WannierMode> {
    if k >= array.n_guides() {
        return Err(CdtError::SiteOutOfRange { index: k, n_sites: array.n_guides() });
    }
    let center = array.center(k);
    let op = static_operator(array, grid, &[center]);
    let lowest = op.eigenvalue(0);
    if lowest >= 0.0 {
        return Err(CdtError::NoBoundState { eigenvalue: lowest });
    }
    let v = op.lowest_eigenvector(lowest);
    if edge_ratio(&v) > EDGE_TOLERANCE {
        return Err(CdtError::NoBoundState { eigenvalue: lowest });
    }
    let dx = grid.dx();
    let scale = 1.0 / dx.sqrt();
    let profile: Vec<f64> = v.iter().map(|x| x * scale).collect();
    let h = op.apply(&profile);
    let beta0 = profile.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() * dx;
    Ok(WannierMode { guide: array.guides()[k], center, dx, profile, beta0 })
}

/// Wannier mode of guide index `j` on the array's default grid.
pub fn wannier_mode(array: &WaveguideArray, j: i64) -> Result<WannierMode> {
    let k = array.position(j)?;
    wannier_mode_on(array, k, &Grid::for_array(array, 0.0)?)
}

/// Wannier modes of every guide of `array` on `grid`, in list order.
pub fn wannier_modes(array: &WaveguideArray, grid: &Grid) -> Result<Vec<WannierMode>> {
    (0..array.n_guides()).map(|k| wannier_mode_on(array, k, grid)).collect()
}

/// Nearest and next-nearest neighbor couplings of the static array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub omega: f64,
    pub v: f64,
}

fn splitting(array: &WaveguideArray, separation: i64, dx: f64) -> Result<f64> {
    let pair = WaveguideArray::with_guides(
        vec![0, separation],
        array.spacing(),
        array.width(),
        array.contrast(),
        0.0,
        0.0,
        crate::model::Mask::none(2),
    )?;
    let grid = Grid::with_steps(&pair, 0.0, dx, 1.0)?;
    let op = static_operator(&pair, &grid, &[pair.center(0), pair.center(1)]);
    let sym = op.eigenvalue(0);
    let anti = op.eigenvalue(1);
    if anti >= 0.0 {
        return Err(CdtError::NotSeparated { eigenvalue: anti });
    }
    if edge_ratio(&op.lowest_eigenvector(sym)) > EDGE_TOLERANCE {
        return Err(CdtError::NotSeparated { eigenvalue: sym });
    }
    Ok(0.5 * (anti - sym))
}

/// `(Omega_ext, v_ext)` from the eigen-splitting of two-guide composites at
/// spacings `w_s` and `2 w_s`. The modulation is ignored.
pub fn extract_couplings(array: &WaveguideArray) -> Result<Couplings> {
    extract_couplings_with(array, DEFAULT_DX)
}

pub fn extract_couplings_with(array: &WaveguideArray, dx: f64) -> Result<Couplings> {
    Ok(Couplings { omega: splitting(array, 1, dx)?, v: splitting(array, 2, dx)? })
}

/// First-order shift of `beta0` under full modulation: the on-site drive
/// amplitude of the reduced lattice model.
pub fn effective_drive_amplitude(array: &WaveguideArray) -> Result<f64> {
    let k = 0;
    let grid = Grid::for_array(array, 0.0)?;
    let mode = wannier_mode_on(array, k, &grid)?;
    let overlap: f64 = grid
        .xs()
        .iter()
        .zip(&mode.profile)
        .map(|(&x, p)| p * p * channel(x - mode.center, array.width()))
        .sum::<f64>()
        * mode.dx;
    Ok(array.contrast() * array.mod_depth() * overlap)
}

/// The lattice model and drive an array of consecutive guides reduces to.
///
/// The paraxial operator in the Wannier basis is `beta0 - H` with `H` the
/// lattice Hamiltonian built from these parameters. Since `H` is real, the
/// two evolutions are complex conjugates of each other for real initial
/// amplitudes and the populations coincide.
pub fn reduced_model(array: &WaveguideArray, couplings: Couplings) -> Result<(LatticeModel, DriveSpec)> {
    if array.guides().windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(CdtError::invalid("guides", "reduction needs consecutive guide indices"));
    }
    let model = LatticeModel::new(array.n_guides(), couplings.omega, couplings.v)?;
    let drive = if array.mod_depth() > 0.0 {
        DriveSpec::new(array.mask().clone(), effective_drive_amplitude(array)?, array.mod_frequency())?
    } else {
        DriveSpec::undriven(array.n_guides())
    };
    Ok((model, drive))
}
