use serde::{Deserialize, Serialize};

use crate::error::{CdtError, Result};
use crate::model::{Mask, C64};

/// Default transverse step.
pub const DEFAULT_DX: f64 = 0.02;
/// Default longitudinal step.
pub const DEFAULT_DZ: f64 = 0.01;
/// Domain padding beyond the outer guides, in units of the spacing.
pub const PADDING_SPACINGS: f64 = 5.0;

/// Super-Gaussian channel `exp(-(u/w)^6)`.
pub fn channel(u: f64, width: f64) -> f64 {
    let s = (u / width).powi(2);
    (-(s * s * s)).exp()
}

/// A planar array of identical super-Gaussian guides centered at `j * w_s`.
///
/// The guide indices are explicit: `new` builds the symmetric array
/// `-M..=M`, `with_guides` any set (for instance a two-guide coupler).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WaveguideArray {
    guides: Vec<i64>,
    spacing: f64,
    width: f64,
    contrast: f64,
    mod_depth: f64,
    mod_frequency: f64,
    mask: Mask,
}

impl WaveguideArray {
    pub fn new(
        m_half: usize,
        spacing: f64,
        width: f64,
        contrast: f64,
        mod_depth: f64,
        mod_frequency: f64,
        mask: Mask,
    ) -> Result<Self> {
        let m = m_half as i64;
        Self::with_guides((-m..=m).collect(), spacing, width, contrast, mod_depth, mod_frequency, mask)
    }

    pub fn with_guides(
        guides: Vec<i64>,
        spacing: f64,
        width: f64,
        contrast: f64,
        mod_depth: f64,
        mod_frequency: f64,
        mask: Mask,
    ) -> Result<Self> {
        if guides.is_empty() {
            return Err(CdtError::invalid("guides", "at least one guide is required"));
        }
        if guides.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CdtError::invalid("guides", "indices must be strictly increasing"));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(CdtError::invalid("width", "must be positive"));
        }
        if !(spacing.is_finite() && spacing > width) {
            return Err(CdtError::invalid("spacing", "must exceed the guide width"));
        }
        if !(contrast.is_finite() && contrast > 0.0) {
            return Err(CdtError::invalid("contrast", "must be positive"));
        }
        if !(mod_depth.is_finite() && mod_depth >= 0.0) {
            return Err(CdtError::invalid("mod_depth", "must be non-negative"));
        }
        if !mod_frequency.is_finite() || (mod_depth > 0.0 && mod_frequency <= 0.0) {
            return Err(CdtError::invalid("mod_frequency", "must be positive when modulated"));
        }
        if mask.len() != guides.len() {
            return Err(CdtError::SizeMismatch { expected: guides.len(), actual: mask.len() });
        }
        Ok(Self { guides, spacing, width, contrast, mod_depth, mod_frequency, mask })
    }

    /// Same geometry with a different modulation.
    pub fn with_modulation(&self, mod_depth: f64, mod_frequency: f64, mask: Mask) -> Result<Self> {
        Self::with_guides(self.guides.clone(), self.spacing, self.width, self.contrast, mod_depth, mod_frequency, mask)
    }

    pub fn guides(&self) -> &[i64] {
        &self.guides
    }

    pub fn n_guides(&self) -> usize {
        self.guides.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn contrast(&self) -> f64 {
        self.contrast
    }

    pub fn mod_depth(&self) -> f64 {
        self.mod_depth
    }

    pub fn mod_frequency(&self) -> f64 {
        self.mod_frequency
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    /// Center of the guide at list position `k`.
    pub fn center(&self, k: usize) -> f64 {
        self.guides[k] as f64 * self.spacing
    }

    /// List position of guide index `j`.
    pub fn position(&self, j: i64) -> Result<usize> {
        self.guides.iter().position(|&g| g == j).ok_or_else(|| {
            CdtError::invalid("guide", format!("guide {j} is not in the array {:?}", self.guides))
        })
    }

    /// Modulation factor `1 + F_k mu sin(w z)` of guide `k`.
    pub fn modulation(&self, k: usize, z: f64) -> f64 {
        if self.mask.is_driven(k) {
            1.0 + self.mod_depth * (self.mod_frequency * z).sin()
        } else {
            1.0
        }
    }

    pub fn period(&self) -> Option<f64> {
        (self.mod_depth > 0.0).then(|| 2.0 * std::f64::consts::PI / self.mod_frequency)
    }
}

/// Relative index distribution `R(x, z)`.
pub fn index_profile(array: &WaveguideArray, x: f64, z: f64) -> f64 {
    (0..array.n_guides())
        .map(|k| array.modulation(k, z) * channel(x - array.center(k), array.width))
        .sum()
}

/// Transverse grid and longitudinal stepping. The field lives on the
/// `nx - 1` interior nodes `x_min + k dx`, `k = 1..nx`; both ends are held at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub dz: f64,
    pub z_max: f64,
}

impl Grid {
    /// Default grid for `array`: `dx = 0.02`, `dz = 0.01`, padding of five spacings.
    pub fn for_array(array: &WaveguideArray, z_max: f64) -> Result<Self> {
        Self::with_steps(array, z_max, DEFAULT_DX, DEFAULT_DZ)
    }

    /// Grid with the given steps. The domain is widened to a whole number of
    /// `dx` on each side of the origin, so guide centers fall on nodes
    /// whenever `w_s / dx` is an integer.
    pub fn with_steps(array: &WaveguideArray, z_max: f64, dx: f64, dz: f64) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(CdtError::invalid("dx", "must be positive"));
        }
        let pad = PADDING_SPACINGS * array.spacing;
        let lo = array.center(0) - pad;
        let hi = array.center(array.n_guides() - 1) + pad;
        let k_lo = (lo / dx).floor();
        let k_hi = (hi / dx).ceil();
        let grid = Grid { x_min: k_lo * dx, x_max: k_hi * dx, nx: (k_hi - k_lo) as usize, dz, z_max };
        grid.validate(array)?;
        Ok(grid)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    /// Number of interior nodes.
    pub fn n_points(&self) -> usize {
        self.nx - 1
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i + 1) as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points()).map(|i| self.x(i)).collect()
    }

    /// Number of longitudinal steps to reach `z_max`.
    pub fn n_steps(&self) -> usize {
        (self.z_max / self.dz - 1e-9).ceil().max(0.0) as usize
    }

    pub fn validate(&self, array: &WaveguideArray) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max > self.x_min) {
            return Err(CdtError::invalid("x_max", "must exceed x_min"));
        }
        if self.nx < 3 {
            return Err(CdtError::invalid("nx", "need at least three intervals"));
        }
        let dx = self.dx();
        if dx > array.width / 6.0 + 1e-12 {
            return Err(CdtError::invalid("dx", format!("{dx} exceeds w_x/6 = {}", array.width / 6.0)));
        }
        let pad = PADDING_SPACINGS * array.spacing;
        let tol = 1e-9 * (1.0 + pad);
        if array.center(0) - self.x_min < pad - tol || self.x_max - array.center(array.n_guides() - 1) < pad - tol {
            return Err(CdtError::invalid("x_min", format!("domain must extend {pad} beyond the outer guides")));
        }
        if !(self.dz.is_finite() && self.dz > 0.0) {
            return Err(CdtError::invalid("dz", "must be positive"));
        }
        if let Some(period) = array.period() {
            let limit = (period / 200.0).min(0.05);
            if self.dz > limit {
                return Err(CdtError::StepTooCoarse { dt: self.dz, limit });
            }
        }
        if !(self.z_max.is_finite() && self.z_max >= 0.0) {
            return Err(CdtError::invalid("z_max", "must be non-negative"));
        }
        Ok(())
    }
}

/// Field samples on the interior grid nodes at propagation distance `z`.
#[derive(Clone, Debug)]
pub struct Field {
    pub values: Vec<C64>,
    pub z: f64,
}

impl Field {
    pub fn from_real(profile: &[f64], z: f64) -> Self {
        Field { values: profile.iter().map(|&p| C64::new(p, 0.0)).collect(), z }
    }

    /// `integral |phi|^2 dx`.
    pub fn norm(&self, dx: f64) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }
}
