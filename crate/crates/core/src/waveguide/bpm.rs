//! Crank-Nicolson beam propagation of the paraxial equation
//! `i phi_z = -1/2 phi_xx - p R(x, z) phi` with zero-value boundaries.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::array::{channel, Field, Grid, WaveguideArray};
use super::modes::{wannier_modes, WannierMode};
use super::tridiag::solve_tridiagonal;
use crate::error::{CdtError, Result};
use crate::model::C64;

/// Relative norm drift tolerated over a whole run.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;
/// Largest power tolerated within two guide widths of either boundary.
pub const EDGE_POWER_LIMIT: f64 = 1e-4;
/// Sponge fraction of the domain on each side.
const SPONGE_FRACTION: f64 = 0.1;
const SPONGE_STRENGTH: f64 = 50.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropagationOptions {
    /// Steps between modal-power records.
    pub record_every: usize,
    /// Steps between stored field snapshots; `None` stores none.
    pub snapshot_every: Option<usize>,
    /// Quadratic imaginary absorber over the outer tenth of the domain.
    /// Disables the norm-drift guard.
    pub sponge: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self { record_every: 10, snapshot_every: None, sponge: false }
    }
}

#[derive(Clone, Debug)]
pub struct Propagation {
    pub guides: Vec<i64>,
    pub z: Vec<f64>,
    /// `modal_powers[r][k]`: power in guide `k` at record `r`.
    pub modal_powers: Vec<Vec<f64>>,
    pub snapshots: Vec<Field>,
    pub final_field: Field,
    /// Largest relative deviation of the norm from its initial value.
    pub norm_drift: f64,
    pub xs: Vec<f64>,
}

/// Sidecar describing a binary intensity raster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterHeader {
    pub nx: usize,
    pub nz: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub z_max: f64,
}

impl Propagation {
    pub fn guide_series(&self, k: usize) -> Vec<f64> {
        self.modal_powers.iter().map(|row| row[k]).collect()
    }

    /// `z,P_<j>...` with guide indices as labels (`P_-1,P_0,P_1`).
    pub fn write_modal_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> =
            std::iter::once("z".to_string()).chain(self.guides.iter().map(|j| format!("P_{j}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        for (z, row) in self.z.iter().zip(&self.modal_powers) {
            write!(w, "{z}")?;
            for p in row {
                write!(w, ",{p}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Long-format snapshots: `z,x,|phi|^2`.
    pub fn write_snapshot_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "z,x,|phi|^2")?;
        for f in &self.snapshots {
            for (x, v) in self.xs.iter().zip(&f.values) {
                writeln!(w, "{},{x},{}", f.z, v.norm_sqr())?;
            }
        }
        Ok(())
    }

    /// Snapshot intensities as little-endian `f64`, one row per snapshot.
    pub fn write_raster<W: Write>(&self, mut w: W) -> std::io::Result<RasterHeader> {
        for f in &self.snapshots {
            for v in &f.values {
                w.write_all(&v.norm_sqr().to_le_bytes())?;
            }
        }
        Ok(RasterHeader {
            nx: self.xs.len(),
            nz: self.snapshots.len(),
            x_min: self.xs[0],
            x_max: self.xs[self.xs.len() - 1],
            z_max: self.snapshots.last().map_or(0.0, |f| f.z),
        })
    }
}

fn sponge_profile(grid: &Grid) -> Vec<f64> {
    let width = SPONGE_FRACTION * (grid.x_max - grid.x_min);
    grid.xs()
        .iter()
        .map(|&x| {
            let depth = (grid.x_min + width - x).max(x - (grid.x_max - width)).max(0.0) / width;
            SPONGE_STRENGTH * depth * depth
        })
        .collect()
}

fn edge_power(field: &Field, xs: &[f64], grid: &Grid, margin: f64) -> f64 {
    xs.iter()
        .zip(&field.values)
        .filter(|(&x, _)| x - grid.x_min <= margin || grid.x_max - x <= margin)
        .map(|(_, v)| v.norm_sqr())
        .sum::<f64>()
        * grid.dx()
}

/// Propagates `field0` to `grid.z_max` in equal steps no longer than `grid.dz`,
/// recording the power in each guide's Wannier mode.
pub fn propagate(array: &WaveguideArray, field0: &Field, grid: &Grid, opts: &PropagationOptions) -> Result<Propagation> {
    grid.validate(array)?;
    let n = grid.n_points();
    if field0.values.len() != n {
        return Err(CdtError::SizeMismatch { expected: n, actual: field0.values.len() });
    }
    if opts.record_every == 0 || opts.snapshot_every == Some(0) {
        return Err(CdtError::invalid("record_every", "must be at least 1"));
    }
    let modes = wannier_modes(array, grid)?;
    let xs = grid.xs();
    let dx = grid.dx();

    // R(x, z) = fixed + sin(w z) * modulated
    let mut fixed = vec![0.0; n];
    let mut modulated = vec![0.0; n];
    for k in 0..array.n_guides() {
        let c = array.center(k);
        for (i, &x) in xs.iter().enumerate() {
            let ch = channel(x - c, array.width());
            fixed[i] += ch;
            if array.mask().is_driven(k) {
                modulated[i] += array.mod_depth() * ch;
            }
        }
    }
    let absorb = if opts.sponge { sponge_profile(grid) } else { vec![0.0; n] };

    let steps = grid.n_steps();
    let h = if steps == 0 { 0.0 } else { grid.z_max / steps as f64 };
    let kinetic = 1.0 / (dx * dx);
    let off = C64::new(-0.5 * kinetic, 0.0);
    let half = C64::new(0.0, 0.5 * h);
    let band = vec![half * off; n];
    let margin = 2.0 * array.width();

    let record = |f: &Field, modes: &[WannierMode]| modes.iter().map(|m| m.power(f)).collect::<Vec<f64>>();

    let mut field = Field { values: field0.values.clone(), z: field0.z };
    let norm0 = field.norm(dx);
    if !(norm0.is_finite() && norm0 > 0.0) {
        return Err(CdtError::invalid("field0", "must have finite nonzero norm"));
    }
    let mut out = Propagation {
        guides: array.guides().to_vec(),
        z: vec![field.z],
        modal_powers: vec![record(&field, &modes)],
        snapshots: opts.snapshot_every.map(|_| vec![field.clone()]).unwrap_or_default(),
        final_field: field.clone(),
        norm_drift: 0.0,
        xs: xs.clone(),
    };

    let mut diag = vec![C64::new(0.0, 0.0); n];
    let mut lhs = vec![C64::new(0.0, 0.0); n];
    let mut rhs = vec![C64::new(0.0, 0.0); n];
    let z0 = field.z;
    for s in 0..steps {
        let z = z0 + s as f64 * h;
        let sz = if array.mod_depth() > 0.0 { (array.mod_frequency() * (z + 0.5 * h)).sin() } else { 0.0 };
        for i in 0..n {
            diag[i] = C64::new(kinetic - array.contrast() * (fixed[i] + sz * modulated[i]), -absorb[i]);
            lhs[i] = C64::new(1.0, 0.0) + half * diag[i];
        }
        let phi = &field.values;
        for i in 0..n {
            let mut hphi = diag[i] * phi[i];
            if i > 0 {
                hphi += off * phi[i - 1];
            }
            if i + 1 < n {
                hphi += off * phi[i + 1];
            }
            rhs[i] = phi[i] - half * hphi;
        }
        field.values = solve_tridiagonal(&band, &lhs, &band, &rhs);
        field.z = z0 + (s + 1) as f64 * h;

        if field.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(CdtError::NonFinite { t: field.z });
        }
        let drift = (field.norm(dx) - norm0).abs() / norm0;
        out.norm_drift = out.norm_drift.max(drift);
        if !opts.sponge && drift > NORM_DRIFT_LIMIT {
            return Err(CdtError::NormDrift { drift, limit: NORM_DRIFT_LIMIT });
        }
        let edge = edge_power(&field, &xs, grid, margin);
        if edge > EDGE_POWER_LIMIT {
            return Err(CdtError::BoundaryReflection { power: edge, z: field.z });
        }
        let last = s + 1 == steps;
        if (s + 1) % opts.record_every == 0 || last {
            out.z.push(field.z);
            out.modal_powers.push(record(&field, &modes));
        }
        if let Some(every) = opts.snapshot_every {
            if (s + 1) % every == 0 || last {
                out.snapshots.push(field.clone());
            }
        }
    }
    out.final_field = field;
    Ok(out)
}
