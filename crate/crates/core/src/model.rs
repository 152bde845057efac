//! Lattice, drive and state data model.
//!
//! The lattice is an open chain with tunneling `omega_coupling` between
//! nearest neighbors and `v_coupling` between next-nearest neighbors. Driven
//! sites (mask flag set) carry the on-site energy `A sin(w (t - t_ref))`; all
//! other sites sit at zero energy.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CdtError, Result};

pub type C64 = num_complex::Complex64;

/// Tolerance on the norm of a freshly constructed state.
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeModel {
    n_sites: usize,
    omega_coupling: f64,
    v_coupling: f64,
    #[serde(default)]
    boundary: Boundary,
}

impl LatticeModel {
    pub fn new(n_sites: usize, omega_coupling: f64, v_coupling: f64) -> Result<Self> {
        if n_sites < 2 {
            return Err(CdtError::invalid("n_sites", format!("need at least 2 sites, got {n_sites}")));
        }
        if !omega_coupling.is_finite() {
            return Err(CdtError::invalid("omega_coupling", "must be finite"));
        }
        if !v_coupling.is_finite() {
            return Err(CdtError::invalid("v_coupling", "must be finite"));
        }
        Ok(LatticeModel {
            n_sites,
            omega_coupling,
            v_coupling,
            boundary: Boundary::Open,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn omega_coupling(&self) -> f64 {
        self.omega_coupling
    }

    pub fn v_coupling(&self) -> f64 {
        self.v_coupling
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Tunneling amplitude between sites `j` and `k`.
    pub fn coupling(&self, j: usize, k: usize) -> f64 {
        match j.abs_diff(k) {
            1 => self.omega_coupling,
            2 => self.v_coupling,
            _ => 0.0,
        }
    }

    /// Static (undriven) coupling matrix.
    pub fn coupling_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_sites, self.n_sites, |j, k| self.coupling(j, k))
    }

    /// `out = H a` for the given on-site energies.
    ///
    /// Terms are accumulated in a fixed order so that mirror-image sites see
    /// bit-identical arithmetic; mirror-symmetric runs stay symmetric exactly.
    pub(crate) fn apply(&self, onsite: &[f64], a: &[C64], out: &mut [C64]) {
        let n = self.n_sites;
        let zero = C64::new(0.0, 0.0);
        for j in 0..n {
            let near = (if j >= 1 { a[j - 1] } else { zero }) + (if j + 1 < n { a[j + 1] } else { zero });
            let next = (if j >= 2 { a[j - 2] } else { zero }) + (if j + 2 < n { a[j + 2] } else { zero });
            out[j] = near * self.omega_coupling + next * self.v_coupling + a[j] * onsite[j];
        }
    }

    pub fn check_site(&self, j: usize) -> Result<()> {
        if j < self.n_sites {
            Ok(())
        } else {
            Err(CdtError::SiteOutOfRange { index: j, n_sites: self.n_sites })
        }
    }
}

/// Selective modulation pattern: which sites are driven.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mask(Vec<bool>);

impl Mask {
    pub fn new(flags: Vec<bool>) -> Self {
        Mask(flags)
    }

    pub fn none(n: usize) -> Self {
        Mask(vec![false; n])
    }

    pub fn all(n: usize) -> Self {
        Mask(vec![true; n])
    }

    /// Mask of length `n` with the listed sites driven.
    pub fn from_sites(n: usize, sites: &[usize]) -> Result<Self> {
        let mut flags = vec![false; n];
        for &s in sites {
            if s >= n {
                return Err(CdtError::SiteOutOfRange { index: s, n_sites: n });
            }
            flags[s] = true;
        }
        Ok(Mask(flags))
    }

    /// Parses 0/1 flags.
    pub fn from_flags(flags: &[u8]) -> Result<Self> {
        flags
            .iter()
            .map(|&f| match f {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(CdtError::invalid("mask", format!("flags must be 0 or 1, got {other}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Mask)
    }

    /// All 2^n masks of length `n`, in binary counting order.
    pub fn enumerate(n: usize) -> Vec<Mask> {
        (0..(1usize << n))
            .map(|bits| Mask((0..n).map(|j| bits >> j & 1 == 1).collect()))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_driven(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    pub fn driven_sites(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&j| self.0[j]).collect()
    }

    pub fn mirrored(&self) -> Mask {
        Mask(self.0.iter().rev().copied().collect())
    }

    pub fn complement(&self) -> Mask {
        Mask(self.0.iter().map(|f| !f).collect())
    }

    pub fn as_u8(&self) -> Vec<u8> {
        self.0.iter().map(|&f| f as u8).collect()
    }
}

impl fmt::Debug for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mask(")?;
        for &flag in &self.0 {
            write!(f, "{}", flag as u8)?;
        }
        write!(f, ")")
    }
}

impl Serialize for Mask {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_u8().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let flags = Vec::<u8>::deserialize(d)?;
        Mask::from_flags(&flags).map_err(serde::de::Error::custom)
    }
}

/// Harmonic drive `eps_j(t) = F_j A sin(w (t - t_ref))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    mask: Mask,
    amplitude: f64,
    frequency: f64,
    #[serde(default)]
    phase_origin: f64,
}

impl DriveSpec {
    pub fn new(mask: Mask, amplitude: f64, frequency: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(CdtError::invalid("amplitude", format!("must be finite and >= 0, got {amplitude}")));
        }
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(CdtError::invalid("frequency", format!("must be finite and > 0, got {frequency}")));
        }
        Ok(DriveSpec {
            mask,
            amplitude,
            frequency,
            phase_origin: 0.0,
        })
    }

    /// A drive that never modulates anything.
    pub fn undriven(n_sites: usize) -> Self {
        DriveSpec {
            mask: Mask::none(n_sites),
            amplitude: 0.0,
            frequency: 1.0,
            phase_origin: 0.0,
        }
    }

    pub fn with_phase_origin(mut self, t_ref: f64) -> Self {
        self.phase_origin = t_ref;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(CdtError::invalid("amplitude", format!("must be finite and >= 0, got {amplitude}")));
        }
        self.amplitude = amplitude;
        Ok(self)
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn phase_origin(&self) -> f64 {
        self.phase_origin
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.frequency
    }

    /// Drive ratio `A / w`.
    pub fn ratio(&self) -> f64 {
        self.amplitude / self.frequency
    }

    /// True when the Hamiltonian does not depend on time.
    pub fn is_static(&self) -> bool {
        self.amplitude == 0.0 || self.mask.flags().iter().all(|f| !f)
    }

    /// `A sin(w (t - t_ref))`, the energy of every driven site.
    pub fn modulation(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * (t - self.phase_origin)).sin()
    }

    pub fn onsite_energy(&self, j: usize, t: f64) -> Result<f64> {
        if j >= self.mask.len() {
            return Err(CdtError::SiteOutOfRange { index: j, n_sites: self.mask.len() });
        }
        Ok(if self.mask.is_driven(j) { self.modulation(t) } else { 0.0 })
    }

    pub(crate) fn fill_onsite(&self, t: f64, out: &mut [f64]) {
        let e = self.modulation(t);
        for (o, &driven) in out.iter_mut().zip(self.mask.flags()) {
            *o = if driven { e } else { 0.0 };
        }
    }

    /// `int_{t_ref}^{t} eps_j(s) ds = F_j (A/w) (1 - cos(w (t - t_ref)))`.
    pub fn phase_integral(&self, j: usize, t: f64) -> f64 {
        if self.mask.is_driven(j) {
            self.ratio() * (1.0 - (self.frequency * (t - self.phase_origin)).cos())
        } else {
            0.0
        }
    }

    pub fn check_model(&self, model: &LatticeModel) -> Result<()> {
        if self.mask.len() != model.n_sites() {
            return Err(CdtError::SizeMismatch {
                expected: model.n_sites(),
                actual: self.mask.len(),
            });
        }
        Ok(())
    }
}

/// On-site energy of site `j` at time `t`.
pub fn onsite_energy(drive: &DriveSpec, j: usize, t: f64) -> Result<f64> {
    drive.onsite_energy(j, t)
}

/// Instantaneous Hamiltonian. Real symmetric, returned as a complex matrix.
pub fn hamiltonian_matrix(model: &LatticeModel, drive: &DriveSpec, t: f64) -> Result<DMatrix<C64>> {
    drive.check_model(model)?;
    let n = model.n_sites();
    let mut h = model.coupling_matrix().map(|x| C64::new(x, 0.0));
    for j in 0..n {
        h[(j, j)] = C64::new(drive.onsite_energy(j, t)?, 0.0);
    }
    Ok(h)
}

/// Complex amplitudes `a_j` over the lattice sites.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(DVector<C64>);

impl StateVector {
    /// Validated construction; the norm must be 1 within [`NORM_TOLERANCE`].
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(CdtError::invalid("amplitudes", "empty state"));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(CdtError::invalid("amplitudes", "non-finite amplitude"));
        }
        let state = StateVector(DVector::from_vec(amplitudes));
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(CdtError::invalid("amplitudes", format!("norm {norm} differs from 1")));
        }
        Ok(state)
    }

    /// Particle localized on site `j`.
    pub fn localized(n_sites: usize, j: usize) -> Result<Self> {
        if j >= n_sites {
            return Err(CdtError::SiteOutOfRange { index: j, n_sites });
        }
        let mut v = DVector::from_element(n_sites, C64::new(0.0, 0.0));
        v[j] = C64::new(1.0, 0.0);
        Ok(StateVector(v))
    }

    /// Wraps evolved amplitudes without a norm check; integration drift is
    /// reported separately.
    pub(crate) fn from_evolved(amplitudes: DVector<C64>) -> Self {
        StateVector(amplitudes)
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn conj(&self) -> StateVector {
        StateVector(self.0.map(|a| a.conj()))
    }

    pub fn mirrored(&self) -> StateVector {
        let n = self.0.len();
        StateVector(DVector::from_fn(n, |j, _| self.0[n - 1 - j]))
    }

    /// Largest elementwise modulus of the difference.
    pub fn max_distance(&self, other: &StateVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasePolicy {
    /// One clock for the whole run: `eps(t) = A sin(w (t - t_ref))`.
    #[default]
    GlobalPhase,
    /// The sine restarts at zero phase at the start of every segment.
    ResetPerSegment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub mask: Mask,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Piecewise-constant sequence of masks with fixed drive amplitude and frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    start_time: f64,
    segments: Vec<Segment>,
    amplitude: f64,
    frequency: f64,
    #[serde(default)]
    phase_origin: f64,
    #[serde(default)]
    phase_policy: PhasePolicy,
}

impl Schedule {
    /// Builds a schedule from consecutive `(duration, mask)` pairs starting at `start_time`.
    pub fn from_durations(
        start_time: f64,
        steps: impl IntoIterator<Item = (f64, Mask)>,
        amplitude: f64,
        frequency: f64,
    ) -> Result<Self> {
        let mut t = start_time;
        let mut segments = Vec::new();
        for (duration, mask) in steps {
            let end = t + duration;
            segments.push(Segment { start: t, end, mask });
            t = end;
        }
        Schedule::new(start_time, segments, amplitude, frequency)
    }

    pub fn new(start_time: f64, segments: Vec<Segment>, amplitude: f64, frequency: f64) -> Result<Self> {
        // Reuse the drive's parameter validation.
        DriveSpec::new(Mask::none(0), amplitude, frequency)?;
        let schedule = Schedule {
            start_time,
            segments,
            amplitude,
            frequency,
            phase_origin: 0.0,
            phase_policy: PhasePolicy::GlobalPhase,
        };
        schedule.check_segments()?;
        Ok(schedule)
    }

    fn check_segments(&self) -> Result<()> {
        let mut t = self.start_time;
        for (k, seg) in self.segments.iter().enumerate() {
            if !(seg.start.is_finite() && seg.end.is_finite()) {
                return Err(CdtError::invalid("segments", format!("segment {k} has non-finite bounds")));
            }
            if !(seg.end > seg.start) {
                return Err(CdtError::invalid("segments", format!("segment {k} has non-positive duration")));
            }
            let tol = 1e-12 * (1.0 + t.abs());
            if (seg.start - t).abs() > tol {
                return Err(CdtError::invalid(
                    "segments",
                    format!("segment {k} starts at {} but the previous one ends at {t}", seg.start),
                ));
            }
            if k > 0 && seg.mask.len() != self.segments[0].mask.len() {
                return Err(CdtError::invalid("segments", format!("segment {k} mask length differs")));
            }
            t = seg.end;
        }
        Ok(())
    }

    pub fn with_phase_policy(mut self, policy: PhasePolicy) -> Self {
        self.phase_policy = policy;
        self
    }

    pub fn with_phase_origin(mut self, t_ref: f64) -> Self {
        self.phase_origin = t_ref;
        self
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(self.start_time, |s| s.end)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn phase_policy(&self) -> PhasePolicy {
        self.phase_policy
    }

    /// Time at which each segment's mask is switched on.
    pub fn switch_times(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.start).collect()
    }

    /// The drive in force during segment `k`.
    pub fn drive_for(&self, k: usize) -> Result<DriveSpec> {
        let seg = &self.segments[k];
        let t_ref = match self.phase_policy {
            PhasePolicy::GlobalPhase => self.phase_origin,
            PhasePolicy::ResetPerSegment => seg.start,
        };
        Ok(DriveSpec::new(seg.mask.clone(), self.amplitude, self.frequency)?.with_phase_origin(t_ref))
    }

    pub fn check_model(&self, model: &LatticeModel) -> Result<()> {
        for seg in &self.segments {
            if seg.mask.len() != model.n_sites() {
                return Err(CdtError::SizeMismatch {
                    expected: model.n_sites(),
                    actual: seg.mask.len(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_site() -> LatticeModel {
        LatticeModel::new(3, 1.0, 0.2).unwrap()
    }

    #[test]
    fn onsite_energy_examples() {
        let drive = DriveSpec::new(Mask::from_flags(&[1, 0, 0]).unwrap(), 24.05, 10.0).unwrap();
        assert_eq!(drive.onsite_energy(1, 0.3).unwrap(), 0.0);
        assert!((drive.onsite_energy(0, PI / 20.0).unwrap() - 24.05).abs() < 1e-12);
        let off = DriveSpec::new(Mask::all(3), 0.0, 10.0).unwrap();
        for j in 0..3 {
            assert_eq!(off.onsite_energy(j, 1.234).unwrap(), 0.0);
        }
        assert!(matches!(drive.onsite_energy(3, 0.0), Err(CdtError::SiteOutOfRange { .. })));
    }

    #[test]
    fn static_three_site_matrix() {
        let h = hamiltonian_matrix(&three_site(), &DriveSpec::undriven(3), 0.0).unwrap();
        let expected = [[0.0, 1.0, 0.2], [1.0, 0.0, 1.0], [0.2, 1.0, 0.0]];
        for j in 0..3 {
            for k in 0..3 {
                assert_eq!(h[(j, k)], C64::new(expected[j][k], 0.0));
            }
        }
    }

    #[test]
    fn type_a_matrix_at_quarter_period() {
        let drive = DriveSpec::new(Mask::from_flags(&[1, 0, 0]).unwrap(), 24.05, 10.0).unwrap();
        let h = hamiltonian_matrix(&three_site(), &drive, PI / 20.0).unwrap();
        assert!((h[(0, 0)].re - 24.05).abs() < 1e-12);
        assert_eq!(h[(0, 1)].re, 1.0);
        assert_eq!(h[(0, 2)].re, 0.2);
        assert_eq!(h[(1, 1)].re, 0.0);
        assert_eq!(h[(2, 2)].re, 0.0);
    }

    #[test]
    fn mask_size_mismatch() {
        let drive = DriveSpec::new(Mask::none(4), 1.0, 1.0).unwrap();
        assert!(matches!(
            hamiltonian_matrix(&three_site(), &drive, 0.0),
            Err(CdtError::SizeMismatch { expected: 3, actual: 4 })
        ));
    }

    #[test]
    fn couplings_vanish_beyond_range_two() {
        let m = LatticeModel::new(6, 0.7, 0.3).unwrap().coupling_matrix();
        assert_eq!(m[(0, 3)], 0.0);
        assert_eq!(m[(1, 5)], 0.0);
        assert_eq!(m[(2, 4)], 0.3);
        assert_eq!(m[(4, 5)], 0.7);
    }

    #[test]
    fn rejects_bad_models_and_drives() {
        assert!(LatticeModel::new(1, 1.0, 0.0).is_err());
        assert!(LatticeModel::new(3, f64::NAN, 0.0).is_err());
        assert!(DriveSpec::new(Mask::none(3), -1.0, 1.0).is_err());
        assert!(DriveSpec::new(Mask::none(3), 1.0, 0.0).is_err());
        assert!(Mask::from_flags(&[0, 2]).is_err());
    }

    #[test]
    fn state_norm_is_checked() {
        assert!(StateVector::new(vec![C64::new(1.0, 0.0), C64::new(0.1, 0.0)]).is_err());
        let s = StateVector::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn schedule_rejects_gaps() {
        let seg = |a, b| Segment { start: a, end: b, mask: Mask::none(3) };
        assert!(Schedule::new(0.0, vec![seg(0.0, 1.0), seg(1.5, 2.0)], 1.0, 1.0).is_err());
        assert!(Schedule::new(0.0, vec![seg(0.0, 1.0), seg(1.0, 0.5)], 1.0, 1.0).is_err());
        let s = Schedule::new(0.0, vec![seg(0.0, 1.0), seg(1.0, 2.0)], 1.0, 1.0).unwrap();
        assert_eq!(s.switch_times(), vec![0.0, 1.0]);
        assert_eq!(s.end_time(), 2.0);
    }

    #[test]
    fn reset_policy_moves_phase_origin() {
        let s = Schedule::from_durations(0.0, [(1.0, Mask::all(2)), (2.0, Mask::all(2))], 1.0, 3.0)
            .unwrap()
            .with_phase_policy(PhasePolicy::ResetPerSegment);
        assert_eq!(s.drive_for(1).unwrap().phase_origin(), 1.0);
        let g = s.with_phase_policy(PhasePolicy::GlobalPhase);
        assert_eq!(g.drive_for(1).unwrap().phase_origin(), 0.0);
    }

    #[test]
    fn mask_serde_uses_flags() {
        let m: Mask = serde_json::from_str("[1,0,1]").unwrap();
        assert_eq!(m.driven_sites(), vec![0, 2]);
        assert_eq!(serde_json::to_string(&m).unwrap(), "[1,0,1]");
        assert!(serde_json::from_str::<Mask>("[1,3]").is_err());
    }
}
