//! Fixed-step fourth-order Runge-Kutta integration of `i da/dt = H(t) a`.
//!
//! No renormalization is applied; the largest norm deviation seen during a
//! run is reported as [`Trajectory::norm_drift`].

use std::io::Write;

use nalgebra::DVector;

use crate::error::{CdtError, Result};
use crate::model::{DriveSpec, LatticeModel, Schedule, StateVector, C64};

/// Drive periods per step required by the resolution guard.
pub const MIN_STEPS_PER_PERIOD: f64 = 200.0;

#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<StateVector>,
    populations: Vec<Vec<f64>>,
    norm_drift: f64,
}

impl Trajectory {
    fn start(t0: f64, psi0: &StateVector) -> Self {
        Trajectory {
            times: vec![t0],
            states: vec![psi0.clone()],
            populations: vec![psi0.populations()],
            norm_drift: (psi0.norm_sqr() - 1.0).abs(),
        }
    }

    fn push(&mut self, t: f64, a: &[C64]) {
        let state = StateVector::from_evolved(DVector::from_column_slice(a));
        self.populations.push(state.populations());
        self.states.push(state);
        self.times.push(t);
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    /// One row per sample, one column per site.
    pub fn populations(&self) -> &[Vec<f64>] {
        &self.populations
    }

    pub fn norm_drift(&self) -> f64 {
        self.norm_drift
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_sites(&self) -> usize {
        self.states[0].len()
    }

    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory holds at least the initial sample")
    }

    pub fn final_populations(&self) -> &[f64] {
        self.populations.last().expect("trajectory holds at least the initial sample")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds at least the initial sample")
    }

    /// Population of one site over all samples.
    pub fn site_series(&self, site: usize) -> Vec<f64> {
        self.populations.iter().map(|p| p[site]).collect()
    }

    /// Index of the sample taken at time `t`, if any.
    pub fn sample_at(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * (1.0 + t.abs());
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Population CSV: `t,P_1,...,P_N`.
    pub fn write_population_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.n_sites();
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=n).map(|j| format!("P_{j}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (t, row) in self.times.iter().zip(&self.populations) {
            write!(w, "{t}")?;
            for p in row {
                write!(w, ",{p}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Amplitude CSV: `t,Re_a1,Im_a1,...`.
    pub fn write_amplitude_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.n_sites();
        let mut header = vec!["t".to_string()];
        for j in 1..=n {
            header.push(format!("Re_a{j}"));
            header.push(format!("Im_a{j}"));
        }
        writeln!(w, "{}", header.join(","))?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(w, "{t}")?;
            for a in s.as_slice() {
                write!(w, ",{},{}", a.re, a.im)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Largest step admitted by the resolution guard, or `None` for a static drive.
pub fn resolution_limit(drive: &DriveSpec) -> Option<f64> {
    (drive.amplitude() > 0.0).then(|| drive.period() / MIN_STEPS_PER_PERIOD)
}

fn check_step(drive: &DriveSpec, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(CdtError::invalid("dt", format!("must be positive, got {dt}")));
    }
    if let Some(limit) = resolution_limit(drive) {
        if dt > limit * (1.0 + 1e-12) {
            return Err(CdtError::StepTooCoarse { dt, limit });
        }
    }
    Ok(())
}

/// Number of equal steps covering `span` with steps no longer than `dt`.
pub(crate) fn step_count(span: f64, dt: f64) -> usize {
    ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Scratch space for one RK4 step.
pub(crate) struct Rk4 {
    onsite: Vec<f64>,
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl Rk4 {
    pub(crate) fn new(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Rk4 {
            onsite: vec![0.0; n],
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
        }
    }

    /// `out = -i H(t) a`
    fn rhs(onsite: &mut [f64], model: &LatticeModel, drive: &DriveSpec, t: f64, a: &[C64], out: &mut [C64]) {
        drive.fill_onsite(t, onsite);
        model.apply(onsite, a, out);
        for o in out.iter_mut() {
            *o = C64::new(o.im, -o.re);
        }
    }

    pub(crate) fn step(&mut self, model: &LatticeModel, drive: &DriveSpec, t: f64, h: f64, a: &mut [C64]) {
        let Rk4 { onsite, k, tmp } = self;
        let [k1, k2, k3, k4] = k;
        Self::rhs(onsite, model, drive, t, a, k1);
        for j in 0..a.len() {
            tmp[j] = a[j] + k1[j] * (0.5 * h);
        }
        Self::rhs(onsite, model, drive, t + 0.5 * h, tmp, k2);
        for j in 0..a.len() {
            tmp[j] = a[j] + k2[j] * (0.5 * h);
        }
        Self::rhs(onsite, model, drive, t + 0.5 * h, tmp, k3);
        for j in 0..a.len() {
            tmp[j] = a[j] + k3[j] * h;
        }
        Self::rhs(onsite, model, drive, t + h, tmp, k4);
        for j in 0..a.len() {
            a[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0);
        }
    }
}

/// Integrates `steps` equal steps of length `h` from `t0`, calling `visit`
/// after each step with the step number (1-based), time and amplitudes.
pub(crate) fn integrate_in_place(
    model: &LatticeModel,
    drive: &DriveSpec,
    a: &mut [C64],
    t0: f64,
    h: f64,
    steps: usize,
    mut visit: impl FnMut(usize, f64, &[C64]) -> Result<()>,
) -> Result<()> {
    let mut rk = Rk4::new(a.len());
    for s in 1..=steps {
        let t_start = t0 + (s - 1) as f64 * h;
        rk.step(model, drive, t_start, h, a);
        let t = t0 + s as f64 * h;
        if a.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(CdtError::NonFinite { t });
        }
        visit(s, t, a)?;
    }
    Ok(())
}

fn run_segment(
    model: &LatticeModel,
    drive: &DriveSpec,
    traj: &mut Trajectory,
    a: &mut [C64],
    t0: f64,
    t1: f64,
    dt: f64,
    sample_every: usize,
) -> Result<()> {
    let steps = step_count(t1 - t0, dt);
    let h = (t1 - t0) / steps as f64;
    let mut drift = traj.norm_drift;
    integrate_in_place(model, drive, a, t0, h, steps, |s, t, a| {
        let norm: f64 = a.iter().map(|x| x.norm_sqr()).sum();
        drift = drift.max((norm - 1.0).abs());
        if s % sample_every == 0 || s == steps {
            // The last step lands on t1 exactly.
            let t = if s == steps { t1 } else { t };
            traj.push(t, a);
        }
        Ok(())
    })?;
    traj.norm_drift = drift;
    Ok(())
}

/// Integrates a fixed drive from `t0` to `t1`.
///
/// The span is divided into equal steps no longer than `dt`. A sample is
/// recorded at `t0`, after every `sample_every` steps, and at `t1`.
pub fn evolve(
    model: &LatticeModel,
    drive: &DriveSpec,
    psi0: &StateVector,
    t0: f64,
    t1: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Trajectory> {
    drive.check_model(model)?;
    if psi0.len() != model.n_sites() {
        return Err(CdtError::SizeMismatch { expected: model.n_sites(), actual: psi0.len() });
    }
    if !(t1 > t0) {
        return Err(CdtError::invalid("t1", format!("end time {t1} must exceed start time {t0}")));
    }
    if sample_every == 0 {
        return Err(CdtError::invalid("sample_every", "must be at least 1"));
    }
    check_step(drive, dt)?;
    let mut traj = Trajectory::start(t0, psi0);
    let mut a: Vec<C64> = psi0.as_slice().to_vec();
    run_segment(model, drive, &mut traj, &mut a, t0, t1, dt, sample_every)?;
    Ok(traj)
}

/// Integrates a switching schedule segment by segment.
///
/// The state is continuous across switches. Sampling restarts in every
/// segment, and every segment end (switch time) is sampled.
pub fn evolve_schedule(
    model: &LatticeModel,
    schedule: &Schedule,
    psi0: &StateVector,
    dt: f64,
    sample_every: usize,
) -> Result<Trajectory> {
    schedule.check_model(model)?;
    if psi0.len() != model.n_sites() {
        return Err(CdtError::SizeMismatch { expected: model.n_sites(), actual: psi0.len() });
    }
    if sample_every == 0 {
        return Err(CdtError::invalid("sample_every", "must be at least 1"));
    }
    let drives = (0..schedule.segments().len())
        .map(|k| schedule.drive_for(k))
        .collect::<Result<Vec<_>>>()?;
    for d in &drives {
        check_step(d, dt)?;
    }
    let mut traj = Trajectory::start(schedule.start_time(), psi0);
    let mut a: Vec<C64> = psi0.as_slice().to_vec();
    for (seg, drive) in schedule.segments().iter().zip(&drives) {
        run_segment(model, drive, &mut traj, &mut a, seg.start, seg.end, dt, sample_every)?;
    }
    Ok(traj)
}

/// Site populations `|a_j|^2`.
pub fn populations(psi: &StateVector) -> Vec<f64> {
    psi.populations()
}
