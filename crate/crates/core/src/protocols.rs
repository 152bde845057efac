//! Switching protocols built on selective CDT: the directed-transport motor
//! and the symmetric beam splitter.
//!
//! Both require the drive ratio `A/w` at a zero of `J0`, so that driven and
//! undriven sites decouple and only couplings inside the driven set survive.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::effective::{bessel_j0, splitter_min_time};
use crate::error::{CdtError, Result};
use crate::integrator::{evolve_schedule, Trajectory};
use crate::model::{LatticeModel, Mask, Schedule, StateVector};

/// Largest `|J0(A/w)|` accepted as "at a zero".
pub const J0_ZERO_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    fn step(self) -> isize {
        match self {
            Direction::Left => -1,
            Direction::Right => 1,
        }
    }
}

fn check_cdt_point(amplitude: f64, frequency: f64) -> Result<()> {
    if !(frequency > 0.0) {
        return Err(CdtError::invalid("frequency", "must be positive"));
    }
    let j0 = bessel_j0(amplitude / frequency);
    if j0.abs() > J0_ZERO_TOLERANCE {
        return Err(CdtError::invalid(
            "amplitude",
            format!("A/w = {} is not at a zero of J0 (J0 = {j0:.3e})", amplitude / frequency),
        ));
    }
    Ok(())
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(CdtError::invalid("omega_coupling", "must be positive for a protocol"));
    }
    Ok(())
}

/// Half Rabi period `tau/2 = pi/(2 Omega)` of a decoupled pair.
pub fn half_rabi_period(omega: f64) -> f64 {
    PI / (2.0 * omega)
}

/// Directed transport: during hop `k` the particle's site and its neighbor
/// in `direction` are driven, for half a Rabi period each.
pub fn motor_schedule(
    n_sites: usize,
    start_site: usize,
    direction: Direction,
    n_hops: usize,
    omega: f64,
    amplitude: f64,
    frequency: f64,
) -> Result<Schedule> {
    check_omega(omega)?;
    check_cdt_point(amplitude, frequency)?;
    if start_site >= n_sites {
        return Err(CdtError::SiteOutOfRange { index: start_site, n_sites });
    }
    let end = start_site as isize + direction.step() * n_hops as isize;
    if end < 0 || end >= n_sites as isize {
        return Err(CdtError::invalid(
            "n_hops",
            format!("{n_hops} hops from site {start_site} leave the {n_sites}-site array"),
        ));
    }
    let duration = half_rabi_period(omega);
    let steps = (0..n_hops)
        .map(|k| {
            let current = (start_site as isize + direction.step() * k as isize) as usize;
            let next = (current as isize + direction.step()) as usize;
            Mask::from_sites(n_sites, &[current, next]).map(|m| (duration, m))
        })
        .collect::<Result<Vec<_>>>()?;
    Schedule::from_durations(0.0, steps, amplitude, frequency)
}

/// Beam splitter centered on `center`.
///
/// Stage 0 drives `(c-1, c, c+1)` for `pi/(2 nu)`, the first minimum of the
/// center population. Stage `k >= 1` drives the two outward pairs
/// `(c-k-1, c-k)` and `(c+k, c+k+1)` for `pi/(2 Omega)`, so each packet
/// moves out by one site per stage.
pub fn splitter_schedule(
    n_sites: usize,
    center: usize,
    omega: f64,
    v: f64,
    amplitude: f64,
    frequency: f64,
    n_stages: usize,
) -> Result<Schedule> {
    check_omega(omega)?;
    check_cdt_point(amplitude, frequency)?;
    if !v.is_finite() {
        return Err(CdtError::invalid("v_coupling", "must be finite"));
    }
    let reach = n_stages + 1;
    if center < reach || center + reach >= n_sites {
        return Err(CdtError::invalid(
            "n_stages",
            format!("{n_stages} stages around site {center} leave the {n_sites}-site array"),
        ));
    }
    let mut steps = vec![(splitter_min_time(omega, v), Mask::from_sites(n_sites, &[center - 1, center, center + 1])?)];
    for k in 1..=n_stages {
        let mask = Mask::from_sites(n_sites, &[center - k - 1, center - k, center + k, center + k + 1])?;
        steps.push((half_rabi_period(omega), mask));
    }
    Schedule::from_durations(0.0, steps, amplitude, frequency)
}

/// Summed final-time population over `targets`, clipped to `[0, 1]`.
pub fn transport_fidelity(traj: &Trajectory, targets: &[usize]) -> f64 {
    let last = traj.final_populations();
    targets.iter().map(|&j| last[j]).sum::<f64>().clamp(0.0, 1.0)
}

#[derive(Clone, Debug)]
pub struct ProtocolReport {
    pub trajectory: Trajectory,
    pub target_fidelity: f64,
    pub switch_times: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportSummary {
    pub switch_times: Vec<f64>,
    pub target_fidelity: f64,
    pub norm_drift: f64,
}

impl ProtocolReport {
    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            switch_times: self.switch_times.clone(),
            target_fidelity: self.target_fidelity,
            norm_drift: self.trajectory.norm_drift(),
        }
    }
}

/// Runs `schedule` from `psi0` and scores the final populations on `targets`.
pub fn run_protocol(
    model: &LatticeModel,
    schedule: &Schedule,
    psi0: &StateVector,
    targets: &[usize],
    dt: f64,
    sample_every: usize,
) -> Result<ProtocolReport> {
    for &t in targets {
        model.check_site(t)?;
    }
    let trajectory = evolve_schedule(model, schedule, psi0, dt, sample_every)?;
    Ok(ProtocolReport {
        target_fidelity: transport_fidelity(&trajectory, targets),
        switch_times: schedule.switch_times(),
        trajectory,
    })
}

fn outside(pops: &[f64], mask: &Mask) -> f64 {
    pops.iter().enumerate().filter(|(j, _)| !mask.is_driven(*j)).map(|(_, p)| p).sum()
}

/// Per segment: net growth of the population outside the driven sites,
/// end of segment minus start.
pub fn segment_leakage(traj: &Trajectory, schedule: &Schedule) -> Vec<f64> {
    schedule
        .segments()
        .iter()
        .map(|seg| match (traj.sample_at(seg.start), traj.sample_at(seg.end)) {
            (Some(a), Some(b)) => outside(&traj.populations()[b], &seg.mask) - outside(&traj.populations()[a], &seg.mask),
            _ => f64::NAN,
        })
        .collect()
}

/// Per segment: the largest excursion of the outside population above its
/// start value at any sample inside the segment. This includes the
/// micromotion at the drive frequency, which is reversible.
pub fn segment_peak_excursion(traj: &Trajectory, schedule: &Schedule) -> Vec<f64> {
    schedule
        .segments()
        .iter()
        .map(|seg| {
            let tol = 1e-9 * (1.0 + seg.end.abs());
            let rows: Vec<&Vec<f64>> = traj
                .times()
                .iter()
                .zip(traj.populations())
                .filter(|(t, _)| **t >= seg.start - tol && **t <= seg.end + tol)
                .map(|(_, p)| p)
                .collect();
            let Some(first) = rows.first() else { return 0.0 };
            let base = outside(first, &seg.mask);
            rows.iter().map(|p| outside(p, &seg.mask) - base).fold(0.0, f64::max)
        })
        .collect()
}

/// Per motor hop: population on the destination site at the end of the
/// segment divided by the population on the source site at its start.
pub fn hop_fidelities(traj: &Trajectory, schedule: &Schedule, direction: Direction) -> Vec<f64> {
    schedule
        .segments()
        .iter()
        .filter_map(|seg| {
            let sites = seg.mask.driven_sites();
            let (src, dst) = match direction {
                Direction::Right => (*sites.first()?, *sites.last()?),
                Direction::Left => (*sites.last()?, *sites.first()?),
            };
            let start = traj.sample_at(seg.start)?;
            let end = traj.sample_at(seg.end)?;
            Some(traj.populations()[end][dst] / traj.populations()[start][src])
        })
        .collect()
}
