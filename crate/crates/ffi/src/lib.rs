//! C ABI over `cdt-core`.
//!
//! Objects cross the boundary as opaque handles created by `cdt_*_new` or a
//! run function and released with the matching `cdt_*_free`. Every fallible
//! call returns a [`CdtStatus`]; on failure a message is kept per thread and
//! can be read with [`cdt_last_error_message`]. Panics are caught and
//! reported as [`CdtStatus::Panic`].
//!
//! Array getters take `(buf, capacity, out_len)`: `out_len` always receives
//! the required length, and a null `buf` or short `capacity` returns
//! [`CdtStatus::BufferTooSmall`] without writing. Site indices are zero-based.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cdt_core::floquet::{self, FloquetOptions, FloquetResult, DEFAULT_STEPS_PER_PERIOD};
use cdt_core::integrator::evolve;
use cdt_core::protocols::{self, Direction};
use cdt_core::waveguide::{self, WaveguideArray};
use cdt_core::{CdtError, DriveSpec, LatticeModel, Mask, StateVector, Trajectory};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CdtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalGuard = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CdtDirection {
    Left = 0,
    Right = 1,
}

pub struct CdtModel(LatticeModel);
pub struct CdtDrive(DriveSpec);
pub struct CdtTrajectory(Trajectory);
pub struct CdtFloquet(FloquetResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: CdtStatus, msg: impl Into<String>) -> CdtStatus {
    set_error(msg);
    status
}

fn from_core(err: CdtError) -> CdtStatus {
    let status = if err.is_numerical() { CdtStatus::NumericalGuard } else { CdtStatus::InvalidArgument };
    fail(status, err.to_string())
}

/// Runs `f`, converting errors and panics into a status.
fn guard<F>(f: F) -> CdtStatus
where
    F: FnOnce() -> Result<(), CdtStatus>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CdtStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(CdtStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, CdtStatus> {
    p.as_ref().ok_or_else(|| fail(CdtStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, CdtStatus> {
    p.as_mut().ok_or_else(|| fail(CdtStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, capacity: usize, out_len: *mut usize) -> Result<(), CdtStatus> {
    *out(out_len, "out_len")? = src.len();
    if buf.is_null() || capacity < src.len() {
        return Err(fail(
            CdtStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL; 0 if there is none.
#[no_mangle]
pub extern "C" fn cdt_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |s| s.as_bytes().len()))
}

/// Copies the last error message (NUL-terminated, truncated to fit) into
/// `buf`. Returns the number of bytes written excluding the NUL.
#[no_mangle]
pub unsafe extern "C" fn cdt_last_error_message(buf: *mut c_char, capacity: usize) -> usize {
    if buf.is_null() || capacity == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |s| s.as_bytes());
        let n = bytes.len().min(capacity - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
        *buf.add(n) = 0;
        n
    })
}

/// Zeroth-order Bessel function of the first kind.
#[no_mangle]
pub extern "C" fn cdt_bessel_j0(x: f64) -> f64 {
    catch_unwind(|| cdt_core::effective::bessel_j0(x)).unwrap_or(f64::NAN)
}

/// The first `n` positive zeros of `J0`, written to `buf` (capacity `n`).
#[no_mangle]
pub unsafe extern "C" fn cdt_j0_roots(n: usize, buf: *mut f64) -> CdtStatus {
    guard(|| {
        if buf.is_null() {
            return Err(fail(CdtStatus::NullPointer, "`buf` is null"));
        }
        let roots = cdt_core::effective::j0_roots(n);
        ptr::copy_nonoverlapping(roots.as_ptr(), buf, n);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cdt_model_new(n_sites: usize, omega: f64, v: f64, out_model: *mut *mut CdtModel) -> CdtStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let model = LatticeModel::new(n_sites, omega, v).map_err(from_core)?;
        *slot = boxed(CdtModel(model));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cdt_model_free(model: *mut CdtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Drive `A sin(w t)` on the sites whose `mask` byte is nonzero.
#[no_mangle]
pub unsafe extern "C" fn cdt_drive_new(
    mask: *const u8,
    n_sites: usize,
    amplitude: f64,
    frequency: f64,
    out_drive: *mut *mut CdtDrive,
) -> CdtStatus {
    guard(|| {
        let slot = out(out_drive, "out_drive")?;
        if mask.is_null() {
            return Err(fail(CdtStatus::NullPointer, "`mask` is null"));
        }
        let flags = std::slice::from_raw_parts(mask, n_sites).iter().map(|&b| b != 0).collect();
        let drive = DriveSpec::new(Mask::new(flags), amplitude, frequency).map_err(from_core)?;
        *slot = boxed(CdtDrive(drive));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cdt_drive_free(drive: *mut CdtDrive) {
    if !drive.is_null() {
        drop(Box::from_raw(drive));
    }
}

/// Evolves a particle starting on `initial_site` from `t0` to `t1`.
#[no_mangle]
pub unsafe extern "C" fn cdt_evolve(
    model: *const CdtModel,
    drive: *const CdtDrive,
    initial_site: usize,
    t0: f64,
    t1: f64,
    dt: f64,
    sample_every: usize,
    out_traj: *mut *mut CdtTrajectory,
) -> CdtStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let drive = &deref(drive, "drive")?.0;
        let slot = out(out_traj, "out_traj")?;
        let psi0 = StateVector::localized(model.n_sites(), initial_site).map_err(from_core)?;
        let traj = evolve(model, drive, &psi0, t0, t1, dt, sample_every).map_err(from_core)?;
        *slot = boxed(CdtTrajectory(traj));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cdt_trajectory_free(traj: *mut CdtTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of samples; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn cdt_trajectory_len(traj: *const CdtTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn cdt_trajectory_n_sites(traj: *const CdtTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.n_sites())
}

/// Largest deviation of the norm from 1; NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn cdt_trajectory_norm_drift(traj: *const CdtTrajectory) -> f64 {
    traj.as_ref().map_or(f64::NAN, |t| t.0.norm_drift())
}

#[no_mangle]
pub unsafe extern "C" fn cdt_trajectory_times(
    traj: *const CdtTrajectory,
    buf: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> CdtStatus {
    guard(|| copy_out(deref(traj, "traj")?.0.times(), buf, capacity, out_len))
}

/// Populations, row-major: `len` rows of `n_sites`.
#[no_mangle]
pub unsafe extern "C" fn cdt_trajectory_populations(
    traj: *const CdtTrajectory,
    buf: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> CdtStatus {
    guard(|| {
        let flat: Vec<f64> = deref(traj, "traj")?.0.populations().iter().flatten().copied().collect();
        copy_out(&flat, buf, capacity, out_len)
    })
}

/// Final amplitudes as interleaved `(re, im)` pairs.
#[no_mangle]
pub unsafe extern "C" fn cdt_trajectory_final_amplitudes(
    traj: *const CdtTrajectory,
    buf: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> CdtStatus {
    guard(|| {
        let flat: Vec<f64> = deref(traj, "traj")?.0.final_state().as_slice().iter().flat_map(|a| [a.re, a.im]).collect();
        copy_out(&flat, buf, capacity, out_len)
    })
}

/// Floquet analysis over one period; `steps_per_period = 0` uses the default.
#[no_mangle]
pub unsafe extern "C" fn cdt_floquet_analyze(
    model: *const CdtModel,
    drive: *const CdtDrive,
    steps_per_period: usize,
    out_floquet: *mut *mut CdtFloquet,
) -> CdtStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let drive = &deref(drive, "drive")?.0;
        let slot = out(out_floquet, "out_floquet")?;
        let opts = FloquetOptions {
            steps_per_period: if steps_per_period == 0 { DEFAULT_STEPS_PER_PERIOD } else { steps_per_period },
            ..Default::default()
        };
        let res = floquet::analyze(model, drive, &opts).map_err(from_core)?;
        *slot = boxed(CdtFloquet(res));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cdt_floquet_free(f: *mut CdtFloquet) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

#[no_mangle]
pub unsafe extern "C" fn cdt_floquet_n_modes(f: *const CdtFloquet) -> usize {
    f.as_ref().map_or(0, |f| f.0.quasienergies.len())
}

/// Quasienergies in ascending order, folded into `(-w/2, w/2]`.
#[no_mangle]
pub unsafe extern "C" fn cdt_floquet_quasienergies(
    f: *const CdtFloquet,
    buf: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> CdtStatus {
    guard(|| copy_out(&deref(f, "floquet")?.0.quasienergies, buf, capacity, out_len))
}

/// Site probabilities, row-major by mode: entry `k * n + j` is mode `k` on site `j`.
#[no_mangle]
pub unsafe extern "C" fn cdt_floquet_site_probabilities(
    f: *const CdtFloquet,
    buf: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> CdtStatus {
    guard(|| {
        // nalgebra storage is column-major, so columns (modes) come out contiguous.
        let p = &deref(f, "floquet")?.0.site_probabilities;
        copy_out(p.as_slice(), buf, capacity, out_len)
    })
}

/// Runs the directed-transport protocol from `start_site` and reports the
/// final population on the destination site.
#[no_mangle]
pub unsafe extern "C" fn cdt_motor_run(
    model: *const CdtModel,
    start_site: usize,
    direction: CdtDirection,
    n_hops: usize,
    amplitude: f64,
    frequency: f64,
    dt: f64,
    out_traj: *mut *mut CdtTrajectory,
    out_fidelity: *mut f64,
) -> CdtStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let slot = out(out_traj, "out_traj")?;
        let fid = out(out_fidelity, "out_fidelity")?;
        let dir = match direction {
            CdtDirection::Left => Direction::Left,
            CdtDirection::Right => Direction::Right,
        };
        let schedule = protocols::motor_schedule(
            model.n_sites(),
            start_site,
            dir,
            n_hops,
            model.omega_coupling(),
            amplitude,
            frequency,
        )
        .map_err(from_core)?;
        let target = match dir {
            Direction::Right => start_site + n_hops,
            Direction::Left => start_site - n_hops,
        };
        let psi0 = StateVector::localized(model.n_sites(), start_site).map_err(from_core)?;
        let report = protocols::run_protocol(model, &schedule, &psi0, &[target], dt, 10).map_err(from_core)?;
        *fid = report.target_fidelity;
        *slot = boxed(CdtTrajectory(report.trajectory));
        Ok(())
    })
}

/// Runs the beam splitter around `center` and reports the summed final
/// population on the two edge sites `center -+ (n_stages + 1)`.
#[no_mangle]
pub unsafe extern "C" fn cdt_splitter_run(
    model: *const CdtModel,
    center: usize,
    n_stages: usize,
    amplitude: f64,
    frequency: f64,
    dt: f64,
    out_traj: *mut *mut CdtTrajectory,
    out_fidelity: *mut f64,
) -> CdtStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let slot = out(out_traj, "out_traj")?;
        let fid = out(out_fidelity, "out_fidelity")?;
        let schedule = protocols::splitter_schedule(
            model.n_sites(),
            center,
            model.omega_coupling(),
            model.v_coupling(),
            amplitude,
            frequency,
            n_stages,
        )
        .map_err(from_core)?;
        let edges = [center - n_stages - 1, center + n_stages + 1];
        let psi0 = StateVector::localized(model.n_sites(), center).map_err(from_core)?;
        let report = protocols::run_protocol(model, &schedule, &psi0, &edges, dt, 10).map_err(from_core)?;
        *fid = report.target_fidelity;
        *slot = boxed(CdtTrajectory(report.trajectory));
        Ok(())
    })
}

/// Nearest and next-nearest couplings of an unmodulated array of
/// super-Gaussian guides, by eigen-splitting at the default grid step.
#[no_mangle]
pub unsafe extern "C" fn cdt_extract_couplings(
    spacing: f64,
    width: f64,
    contrast: f64,
    out_omega: *mut f64,
    out_v: *mut f64,
) -> CdtStatus {
    guard(|| {
        let o = out(out_omega, "out_omega")?;
        let v = out(out_v, "out_v")?;
        let array = WaveguideArray::new(1, spacing, width, contrast, 0.0, 0.0, Mask::none(3)).map_err(from_core)?;
        let c = waveguide::extract_couplings(&array).map_err(from_core)?;
        *o = c.omega;
        *v = c.v;
        Ok(())
    })
}
