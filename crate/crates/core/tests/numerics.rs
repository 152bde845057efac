use std::f64::consts::PI;

use cdt_core::floquet::{monodromy, monodromy_with_steps, unitarity_deviation};
use cdt_core::integrator::evolve;
use cdt_core::{DriveSpec, LatticeModel, Mask, StateVector};

const W: f64 = 10.0;

fn setup() -> (LatticeModel, DriveSpec) {
    let model = LatticeModel::new(3, 1.0, 0.2).unwrap();
    let drive = DriveSpec::new(Mask::from_flags(&[1, 0, 0]).unwrap(), 24.05, W).unwrap();
    (model, drive)
}

/// State at `t = 1`, away from the stroboscopic times where errors partly cancel.
fn final_state(steps: f64) -> StateVector {
    let (model, drive) = setup();
    let psi0 = StateVector::localized(3, 0).unwrap();
    evolve(&model, &drive, &psi0, 0.0, 1.0, 1.0 / steps, 100_000)
        .unwrap()
        .final_state()
        .clone()
}

#[test]
fn rk4_is_fourth_order() {
    let reference = final_state(12800.0);
    let coarse = final_state(400.0).max_distance(&reference);
    let fine = final_state(800.0).max_distance(&reference);
    let ratio = coarse / fine;
    assert!((12.0..20.0).contains(&ratio), "error ratio {ratio} (coarse {coarse:e}, fine {fine:e})");
}

#[test]
fn norm_drift_shrinks_with_step() {
    let (model, drive) = setup();
    let period = 2.0 * PI / W;
    let psi0 = StateVector::localized(3, 1).unwrap();
    let drift = |steps: f64| {
        evolve(&model, &drive, &psi0, 0.0, 100.0 * period, period / steps, 1000).unwrap().norm_drift()
    };
    let coarse = drift(200.0);
    let fine = drift(2000.0);
    assert!(fine <= 1e-8, "drift {fine:e}");
    assert!(coarse > fine);
}

#[test]
fn monodromy_is_unitary_for_all_masks() {
    let model = LatticeModel::new(3, 1.0, 0.2).unwrap();
    for mask in Mask::enumerate(3) {
        let drive = DriveSpec::new(mask, 24.05, W).unwrap();
        assert!(unitarity_deviation(&monodromy(&model, &drive).unwrap()) <= 1e-8);
    }
}

#[test]
fn monodromy_converges_in_steps() {
    let (model, drive) = setup();
    let u1 = monodromy_with_steps(&model, &drive, 4000).unwrap();
    let u2 = monodromy_with_steps(&model, &drive, 8000).unwrap();
    assert!((u1 - u2).camax() < 1e-9);
}

#[test]
fn step_guard_rejects_coarse_steps() {
    let (model, drive) = setup();
    let psi0 = StateVector::localized(3, 0).unwrap();
    let period = 2.0 * PI / W;
    assert!(evolve(&model, &drive, &psi0, 0.0, period, period / 100.0, 1).is_err());
    assert!(evolve(&model, &drive, &psi0, 0.0, period, period / 200.0, 1).is_ok());
}
