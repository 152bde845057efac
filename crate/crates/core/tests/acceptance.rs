//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p cdt-core --test acceptance`. Tolerances are fixed
//! here and must not be loosened to make a criterion pass.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use cdt_core::effective::{bessel_j0, j0_roots, to_rotating_frame, EffectiveModel};
use cdt_core::floquet::{self, FloquetOptions};
use cdt_core::integrator::evolve;
use cdt_core::protocols::{self, Direction};
use cdt_core::waveguide::{self, Grid, Propagation, PropagationOptions, WaveguideArray};
use cdt_core::{DriveSpec, LatticeModel, Mask, StateVector};

const OMEGA: f64 = 1.0;
const V: f64 = 0.2;
const W: f64 = 10.0;
const A: f64 = 24.05;
const STEPS_PER_PERIOD: f64 = 2000.0;

const WG_SPACING: f64 = 3.2;
const WG_WIDTH: f64 = 0.3;
const WG_CONTRAST: f64 = 2.78;
const WG_DEPTH: f64 = 0.4;

fn wg_frequency() -> f64 {
    3.45 * 2.0 * PI / 100.0
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn dt() -> f64 {
    2.0 * PI / W / STEPS_PER_PERIOD
}

fn model3() -> LatticeModel {
    LatticeModel::new(3, OMEGA, V).unwrap()
}

fn drive3(flags: &[u8], amplitude: f64) -> DriveSpec {
    DriveSpec::new(Mask::from_flags(flags).unwrap(), amplitude, W).unwrap()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn criterion_1() -> Outcome {
    let (traj, elapsed) = timed(|| {
        evolve(&model3(), &drive3(&[1, 0, 0], A), &StateVector::localized(3, 0).unwrap(), 0.0, 10.0 * PI, dt(), 1).unwrap()
    });
    let min_p1 = traj.site_series(0).into_iter().fold(1.0, f64::min);
    check(
        min_p1 >= 0.95 && elapsed < Duration::from_secs(1),
        format!("min P1 over [0,10pi] = {min_p1:.5} (>= 0.95); runtime {:.3}s (< 1s)", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let traj =
        evolve(&model3(), &drive3(&[1, 0, 0], A), &StateVector::localized(3, 1).unwrap(), 0.0, 2.0 * PI, dt(), 1).unwrap();
    let dev = traj
        .times()
        .iter()
        .zip(traj.populations())
        .map(|(t, p)| (p[1] - t.cos().powi(2)).abs())
        .fold(0.0, f64::max);
    let max_p1 = traj.site_series(0).into_iter().fold(0.0, f64::max);
    check(
        dev <= 0.05 && max_p1 <= 0.02,
        format!("max |P2 - cos^2 t| = {dev:.5} (<= 0.05); max P1 = {max_p1:.5} (<= 0.02)"),
    )
}

fn criterion_3() -> Outcome {
    let model = model3();
    let opts = FloquetOptions::default();
    let (res, elapsed) = timed(|| {
        let ratios = floquet::ratio_grid(0.0, 6.0, 600);
        let a = floquet::quasienergy_scan(&model, &Mask::from_flags(&[1, 0, 0]).unwrap(), W, &ratios, &opts).unwrap();
        let b = floquet::quasienergy_scan(&model, &Mask::from_flags(&[0, 1, 1]).unwrap(), W, &ratios, &opts).unwrap();
        let at_root = floquet::analyze(&model, &drive3(&[1, 0, 0], 2.405 * W), &opts).unwrap();
        (a, b, at_root)
    });
    let (a, b, at_root) = res;
    let root_err = at_root
        .quasienergies
        .iter()
        .zip([-1.0, 0.0, 1.0])
        .map(|(e, want)| (e - want).abs())
        .fold(0.0, f64::max);
    let ab = a
        .rows
        .iter()
        .zip(&b.rows)
        .flat_map(|(ra, rb)| ra.sorted().into_iter().zip(rb.sorted()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    let static_exact = [0.1 - 2.01f64.sqrt(), -0.2, 0.1 + 2.01f64.sqrt()];
    let row0 = a.rows[0].sorted();
    let static_err = row0.iter().zip(static_exact).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let literal_err = row0.iter().zip([-1.31775, -0.2, 1.51775]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    check(
        a.rows.len() == 600 && root_err <= 0.05 && ab <= 1e-3 && static_err <= 1e-6 && elapsed < Duration::from_secs(5),
        format!(
            "quasienergies at 2.405 off {{-1,0,1}} by {root_err:.4} (<= 0.05); type-(a) vs type-(b) max diff {ab:.2e} \
             over {} points (<= 1e-3); A/w=0 row vs static spectrum 0.1-+sqrt(2.01), -0.2: {static_err:.1e} (<= 1e-6; \
             vs 5-decimal literals {literal_err:.1e}); runtime {:.3}s (< 5s)",
            a.rows.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let root = j0_roots(1)[0];
    let res = floquet::analyze(&model3(), &drive3(&[1, 0, 0], root * W), &FloquetOptions::default()).unwrap();
    let p = &res.site_probabilities;
    let localized: Vec<usize> = (0..3).filter(|&k| p[(0, k)] >= 0.99).collect();
    let others: Vec<f64> = (0..3).filter(|k| !localized.contains(k)).map(|k| (p[(1, k)] - p[(2, k)]).abs()).collect();
    let worst = others.iter().cloned().fold(0.0, f64::max);
    check(
        localized.len() == 1 && others.len() == 2 && worst <= 0.02,
        format!(
            "modes with P1 >= 0.99: {} (want 1, P1 = {:.5}); other modes max |P2 - P3| = {worst:.2e} (<= 0.02)",
            localized.len(),
            localized.first().map_or(f64::NAN, |&k| p[(0, k)])
        ),
    )
}

fn criterion_5() -> Outcome {
    let model = model3();
    let period = 2.0 * PI / W;
    let mut worst = 0.0_f64;
    let mut per_mask = Vec::new();
    for mask in Mask::enumerate(3) {
        let drive = DriveSpec::new(mask.clone(), A, W).unwrap();
        let eff = EffectiveModel::from_drive(&model, &drive).unwrap();
        let mut mask_worst = 0.0_f64;
        for start in 0..3 {
            let psi0 = StateVector::localized(3, start).unwrap();
            let mut psi = psi0.clone();
            for m in 1..=20 {
                let t0 = (m - 1) as f64 * period;
                let t1 = m as f64 * period;
                psi = evolve(&model, &drive, &psi, t0, t1, dt(), 1000).unwrap().final_state().clone();
                let full = to_rotating_frame(&drive, &psi, t1);
                let reduced = eff.evolve(&psi0, t1).unwrap();
                mask_worst = mask_worst.max(full.max_distance(&reduced));
            }
        }
        per_mask.push(format!("{:?}={mask_worst:.4}", mask));
        worst = worst.max(mask_worst);
    }
    check(
        worst <= 0.1,
        format!("stroboscopic amplitude sup-norm over 20 periods, all localized starts: max {worst:.4} (<= 0.1); {}", per_mask.join(" ")),
    )
}

fn criterion_6() -> Outcome {
    let model = LatticeModel::new(11, OMEGA, V).unwrap();
    let ((report, schedule), elapsed) = timed(|| {
        let schedule = protocols::motor_schedule(11, 0, Direction::Right, 10, OMEGA, A, W).unwrap();
        let report =
            protocols::run_protocol(&model, &schedule, &StateVector::localized(11, 0).unwrap(), &[10], dt(), 10).unwrap();
        (report, schedule)
    });
    let leak = protocols::segment_leakage(&report.trajectory, &schedule).into_iter().fold(f64::MIN, f64::max);
    let peak = protocols::segment_peak_excursion(&report.trajectory, &schedule).into_iter().fold(0.0, f64::max);
    let hop = protocols::hop_fidelities(&report.trajectory, &schedule, Direction::Right).into_iter().fold(f64::MAX, f64::min);
    check(
        report.target_fidelity >= 0.8 && leak <= 0.02 && elapsed < Duration::from_secs(2),
        format!(
            "final P11 = {:.5} (>= 0.8); max per-segment leakage (net) = {leak:.2e} (<= 0.02); runtime {:.3}s (< 2s); \
             info: min hop fidelity {hop:.5}, max in-segment excursion {peak:.4}",
            report.target_fidelity,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Outcome {
    let n = 11;
    let model = LatticeModel::new(n, OMEGA, V).unwrap();
    let schedule = protocols::splitter_schedule(n, 5, OMEGA, V, A, W, 4).unwrap();
    let report = protocols::run_protocol(&model, &schedule, &StateVector::localized(n, 5).unwrap(), &[0, 10], dt(), 1).unwrap();
    let traj = &report.trajectory;
    let asym = traj
        .populations()
        .iter()
        .flat_map(|p| (0..n).map(move |j| (p[j] - p[n - 1 - j]).abs()))
        .fold(0.0, f64::max);
    let last = traj.final_populations();
    let k0 = traj.sample_at(schedule.segments()[0].end).unwrap();
    let center = traj.populations()[k0][5];
    check(
        asym <= 1e-10 && last[0] >= 0.35 && last[10] >= 0.35 && center <= 0.01,
        format!(
            "max |P_j - P_(N+1-j)| = {asym:.1e} (<= 1e-10); final P1 = {:.5}, P11 = {:.5} (>= 0.35 each); \
             center after stage 0 = {center:.5} (<= 0.01)",
            last[0], last[10]
        ),
    )
}

fn criterion_8() -> Outcome {
    let model = model3();
    let period = 2.0 * PI / W;
    let drift_at = |steps: f64| {
        [[1u8, 0, 0], [1, 1, 1], [0, 1, 0]]
            .iter()
            .map(|m| {
                evolve(&model, &drive3(m, A), &StateVector::localized(3, 0).unwrap(), 0.0, 100.0 * period, period / steps, 1000)
                    .unwrap()
                    .norm_drift()
            })
            .fold(0.0, f64::max)
    };
    let drift = drift_at(STEPS_PER_PERIOD);
    let coarse = drift_at(200.0);
    let unitarity = Mask::enumerate(3)
        .into_iter()
        .map(|mask| {
            let u = floquet::monodromy(&model, &DriveSpec::new(mask, A, W).unwrap()).unwrap();
            floquet::unitarity_deviation(&u)
        })
        .fold(0.0, f64::max);
    let roots = j0_roots(2);
    let root_err = (roots[0] - 2.404825557695773).abs().max((roots[1] - 5.520078110286311).abs());
    check(
        drift <= 1e-8 && unitarity <= 1e-8 && root_err <= 1e-9 && bessel_j0(roots[0]).abs() < 1e-12,
        format!(
            "norm drift over 100 periods at dt = T/2000: {drift:.2e} (<= 1e-8; info: {coarse:.2e} at the T/200 guard); \
             monodromy unitarity {unitarity:.2e} (<= 1e-8); J0 roots off by {root_err:.1e} (<= 1e-9)"
        ),
    )
}

fn wg_array(flags: &[u8]) -> WaveguideArray {
    let depth = if flags.iter().any(|&f| f != 0) { WG_DEPTH } else { 0.0 };
    WaveguideArray::new(1, WG_SPACING, WG_WIDTH, WG_CONTRAST, depth, wg_frequency(), Mask::from_flags(flags).unwrap())
        .unwrap()
}

fn beat_length() -> f64 {
    let c = waveguide::extract_couplings(&wg_array(&[0, 0, 0])).unwrap();
    PI / (2.0 * c.omega)
}

/// Propagates the Wannier mode of guide `input` (list position) for one beat length.
fn wg_run(flags: &[u8], input: usize, beat: f64) -> Propagation {
    let array = wg_array(flags);
    let grid = Grid::for_array(&array, beat).unwrap();
    let mode = waveguide::wannier_mode_on(&array, input, &grid).unwrap();
    waveguide::propagate(&array, &mode.to_field(), &grid, &PropagationOptions::default()).unwrap()
}

fn criterion_9() -> Outcome {
    let beat = beat_length();
    let (runs, elapsed) = timed(|| {
        (
            wg_run(&[0, 0, 1], 2, beat),
            wg_run(&[1, 0, 1], 1, beat),
            wg_run(&[1, 0, 1], 0, beat),
        )
    });
    let (type_i, middle, outer) = runs;
    let kept_i = type_i.guide_series(2).into_iter().fold(1.0, f64::min);
    let kept_mid = middle.guide_series(1).into_iter().fold(1.0, f64::min);
    let leak_mid = outer.guide_series(1).into_iter().fold(0.0, f64::max);
    check(
        kept_i >= 0.8 && kept_mid >= 0.8 && leak_mid <= 0.15,
        format!(
            "beat length {beat:.3}; type-(i) F_1=1 modulated-guide input keeps min {kept_i:.4} (>= 0.8); \
             type-(ii) middle input keeps min {kept_mid:.4} (>= 0.8); type-(ii) outer input middle max {leak_mid:.4} \
             (<= 0.15); runtime {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_10() -> Outcome {
    let beat = beat_length();
    let couplings = waveguide::extract_couplings(&wg_array(&[0, 0, 0])).unwrap();
    let a_ratio = waveguide::effective_drive_amplitude(&wg_array(&[1, 1, 1])).unwrap() / wg_frequency();
    let mut worst = 0.0_f64;
    let mut cases = Vec::new();
    for mask in Mask::enumerate(3) {
        let flags = mask.as_u8();
        let array = wg_array(&flags);
        let (model, drive) = waveguide::reduced_model(&array, couplings).unwrap();
        let limit = (drive.period() / STEPS_PER_PERIOD).min(0.05);
        for input in 0..3 {
            let prop = wg_run(&flags, input, beat);
            let mut psi = StateVector::localized(3, input).unwrap();
            let mut sup = 0.0_f64;
            for r in 1..prop.z.len() {
                psi = evolve(&model, &drive, &psi, prop.z[r - 1], prop.z[r], limit, 1000).unwrap().final_state().clone();
                for (p, q) in prop.modal_powers[r].iter().zip(psi.populations()) {
                    sup = sup.max((p - q).abs());
                }
            }
            if sup > 0.15 {
                cases.push(format!("{flags:?}/input {}: {sup:.4}", input + 1));
            }
            worst = worst.max(sup);
        }
    }
    let a_ok = (a_ratio - 2.405).abs() <= 0.1 * 2.405;
    check(
        worst <= 0.15 && a_ok,
        format!(
            "PDE vs reduced lattice (Omega_ext {:.5}, v_ext {:.2e}) max modal sup-norm {worst:.4} (<= 0.15){}; \
             A_eff/w = {a_ratio:.4} (2.405 +- 10%)",
            couplings.omega,
            couplings.v,
            if cases.is_empty() { String::new() } else { format!(", over limit: {}", cases.join(", ")) }
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("CDT freezing", criterion_1),
        ("selective Rabi", criterion_2),
        ("quasienergy structure", criterion_3),
        ("Floquet localization", criterion_4),
        ("effective-model oracle", criterion_5),
        ("quantum motor", criterion_6),
        ("beam splitter", criterion_7),
        ("numerics hygiene", criterion_8),
        ("waveguide CDT", criterion_9),
        ("discrete/continuum consistency", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome { pass: false, detail: format!("panicked: {msg}") }
        });
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {}",
            i + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
