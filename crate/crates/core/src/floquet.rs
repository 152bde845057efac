//! One-period propagator, quasienergies and Floquet modes.
//!
//! The monodromy matrix `U(T)` is assembled column by column with the RK4
//! integrator, starting at the drive's phase origin (where the sine
//! vanishes). Since `U` is unitary, and therefore normal, its complex Schur
//! vectors are its eigenvectors.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CdtError, Result};
use crate::integrator::{integrate_in_place, MIN_STEPS_PER_PERIOD};
use crate::model::{DriveSpec, LatticeModel, Mask, C64};

pub const DEFAULT_STEPS_PER_PERIOD: usize = 4000;
pub const UNITARITY_TOLERANCE: f64 = 1e-8;
/// Eigenvalues of `U` closer than this are flagged as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSampling {
    /// Site probabilities of the monodromy eigenvectors at the period start.
    #[default]
    PeriodStart,
    /// Site probabilities averaged over one period of the co-moving mode.
    PeriodAveraged,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloquetOptions {
    pub steps_per_period: usize,
    pub sampling: ModeSampling,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        FloquetOptions {
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
            sampling: ModeSampling::PeriodStart,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FloquetResult {
    /// Ascending, folded into `(-w/2, w/2]`.
    pub quasienergies: Vec<f64>,
    /// Column `k` is the mode belonging to `quasienergies[k]`.
    pub modes: DMatrix<C64>,
    /// Entry `(j, k)` is the probability of mode `k` on site `j`.
    pub site_probabilities: DMatrix<f64>,
    pub period: f64,
    /// Set when two eigenvalues of `U` coincide; the modes of such an
    /// eigenspace are an arbitrary orthonormal basis.
    pub degenerate: bool,
}

/// Folds a quasienergy into `(-w/2, w/2]`.
pub fn fold_quasienergy(eps: f64, frequency: f64) -> f64 {
    let half = 0.5 * frequency;
    let k = ((eps + half) / frequency).ceil() - 1.0;
    let folded = eps - k * frequency;
    // Guard the endpoints against rounding in the subtraction.
    if folded <= -half {
        folded + frequency
    } else if folded > half {
        folded - frequency
    } else {
        folded
    }
}

/// `max_row_sum |U^dagger U - I|`
pub fn unitarity_deviation(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    let g = u.adjoint() * u - DMatrix::<C64>::identity(n, n);
    g.row_iter().map(|r| r.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Propagator over one drive period, starting at the drive's phase origin.
pub fn monodromy(model: &LatticeModel, drive: &DriveSpec) -> Result<DMatrix<C64>> {
    monodromy_with_steps(model, drive, DEFAULT_STEPS_PER_PERIOD)
}

pub fn monodromy_with_steps(model: &LatticeModel, drive: &DriveSpec, steps_per_period: usize) -> Result<DMatrix<C64>> {
    drive.check_model(model)?;
    if (steps_per_period as f64) < MIN_STEPS_PER_PERIOD {
        return Err(CdtError::invalid(
            "steps_per_period",
            format!("need at least {MIN_STEPS_PER_PERIOD} steps per period, got {steps_per_period}"),
        ));
    }
    let n = model.n_sites();
    let period = drive.period();
    let h = period / steps_per_period as f64;
    let t0 = drive.phase_origin();
    let mut u = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let mut a = vec![C64::new(0.0, 0.0); n];
        a[k] = C64::new(1.0, 0.0);
        integrate_in_place(model, drive, &mut a, t0, h, steps_per_period, |_, _, _| Ok(()))?;
        u.set_column(k, &DVector::from_vec(a));
    }
    let deviation = unitarity_deviation(&u);
    if !(deviation <= UNITARITY_TOLERANCE) {
        return Err(CdtError::NotUnitary { deviation });
    }
    Ok(u)
}

struct Eigen {
    quasienergies: Vec<f64>,
    modes: DMatrix<C64>,
    degenerate: bool,
}

fn decompose(u: &DMatrix<C64>, period: f64, frequency: f64) -> Result<Eigen> {
    if !u.is_square() {
        return Err(CdtError::SizeMismatch { expected: u.nrows(), actual: u.ncols() });
    }
    let deviation = unitarity_deviation(u);
    if !(deviation <= UNITARITY_TOLERANCE) {
        return Err(CdtError::NotUnitary { deviation });
    }
    let n = u.nrows();
    let (q, t) = Schur::new(u.clone()).unpack();
    let lambdas: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
    let mut order: Vec<(f64, usize)> = lambdas
        .iter()
        .enumerate()
        .map(|(k, l)| (fold_quasienergy(-l.arg() / period, frequency), k))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut degenerate = false;
    for a in 0..n {
        for b in a + 1..n {
            if (lambdas[a] - lambdas[b]).norm() < DEGENERACY_TOLERANCE {
                degenerate = true;
            }
        }
    }

    let mut modes = DMatrix::<C64>::zeros(n, n);
    for (col, &(_, k)) in order.iter().enumerate() {
        let mut v = q.column(k).into_owned();
        // Fix the gauge: largest component real and positive.
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (j, x)| if x.norm() > acc.1 { (j, x.norm()) } else { acc });
        let phase = v[imax].conj() / v[imax].norm();
        v *= phase;
        let norm = v.norm();
        modes.set_column(col, &(v / C64::new(norm, 0.0)));
    }
    Ok(Eigen {
        quasienergies: order.iter().map(|&(e, _)| e).collect(),
        modes,
        degenerate,
    })
}

/// Quasienergies `eps_k` with `lambda_k = exp(-i eps_k T)`, folded and ascending.
pub fn quasienergies(u: &DMatrix<C64>, period: f64, frequency: f64) -> Result<Vec<f64>> {
    Ok(decompose(u, period, frequency)?.quasienergies)
}

fn probabilities(modes: &DMatrix<C64>) -> DMatrix<f64> {
    modes.map(|x| x.norm_sqr())
}

/// Eigenvectors of `U` (period start) with their site probabilities.
pub fn floquet_modes(u: &DMatrix<C64>, period: f64, frequency: f64) -> Result<FloquetResult> {
    let eig = decompose(u, period, frequency)?;
    Ok(FloquetResult {
        site_probabilities: probabilities(&eig.modes),
        quasienergies: eig.quasienergies,
        modes: eig.modes,
        period,
        degenerate: eig.degenerate,
    })
}

/// Monodromy, quasienergies and modes in one call.
pub fn analyze(model: &LatticeModel, drive: &DriveSpec, options: &FloquetOptions) -> Result<FloquetResult> {
    let u = monodromy_with_steps(model, drive, options.steps_per_period)?;
    let mut result = floquet_modes(&u, drive.period(), drive.frequency())?;
    if options.sampling == ModeSampling::PeriodAveraged {
        result.site_probabilities = period_averaged_probabilities(model, drive, &result.modes, options.steps_per_period)?;
    }
    Ok(result)
}

/// Site probabilities of each mode averaged over one period.
///
/// A Floquet state's populations are periodic, so the average over the
/// uniformly spaced step ends of one period is exact up to quadrature error.
pub fn period_averaged_probabilities(
    model: &LatticeModel,
    drive: &DriveSpec,
    modes: &DMatrix<C64>,
    steps_per_period: usize,
) -> Result<DMatrix<f64>> {
    let n = model.n_sites();
    let h = drive.period() / steps_per_period as f64;
    let mut out = DMatrix::<f64>::zeros(n, modes.ncols());
    for k in 0..modes.ncols() {
        let mut a: Vec<C64> = modes.column(k).iter().copied().collect();
        let mut acc = vec![0.0; n];
        integrate_in_place(model, drive, &mut a, drive.phase_origin(), h, steps_per_period, |_, _, a| {
            for (s, x) in acc.iter_mut().zip(a) {
                *s += x.norm_sqr();
            }
            Ok(())
        })?;
        for j in 0..n {
            out[(j, k)] = acc[j] / steps_per_period as f64;
        }
    }
    Ok(out)
}

/// Assigns current modes to previous branches by largest overlap.
///
/// Returns `p` with branch `k` continuing as current column `p[k]`. Pairs are
/// taken greedily in order of decreasing `|<prev_k|cur_l>|^2`, so the result
/// is always a permutation.
pub fn match_branches(previous: &DMatrix<C64>, current: &DMatrix<C64>) -> Vec<usize> {
    let n = previous.ncols();
    let overlap = previous.adjoint() * current;
    let mut pairs: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|k| (0..n).map(move |l| (k, l)))
        .map(|(k, l)| (overlap[(k, l)].norm_sqr(), k, l))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assignment = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for (_, k, l) in pairs {
        if assignment[k] == usize::MAX && !taken[l] {
            assignment[k] = l;
            taken[l] = true;
        }
    }
    assignment
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub ratio: f64,
    /// Branch-ordered quasienergies.
    pub quasienergies: Vec<f64>,
}

impl ScanRow {
    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.quasienergies.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

#[derive(Clone, Debug, Default)]
pub struct QuasienergyScan {
    pub rows: Vec<ScanRow>,
}

impl QuasienergyScan {
    /// Scan CSV: `ratio,eps_1,...,eps_N`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.rows.first().map_or(0, |r| r.quasienergies.len());
        let header: Vec<String> = std::iter::once("ratio".to_string())
            .chain((1..=n).map(|k| format!("eps_{k}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for row in &self.rows {
            write!(w, "{}", row.ratio)?;
            for e in &row.quasienergies {
                write!(w, ",{e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Mode CSV: `mode_index,P_1,...,P_N`, one row per mode.
pub fn write_mode_csv<W: Write>(result: &FloquetResult, mut w: W) -> std::io::Result<()> {
    let n = result.site_probabilities.nrows();
    let header: Vec<String> = std::iter::once("mode_index".to_string())
        .chain((1..=n).map(|j| format!("P_{j}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for k in 0..result.site_probabilities.ncols() {
        write!(w, "{}", k + 1)?;
        for j in 0..n {
            write!(w, ",{}", result.site_probabilities[(j, k)])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// `count` evenly spaced ratios from `lo` to `hi` inclusive.
pub fn ratio_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Quasienergies over a grid of drive ratios `A/w` at fixed `w`.
///
/// Grid points are computed in parallel on the current rayon pool; the
/// first row is ordered ascending and later rows follow their branches by
/// mode overlap with the previous row.
pub fn quasienergy_scan(
    model: &LatticeModel,
    mask: &Mask,
    frequency: f64,
    ratios: &[f64],
    options: &FloquetOptions,
) -> Result<QuasienergyScan> {
    if ratios.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(CdtError::invalid("ratio_grid", "must be sorted ascending"));
    }
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(CdtError::invalid("ratio_grid", "ratios must be finite and >= 0"));
    }
    let period = 2.0 * PI / frequency;
    let points: Vec<Eigen> = ratios
        .par_iter()
        .map(|&ratio| {
            let drive = DriveSpec::new(mask.clone(), ratio * frequency, frequency)?;
            let u = monodromy_with_steps(model, &drive, options.steps_per_period)?;
            decompose(&u, period, frequency)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(points.len());
    let mut carried: Option<DMatrix<C64>> = None;
    for (point, &ratio) in points.iter().zip(ratios) {
        let perm = match &carried {
            None => (0..point.quasienergies.len()).collect(),
            Some(prev) => match_branches(prev, &point.modes),
        };
        let mut next = point.modes.clone();
        for (k, &l) in perm.iter().enumerate() {
            next.set_column(k, &point.modes.column(l));
        }
        rows.push(ScanRow {
            ratio,
            quasienergies: perm.iter().map(|&l| point.quasienergies[l]).collect(),
        });
        carried = Some(next);
    }
    Ok(QuasienergyScan { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::j0_roots;
    use nalgebra::SymmetricEigen;

    fn three_site() -> LatticeModel {
        LatticeModel::new(3, 1.0, 0.2).unwrap()
    }

    #[test]
    fn folding_interval_is_half_open() {
        let w = 10.0;
        assert_eq!(fold_quasienergy(5.0, w), 5.0);
        assert_eq!(fold_quasienergy(-5.0, w), 5.0);
        assert!((fold_quasienergy(7.0, w) + 3.0).abs() < 1e-12);
        assert!((fold_quasienergy(-13.0, w) + 3.0).abs() < 1e-12);
        assert_eq!(fold_quasienergy(0.0, w), 0.0);
    }

    #[test]
    fn static_monodromy_matches_exponential() {
        let model = three_site();
        let drive = DriveSpec::undriven(3);
        let drive = DriveSpec::new(drive.mask().clone(), 0.0, 10.0).unwrap();
        let u = monodromy(&model, &drive).unwrap();
        let period = drive.period();
        let eig = SymmetricEigen::new(model.coupling_matrix());
        let v = eig.eigenvectors.map(|x| C64::new(x, 0.0));
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * period)));
        let exact = &v * d * v.adjoint();
        assert!((u - exact).iter().map(|x| x.norm()).fold(0.0, f64::max) < 1e-10);
    }

    #[test]
    fn static_spectrum() {
        let model = three_site();
        let drive = DriveSpec::new(Mask::none(3), 0.0, 10.0).unwrap();
        let u = monodromy(&model, &drive).unwrap();
        let q = quasienergies(&u, drive.period(), 10.0).unwrap();
        // Roots of l^2 - v l - 2 = 0 and l = -v.
        let s = (0.04f64 + 8.0).sqrt();
        let expected = [(0.2 - s) / 2.0, -0.2, (0.2 + s) / 2.0];
        for (got, want) in q.iter().zip(expected) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!((expected[0] + 1.31775).abs() < 1e-5 && (expected[2] - 1.51775).abs() < 1e-5);
    }

    #[test]
    fn static_modes_are_static_eigenvectors() {
        let model = three_site();
        let drive = DriveSpec::new(Mask::none(3), 0.0, 10.0).unwrap();
        let result = analyze(&model, &drive, &FloquetOptions::default()).unwrap();
        let eig = SymmetricEigen::new(model.coupling_matrix());
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        for (col, &k) in order.iter().enumerate() {
            let overlap: C64 = (0..3).map(|j| result.modes[(j, col)].conj() * eig.eigenvectors[(j, k)]).sum();
            assert!((overlap.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cdt_quasienergies_and_modes() {
        let model = three_site();
        let drive = DriveSpec::new(Mask::from_flags(&[1, 0, 0]).unwrap(), 24.05, 10.0).unwrap();
        let u = monodromy(&model, &drive).unwrap();
        let det = u.determinant().norm();
        assert!((det - 1.0).abs() < 1e-8);
        let result = floquet_modes(&u, drive.period(), 10.0).unwrap();
        for (got, want) in result.quasienergies.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 0.05, "{got} vs {want}");
        }
        for k in 0..3 {
            let col_sum: f64 = result.site_probabilities.column(k).sum();
            assert!((col_sum - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_non_unitary_input() {
        let u = DMatrix::<C64>::identity(2, 2) * C64::new(1.1, 0.0);
        assert!(matches!(quasienergies(&u, 1.0, 1.0), Err(CdtError::NotUnitary { .. })));
    }

    #[test]
    fn rejects_too_few_steps() {
        let drive = DriveSpec::new(Mask::none(3), 0.0, 10.0).unwrap();
        assert!(monodromy_with_steps(&three_site(), &drive, 100).is_err());
    }

    #[test]
    fn degenerate_spectrum_is_flagged() {
        let u = DMatrix::<C64>::identity(3, 3);
        let result = floquet_modes(&u, 1.0, 2.0 * PI).unwrap();
        assert!(result.degenerate);
        for k in 0..3 {
            assert!((result.site_probabilities.column(k).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scan_first_row_is_static_spectrum() {
        let model = three_site();
        let scan = quasienergy_scan(&model, &Mask::from_flags(&[1, 0, 0]).unwrap(), 10.0, &[0.0, 0.01, 0.02], &FloquetOptions::default())
            .unwrap();
        let s = (0.04f64 + 8.0).sqrt();
        let first = scan.rows[0].sorted();
        assert!((first[0] - (0.2 - s) / 2.0).abs() < 1e-9);
        assert!((first[1] + 0.2).abs() < 1e-9);
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("ratio,eps_1,eps_2,eps_3\n0,"));
    }

    #[test]
    fn scan_rejects_unsorted_grid() {
        let model = three_site();
        let err = quasienergy_scan(&model, &Mask::none(3), 10.0, &[1.0, 0.5], &FloquetOptions::default());
        assert!(err.is_err());
    }

    #[test]
    fn period_averaged_localized_mode() {
        let model = three_site();
        let ratio = j0_roots(1)[0];
        let drive = DriveSpec::new(Mask::from_flags(&[1, 0, 0]).unwrap(), ratio * 10.0, 10.0).unwrap();
        let options = FloquetOptions { sampling: ModeSampling::PeriodAveraged, ..Default::default() };
        let result = analyze(&model, &drive, &options).unwrap();
        let best = (0..3).map(|k| result.site_probabilities[(0, k)]).fold(0.0, f64::max);
        assert!(best > 0.98);
        for k in 0..3 {
            assert!((result.site_probabilities.column(k).sum() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn mode_csv_layout() {
        let u = DMatrix::<C64>::identity(2, 2);
        let result = floquet_modes(&u, 1.0, 2.0 * PI).unwrap();
        let mut buf = Vec::new();
        write_mode_csv(&result, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mode_index,P_1,P_2\n1,"));
        assert_eq!(text.lines().count(), 3);
    }
}
