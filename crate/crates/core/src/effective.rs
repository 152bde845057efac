//! High-frequency effective model.
//!
//! In the frame `a_j = b_j exp(-i int eps_j dt)` and keeping only the
//! zeroth Bessel harmonic, every coupling between a driven and an undriven
//! site is multiplied by `J0(A/w)` and every other coupling is unchanged.
//! This module evaluates `J0`, its zeros, the static effective matrix and
//! exact propagation under it, plus the closed-form three-site splitter.

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CdtError, Result};
use crate::model::{DriveSpec, LatticeModel, Mask, StateVector, C64};

/// Below this the power series is used.
const SERIES_LIMIT: f64 = 8.0;
/// At and above this the Hankel asymptotic expansion is used; in between,
/// Miller's backward recurrence.
const ASYMPTOTIC_LIMIT: f64 = 25.0;

fn j0_series(x: f64) -> f64 {
    // sum_k (-1)^k (x/2)^(2k) / (k!)^2
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > 2.0 {
            break;
        }
        k += 1.0;
    }
    sum
}

fn j0_miller(x: f64) -> f64 {
    // Backward recurrence J_{k-1} = (2k/x) J_k - J_{k+1} from an even start
    // well above x, normalized by J0 + 2 sum J_{2k} = 1.
    let mut start = (x + 30.0 + 4.0 * x.sqrt()) as usize;
    start += start % 2;
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut norm = 0.0;
    let mut k = start;
    while k > 0 {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        k -= 1;
        // `cur` now holds J_k.
        if k.is_multiple_of(2) && k > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
        }
    }
    cur / (norm + cur)
}

fn j0_asymptotic(x: f64) -> f64 {
    // J0(x) = sqrt(2/(pi x)) (P cos chi - Q sin chi), chi = x - pi/4, with
    // t_k = prod_{m=1..k} (2m-1)^2 / (k! (8x)^k):
    // P = t_0 - t_2 + t_4 ..., Q = -t_1 + t_3 ...
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let m = (2 * k - 1) as f64;
        term *= m * m / (k as f64 * 8.0 * x);
        if term > prev || term < 1e-18 {
            break;
        }
        prev = term;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q -= sign * term;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_LIMIT {
        j0_series(x)
    } else if x < ASYMPTOTIC_LIMIT {
        j0_miller(x)
    } else {
        j0_asymptotic(x)
    }
}

/// The first `n` positive zeros of `J0`, ascending.
///
/// Each zero is bracketed around the McMahon estimate `b + 1/(8b)`,
/// `b = (k - 1/4) pi`, and refined by bisection to full precision.
pub fn j0_roots(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| {
            let b = (k as f64 - 0.25) * PI;
            let guess = b + 1.0 / (8.0 * b);
            let (mut lo, mut hi) = (guess - 0.3, guess + 0.3);
            let mut f_lo = bessel_j0(lo);
            debug_assert!(f_lo * bessel_j0(hi) < 0.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let f_mid = bessel_j0(mid);
                if f_mid == 0.0 {
                    return mid;
                }
                if (f_mid < 0.0) == (f_lo < 0.0) {
                    lo = mid;
                    f_lo = f_mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Static coupling matrix of the averaged dynamics.
#[derive(Clone, Debug)]
pub struct EffectiveModel {
    pub matrix: DMatrix<f64>,
    pub j0_value: f64,
}

/// Rescales every coupling between a driven and an undriven site by `J0(A/w)`.
pub fn effective_hamiltonian(model: &LatticeModel, mask: &Mask, amplitude: f64, frequency: f64) -> Result<EffectiveModel> {
    if mask.len() != model.n_sites() {
        return Err(CdtError::SizeMismatch { expected: model.n_sites(), actual: mask.len() });
    }
    if !(frequency > 0.0) {
        return Err(CdtError::invalid("frequency", "must be positive"));
    }
    let j0_value = bessel_j0(amplitude / frequency);
    let n = model.n_sites();
    let matrix = DMatrix::from_fn(n, n, |j, k| {
        let c = model.coupling(j, k);
        if mask.is_driven(j) == mask.is_driven(k) {
            c
        } else {
            c * j0_value
        }
    });
    Ok(EffectiveModel { matrix, j0_value })
}

impl EffectiveModel {
    pub fn from_drive(model: &LatticeModel, drive: &DriveSpec) -> Result<Self> {
        effective_hamiltonian(model, drive.mask(), drive.amplitude(), drive.frequency())
    }

    /// Eigenvalues, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `exp(-i M t) psi0` via the spectral decomposition of `M`.
    pub fn evolve(&self, psi0: &StateVector, t: f64) -> Result<StateVector> {
        let n = self.matrix.nrows();
        if psi0.len() != n {
            return Err(CdtError::SizeMismatch { expected: n, actual: psi0.len() });
        }
        let eig = SymmetricEigen::new(self.matrix.clone());
        let vecs = eig.eigenvectors.map(|x| C64::new(x, 0.0));
        let coeffs = vecs.adjoint() * psi0.amplitudes();
        let phased = DVector::from_fn(n, |k, _| coeffs[k] * C64::from_polar(1.0, -eig.eigenvalues[k] * t));
        Ok(StateVector::from_evolved(vecs * phased))
    }
}

pub fn evolve_effective(eff: &EffectiveModel, psi0: &StateVector, t: f64) -> Result<StateVector> {
    eff.evolve(psi0, t)
}

/// Maps lab-frame amplitudes to the rotating frame, `b_j = a_j exp(+i int_{t_ref}^t eps_j)`.
pub fn to_rotating_frame(drive: &DriveSpec, psi: &StateVector, t: f64) -> StateVector {
    let b = DVector::from_fn(psi.len(), |j, _| psi.amplitudes()[j] * C64::from_polar(1.0, drive.phase_integral(j, t)));
    StateVector::from_evolved(b)
}

/// `nu = sqrt(v^2/4 + 2 Omega^2)`, the half splitting of the symmetric sector.
pub fn splitter_frequency(omega: f64, v: f64) -> f64 {
    (0.25 * v * v + 2.0 * omega * omega).sqrt()
}

/// First time at which the center population of the undriven triple is minimal, `pi / (2 nu)`.
pub fn splitter_min_time(omega: f64, v: f64) -> f64 {
    PI / (2.0 * splitter_frequency(omega, v))
}

/// Closed-form amplitudes of the undriven three-site system started on the middle site.
///
/// The particle only occupies the symmetric sector `{(|1>+|3>)/sqrt2, |2>}`,
/// where the Hamiltonian is `v/2 + nu (n . sigma)`.
pub fn splitter_oracle(omega: f64, v: f64, t: f64) -> [C64; 3] {
    let nu = splitter_frequency(omega, v);
    let global = C64::from_polar(1.0, -0.5 * v * t);
    let (s, c) = (nu * t).sin_cos();
    let middle = global * C64::new(c, 0.5 * v / nu * s);
    let edge = global * C64::new(0.0, -omega / nu * s);
    [edge, middle, edge]
}
