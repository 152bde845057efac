//! Symmetric tridiagonal eigenvalues (Sturm bisection), lowest-mode inverse
//! iteration, and the Thomas solver used by both the eigensolver and the
//! Crank-Nicolson stepper.

use std::ops::{Div, Mul, Sub};

/// Symmetric tridiagonal matrix with a constant off-diagonal.
#[derive(Clone, Debug)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: f64,
}

impl SymTridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let e2 = self.off * self.off;
        let mut count = 0;
        let mut q = 1.0;
        for (i, &d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - x } else { d - x - e2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (d.abs() + x.abs() + self.off.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().fold(f64::INFINITY, |m, &d| m.min(d - r));
        let hi = self.diag.iter().fold(f64::NEG_INFINITY, |m, &d| m.max(d + r));
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (zero-based), by bisection on the Sturm count.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        assert!(k < self.len(), "eigenvalue index {k} out of range");
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Eigenvector of the lowest eigenvalue, unit Euclidean norm, positive sum.
    ///
    /// Inverse iteration with a shift just below the eigenvalue keeps the
    /// shifted matrix positive definite, so the unpivoted solve is stable.
    pub fn lowest_eigenvector(&self, lowest: f64) -> Vec<f64> {
        let n = self.len();
        let shift = lowest - 1e-10 * (1.0 + lowest.abs());
        let diag: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let off = vec![self.off; n];
        let mut x = vec![1.0; n];
        for _ in 0..4 {
            x = solve_tridiagonal(&off, &diag, &off, &x);
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
        }
        if x.iter().sum::<f64>() < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        x
    }
}

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
///
/// `lower[0]` and `upper[n-1]` are ignored. No pivoting: callers supply
/// matrices that are diagonally dominant or have a positive definite
/// Hermitian part.
pub fn solve_tridiagonal<T>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Vec<T>
where
    T: Copy + Sub<Output = T> + Mul<Output = T> + Div<Output = T>,
{
    let n = diag.len();
    let mut c = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    c.push(upper[0] / diag[0]);
    d.push(rhs[0] / diag[0]);
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c.push(upper[i] / m);
        d.push((rhs[i] - lower[i] * d[i - 1]) / m);
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        let next = x[i + 1];
        x[i] = x[i] - c[i] * next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn free_particle_spectrum() {
        // -1/2 d^2/dx^2 on n interior points with Dirichlet ends:
        // eigenvalues (1 - cos(k pi/(n+1))) / dx^2.
        let n = 50;
        let dx = 0.1;
        let t = SymTridiagonal { diag: vec![1.0 / (dx * dx); n], off: -0.5 / (dx * dx) };
        for k in 0..5 {
            let exact = (1.0 - ((k + 1) as f64 * PI / (n + 1) as f64).cos()) / (dx * dx);
            assert!((t.eigenvalue(k) - exact).abs() < 1e-10, "k = {k}");
        }
        assert_eq!(t.count_below(-1.0), 0);
        assert_eq!(t.count_below(1e9), n);
    }

    #[test]
    fn lowest_vector_is_eigenvector() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + 0.01 * ((i as f64) - 20.0).powi(2)).collect();
        let t = SymTridiagonal { diag, off: -1.0 };
        let l = t.eigenvalue(0);
        let v = t.lowest_eigenvector(l);
        let tv = t.apply(&v);
        let resid = tv.iter().zip(&v).map(|(a, b)| (a - l * b).abs()).fold(0.0, f64::max);
        assert!(resid < 1e-10);
        assert!(v.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn thomas_solves_complex_system() {
        use crate::model::C64;
        let n = 6;
        let lower = vec![C64::new(0.3, -0.1); n];
        let upper = vec![C64::new(0.3, -0.1); n];
        let diag = vec![C64::new(1.0, 2.0); n];
        let x: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let rhs: Vec<C64> = (0..n)
            .map(|i| {
                let mut y = diag[i] * x[i];
                if i > 0 {
                    y += lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    y += upper[i] * x[i + 1];
                }
                y
            })
            .collect();
        let got = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        for (a, b) in got.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
