//! Small dense helpers shared by the Fock engine.

use nalgebra::{Complex, DMatrix};

pub type C64 = Complex<f64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Relative accuracy targeted by [`expm`].
pub const EXPM_TOLERANCE: f64 = 1e-12;

/// Matrix exponential by scaling and squaring with a Taylor core.
///
/// The input is scaled by 2^-s so that its 1-norm is at most 1/4, the Taylor
/// series is summed until the next term falls below 1e-18 relative to the
/// partial sum, and the result is squared s times. For the anti-Hermitian
/// generators used here this gives ‖e^A - expm(A)‖ ≤ [`EXPM_TOLERANCE`].
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.map(|z| z / 2f64.powi(squarings));

    let mut result = DMatrix::<C64>::identity(n, n);
    let mut term = DMatrix::<C64>::identity(n, n);
    for k in 1..60 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        result += &term;
        if max_abs(&term) <= 1e-18 * max_abs(&result).max(1.0) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

pub fn one_norm(a: &DMatrix<C64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &DMatrix<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix (the anti-Hermitian part is ignored).
pub fn hermitian_eigenvalues(a: &DMatrix<C64>) -> Vec<f64> {
    let h = (a + a.adjoint()) / C64::new(2.0, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// ‖U†U − I‖ in the max norm.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - DMatrix::<C64>::identity(n, n)))
}
