//! Small dense complex linear algebra layer.
//!
//! Matrices are `ndarray::Array2<Complex64>` so products route through the
//! packed gemm backend. The only factorization needed anywhere is a Hermitian
//! positive definite solve for the LMMSE detector; a blocked Cholesky keeps
//! most of those flops inside gemm as well.

use crate::error::Error;
use crate::Complex64;
use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

/// Dense complex matrix used for channel operators and transforms.
pub type CMat = Array2<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Column count of the Cholesky panel; trailing updates run through gemm.
const CHOL_BLOCK: usize = 48;

pub fn identity(n: usize) -> CMat {
    let mut m = CMat::zeros((n, n));
    for i in 0..n {
        m[[i, i]] = ONE;
    }
    m
}

pub fn frobenius(m: &ArrayView2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius_owned(m: &CMat) -> f64 {
    frobenius(&m.view())
}

/// `a * b` through the gemm backend.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    let mut c = CMat::zeros((a.nrows(), b.ncols()));
    general_mat_mul(ONE, a, b, ZERO, &mut c);
    c
}

/// `a^H` as an owned standard-layout matrix.
pub fn adjoint(a: &CMat) -> CMat {
    let mut out = CMat::zeros((a.ncols(), a.nrows()));
    for (i, row) in a.axis_iter(Axis(0)).enumerate() {
        for (j, z) in row.iter().enumerate() {
            out[[j, i]] = z.conj();
        }
    }
    out
}

pub fn matvec(m: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    let vv = ArrayView1::from(v);
    m.dot(&vv).to_vec()
}

/// In-place lower Cholesky of a Hermitian positive definite matrix.
///
/// On success the lower triangle of `g` (diagonal included, real) holds `L`
/// with `g = L L^H`; the strict upper triangle is left untouched. Fails with
/// [`Error::Singular`] on a non-positive or non-finite pivot, in which case
/// `g` is partially overwritten and must be rebuilt by the caller.
pub fn cholesky_in_place(g: &mut CMat) -> Result<(), Error> {
    let n = g.nrows();
    if g.ncols() != n {
        return Err(Error::Dimension {
            what: "cholesky: square matrix",
            expected: n,
            got: g.ncols(),
        });
    }
    let mut k0 = 0;
    while k0 < n {
        let k1 = (k0 + CHOL_BLOCK).min(n);

        // Diagonal block, unblocked. Contributions of columns < k0 are
        // already folded in by earlier trailing updates.
        for j in k0..k1 {
            let mut d = g[[j, j]].re;
            for t in k0..j {
                d -= g[[j, t]].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Singular);
            }
            let d = d.sqrt();
            g[[j, j]] = Complex64::new(d, 0.0);
            for i in (j + 1)..k1 {
                let mut acc = g[[i, j]];
                for t in k0..j {
                    let prod = g[[i, t]] * g[[j, t]].conj();
                    acc -= prod;
                }
                g[[i, j]] = acc / d;
            }
        }

        // Panel below the diagonal block: solve X * L11^H = A21 row by row.
        for r in k1..n {
            for j in k0..k1 {
                let mut acc = g[[r, j]];
                for t in k0..j {
                    let prod = g[[r, t]] * g[[j, t]].conj();
                    acc -= prod;
                }
                g[[r, j]] = acc / g[[j, j]].re;
            }
        }

        // Trailing update G22 -= L21 L21^H through gemm. The whole square is
        // updated; only the lower triangle is read afterwards.
        if k1 < n {
            let panel = g.slice(ndarray::s![k1..n, k0..k1]).to_owned();
            let panel_h = adjoint(&panel);
            let mut trailing = g.slice_mut(ndarray::s![k1..n, k1..n]);
            general_mat_mul(-ONE, &panel, &panel_h, ONE, &mut trailing);
        }
        k0 = k1;
    }
    Ok(())
}

/// Solves `L L^H x = b` given the factor produced by [`cholesky_in_place`].
pub fn cholesky_solve(l: &CMat, b: &[Complex64]) -> Vec<Complex64> {
    let n = l.nrows();
    debug_assert_eq!(b.len(), n);
    let mut z = b.to_vec();
    // Forward: L z = b.
    for i in 0..n {
        let mut acc = z[i];
        for j in 0..i {
            let prod = l[[i, j]] * z[j];
            acc -= prod;
        }
        z[i] = acc / l[[i, i]].re;
    }
    // Backward: L^H x = z.
    for i in (0..n).rev() {
        let mut acc = z[i];
        for j in (i + 1)..n {
            let prod = l[[j, i]].conj() * z[j];
            acc -= prod;
        }
        z[i] = acc / l[[i, i]].re;
    }
    z
}

/// Frobenius-norm distance `‖a − b‖`.
pub fn frobenius_diff(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Mean squared magnitude of a sample slice.
pub fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64
}

pub fn vec_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
