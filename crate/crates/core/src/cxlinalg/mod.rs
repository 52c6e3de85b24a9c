//! Dense complex linear algebra used by every other module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Vectorization follows the
//! column-major convention, so `vec(X)[j * rows + i] == X[(i, j)]`, which is
//! exactly nalgebra's storage order.

mod random;
mod schur;
mod sylvester;

pub use random::{rng_for, sample_complex_gaussian, standard_cn, GaussianSampler};
pub use schur::{complex_schur, Schur};
pub use sylvester::{schur_form, solve_sylvester, solve_sylvester_kron, SylvesterOperator};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Tolerance used by [`is_hermitian`], relative to `max(1, ‖A‖_max)`.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Builds a matrix from row-major entries, rejecting NaN/Inf.
pub fn from_rows(rows: usize, cols: usize, entries: &[C64]) -> Result<CMat> {
    if entries.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "{} entries supplied for a {rows}x{cols} matrix",
            entries.len()
        )));
    }
    let m = CMat::from_row_slice(rows, cols, entries);
    check_finite(&m)?;
    Ok(m)
}

/// Builds a real-valued complex matrix from row-major entries.
pub fn from_real_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<CMat> {
    let c: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
    from_rows(rows, cols, &c)
}

pub fn check_finite(m: &CMat) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub fn check_square(m: &CMat) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn scaled_identity(n: usize, s: f64) -> CMat {
    CMat::from_diagonal_element(n, n, C64::new(s, 0.0))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn hadamard(a: &CMat, b: &CMat) -> CMat {
    a.component_mul(b)
}

/// `vec(X)` as an `(rows*cols) x 1` matrix.
pub fn vec_of(x: &CMat) -> CMat {
    CMat::from_column_slice(x.len(), 1, x.as_slice())
}

/// Inverse of [`vec_of`].
pub fn unvec(v: &CMat, rows: usize, cols: usize) -> Result<CMat> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "cannot reshape {} entries into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(CMat::from_column_slice(rows, cols, v.as_slice()))
}

/// Diagonal matrix carrying the diagonal of `x`.
pub fn ddiag(x: &CMat) -> Result<CMat> {
    check_square(x)?;
    Ok(CMat::from_diagonal(&x.diagonal()))
}

pub fn diag_of(x: &CMat) -> Result<CVec> {
    check_square(x)?;
    Ok(x.diagonal())
}

pub fn diag_make(v: &CVec) -> CMat {
    CMat::from_diagonal(v)
}

pub fn diag_make_real(v: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(
        v.len(),
        v.iter().map(|&x| C64::new(x, 0.0)),
    ))
}

/// Block-diagonal matrix with the given blocks in order.
pub fn blkdiag(blocks: &[CMat]) -> CMat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Partial trace over `nb x nb` inner blocks: `out[i,j] = Σ_n Z[i·nb+n, j·nb+n]`.
pub fn block_trace(z: &CMat, nb: usize) -> Result<CMat> {
    if nb == 0 || z.nrows() % nb != 0 || z.ncols() % nb != 0 {
        return Err(Error::Dimension(format!(
            "{}x{} matrix is not partitioned by {nb}x{nb} blocks",
            z.nrows(),
            z.ncols()
        )));
    }
    let (br, bc) = (z.nrows() / nb, z.ncols() / nb);
    Ok(CMat::from_fn(br, bc, |i, j| {
        (0..nb).map(|n| z[(i * nb + n, j * nb + n)]).sum()
    }))
}

/// Diagonal of [`block_trace`] for a square `z`.
pub fn block_diag_trace(z: &CMat, nb: usize) -> Result<CVec> {
    check_square(z)?;
    if nb == 0 || z.nrows() % nb != 0 {
        return Err(Error::Dimension(format!(
            "{0}x{0} matrix is not partitioned by {nb}x{nb} blocks",
            z.nrows()
        )));
    }
    let m = z.nrows() / nb;
    Ok(CVec::from_fn(m, |i, _| {
        (0..nb).map(|n| z[(i * nb + n, i * nb + n)]).sum()
    }))
}

pub fn trace(z: &CMat) -> C64 {
    z.trace()
}

/// Largest absolute entry.
pub fn max_abs(z: &CMat) -> f64 {
    z.iter().fold(0.0, |m, v| m.max(v.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

pub fn is_hermitian(a: &CMat) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    hermitian_deviation(a) <= HERMITIAN_TOL * max_abs(a).max(1.0)
}

fn hermitian_deviation(a: &CMat) -> f64 {
    max_abs_diff(a, &a.adjoint())
}

/// `(A + Aᴴ)/2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

fn require_hermitian(a: &CMat) -> Result<CMat> {
    check_square(a)?;
    check_finite(a)?;
    if !is_hermitian(a) {
        return Err(Error::NotHermitian {
            deviation: hermitian_deviation(a),
        });
    }
    Ok(hermitian_part(a))
}

/// Eigen-decomposition of a Hermitian matrix: `A = V diag(λ) Vᴴ`.
pub fn hermitian_eigen(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let h = require_hermitian(a)?;
    if h.nrows() == 0 {
        return Ok((Vec::new(), h));
    }
    let eig = h.symmetric_eigen();
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// Hermitian PSD square root via eigendecomposition.
///
/// Eigenvalues in `[-1e-8·‖A‖₂, 0)` are clamped to zero; anything more
/// negative is rejected.
pub fn matrix_sqrt_psd(r: &CMat) -> Result<CMat> {
    let (vals, vecs) = hermitian_eigen(r)?;
    let spec = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut roots = Vec::with_capacity(vals.len());
    for &v in &vals {
        if v < -1e-8 * spec {
            return Err(Error::NotPsd { eigenvalue: v });
        }
        roots.push(v.max(0.0).sqrt());
    }
    let scaled = CMat::from_fn(vecs.nrows(), vecs.ncols(), |i, j| {
        vecs[(i, j)] * roots[j]
    });
    Ok(hermitian_part(&(&scaled * vecs.adjoint())))
}

/// Solves `A X = B` for Hermitian positive definite `A` by Cholesky.
///
/// The normwise backward error `‖AX−B‖/(‖A‖‖X‖+‖B‖)` must stay below 1e-10.
pub fn solve_hpd(a: &CMat, b: &CMat) -> Result<CMat> {
    let h = require_hermitian(a)?;
    if h.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "solve_hpd: A is {0}x{0}, B has {1} rows",
            h.nrows(),
            b.nrows()
        )));
    }
    let chol = h.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let x = chol.solve(b);
    check_finite(&x).map_err(|_| Error::Singular("Cholesky solve produced non-finite values".into()))?;
    let res = (&h * &x - b).norm();
    let scale = h.norm() * x.norm() + b.norm();
    if scale > 0.0 && res > 1e-10 * scale {
        return Err(Error::Singular(format!(
            "Cholesky solve backward error {:e}",
            res / scale
        )));
    }
    Ok(x)
}

/// Inverse of a Hermitian positive definite matrix.
pub fn inv_hpd(a: &CMat) -> Result<CMat> {
    let n = check_square(a)?;
    Ok(hermitian_part(&solve_hpd(a, &identity(n))?))
}

/// Solves `A X = B` for a general square `A` by partial-pivot LU.
pub fn solve_lu(a: &CMat, b: &CMat) -> Result<CMat> {
    check_square(a)?;
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "solve_lu: A is {0}x{0}, B has {1} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("LU factorization hit a zero pivot".into()))?;
    check_finite(&x).map_err(|_| Error::Singular("LU solve produced non-finite values".into()))?;
    Ok(x)
}

/// 2-norm condition number `σ_max/σ_min` (infinite when rank deficient).
pub fn condition_number(a: &CMat) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Real part of the trace of a Hermitian product, `Re Tr{A B}`, without forming `AB`.
pub fn re_trace_product(a: &CMat, b: &CMat) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    s
}

/// Frobenius norm squared.
pub fn fro2(a: &CMat) -> f64 {
    a.norm_squared()
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}
