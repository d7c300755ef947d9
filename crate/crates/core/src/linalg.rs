//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, Error, Result, C64};

/// Singular-value ratio below which a matrix is treated as rank deficient.
pub const RANK_RTOL: f64 = 1e-10;

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entrywise magnitude of `m - mᴴ`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(m + mᴴ) / 2`, used to scrub rounding asymmetry before eigen-solves.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Copy of the block `m[r0.., c0..]` with the given shape.
pub fn block(m: &CMatrix, r0: usize, c0: usize, rows: usize, cols: usize) -> CMatrix {
    m.view((r0, c0), (rows, cols)).into_owned()
}

/// Splits a square matrix into its 2×2 block partition with a leading `v×v`
/// block: `(m11, m12, m21, m22)`.
pub fn partition(m: &CMatrix, v: usize) -> (CMatrix, CMatrix, CMatrix, CMatrix) {
    let n = m.nrows();
    let k = n - v;
    (
        block(m, 0, 0, v, v),
        block(m, 0, v, v, k),
        block(m, v, 0, k, v),
        block(m, v, v, k, k),
    )
}

pub fn inverse(m: &CMatrix, what: &'static str) -> Result<CMatrix> {
    m.clone().try_inverse().ok_or(Error::Singular(what))
}

/// Schur complement of the trailing block: `m11 - m12 m22⁻¹ m21`.
pub fn schur_complement(m: &CMatrix, v: usize) -> Result<CMatrix> {
    let (m11, m12, m21, m22) = partition(m, v);
    let m22_inv = inverse(&m22, "trailing block of Schur complement")?;
    Ok(m11 - m12 * m22_inv * m21)
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

/// Numerical full column rank: smallest singular value above
/// [`RANK_RTOL`] times the largest.
pub fn has_full_column_rank(m: &CMatrix) -> bool {
    if m.ncols() > m.nrows() || m.ncols() == 0 {
        return false;
    }
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > RANK_RTOL * max
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Cholesky factorisation of the Hermitian part of `m`, or `None` unless
/// every pivot is real and positive.
///
/// `nalgebra` takes complex square roots of the pivots, so an indefinite
/// input still "factors" with imaginary diagonal entries; those are
/// rejected here.
pub fn cholesky(m: &CMatrix) -> Option<Cholesky<C64, Dyn>> {
    let chol = hermitian_part(m).cholesky()?;
    let ok = chol
        .l_dirty()
        .diagonal()
        .iter()
        .all(|d| d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re);
    ok.then_some(chol)
}

/// Whether a Hermitian matrix is positive definite.
pub fn is_positive_definite(m: &CMatrix) -> bool {
    cholesky(m).is_some()
}

/// Standard circular complex Gaussian sample `CN(0, 1)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of i.i.d. `CN(0, 1)` entries, filled column by column.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let mut m = DMatrix::zeros(rows, cols);
    for z in m.iter_mut() {
        *z = complex_normal(rng);
    }
    m
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Real-valued trace of a (Hermitian) matrix.
pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}
