//! Block partitionings, the UL factor of `R_{T,K}`, Schur complements of the
//! Gramian `W = HᴴH`, and the mean/correlation condition
//! `H_d1 = H_d2 R_{2,1}` under which the Schur complement is central Wishart.
//!
//! Throughout, `H = (H_1 H_2)` with `H_1` holding the first `v` columns, and
//! every matrix on the transmit side is split conformally.

use crate::channel::{ChannelModel, SystemDims};
use crate::linalg::{self, block, frobenius, has_full_column_rank, hermitian_part, partition};
use crate::{CMatrix, Error, Result};

/// Default relative tolerance of [`check_condition`].
pub const DEFAULT_CONDITION_TOL: f64 = 1e-8;

/// Upper-triangular factor `A` with `R = A Aᴴ`.
#[derive(Debug, Clone)]
pub struct UlFactor {
    a: CMatrix,
}

impl UlFactor {
    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    /// `(A_11, A_12, A_22)`; the block below the diagonal is zero.
    pub fn blocks(&self, v: usize) -> (CMatrix, CMatrix, CMatrix) {
        let (a11, a12, _, a22) = partition(&self.a, v);
        (a11, a12, a22)
    }
}

/// UL factorisation of a Hermitian positive definite matrix.
///
/// Computed as a Cholesky factorisation of `J R J`, `J` the exchange matrix:
/// if `J R J = L Lᴴ` then `A = J L J` is upper triangular with `A Aᴴ = R`.
pub fn ul_decompose(r: &CMatrix) -> Result<UlFactor> {
    if !r.is_square() || r.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "UL factor needs a square matrix".into(),
        ));
    }
    if linalg::hermitian_defect(r) > 1e-10 * (1.0 + frobenius(r)) {
        return Err(Error::NotPositiveDefinite);
    }
    let n = r.nrows();
    let flipped = CMatrix::from_fn(n, n, |i, j| r[(n - 1 - i, n - 1 - j)]);
    let l = linalg::cholesky(&flipped)
        .ok_or(Error::NotPositiveDefinite)?
        .unpack();
    let scale = (0..n).map(|i| r[(i, i)].re).fold(0.0, f64::max);
    if (0..n).any(|i| l[(i, i)].re.powi(2) <= 1e-14 * scale) {
        return Err(Error::NotPositiveDefinite);
    }
    let a = CMatrix::from_fn(n, n, |i, j| l[(n - 1 - i, n - 1 - j)]);
    Ok(UlFactor { a })
}

/// Blocks of the Gramian and its Schur complement `Γ_1`.
#[derive(Debug, Clone)]
pub struct GramianSc {
    pub w11: CMatrix,
    pub w12: CMatrix,
    pub w21: CMatrix,
    pub w22: CMatrix,
    /// `Γ_1 = R_bᴴ R_b`, with `R_b` the trailing `v×v` block of the R factor
    /// of `(H_2 H_1)`.
    pub gamma1: CMatrix,
    /// `W_11 − W_12 W_22⁻¹ W_21`.
    pub gamma1_block: CMatrix,
    /// `H_1ᴴ Q_2 H_1`.
    pub gamma1_projection: CMatrix,
}

/// Gramian blocks of `h` and the Schur complement of `W_22`.
///
/// `Γ_1` is formed from a QR factorisation, which stays accurate when `W`
/// is badly conditioned; the block formula and the projector formula are
/// returned alongside.
pub fn gramian_and_sc(h: &CMatrix, v: usize) -> Result<GramianSc> {
    let n_t = h.ncols();
    if v == 0 || v >= n_t {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= v < n_t, got v={v}, n_t={n_t}"
        )));
    }
    if !has_full_column_rank(h) {
        return Err(Error::RankDeficient);
    }
    let n_r = h.nrows();
    let h1 = block(h, 0, 0, n_r, v);
    let h2 = block(h, 0, v, n_r, n_t - v);

    let mut reordered = CMatrix::zeros(n_r, n_t);
    reordered.columns_mut(0, n_t - v).copy_from(&h2);
    reordered.columns_mut(n_t - v, v).copy_from(&h1);
    let r = reordered.qr().r();
    let r_b = block(&r, n_t - v, n_t - v, v, v);
    let gamma1 = hermitian_part(&(r_b.adjoint() * r_b));

    let w = h.adjoint() * h;
    let (w11, w12, w21, w22) = partition(&w, v);
    let w22_inv = linalg::inverse(&w22, "W_22")?;
    let gamma1_block = hermitian_part(&(&w11 - &w12 * &w22_inv * &w21));
    let q2 = null_projector(&h2)?;
    let gamma1_projection = hermitian_part(&(h1.adjoint() * q2 * h1));

    Ok(GramianSc {
        w11,
        w12,
        w21,
        w22,
        gamma1,
        gamma1_block,
        gamma1_projection,
    })
}

/// `Q_2 = I − H_2 (H_2ᴴ H_2)⁻¹ H_2ᴴ`, the projector onto the null space of
/// `H_2ᴴ`.
pub fn null_projector(h2: &CMatrix) -> Result<CMatrix> {
    if !has_full_column_rank(h2) {
        return Err(Error::RankDeficient);
    }
    let g_inv = linalg::inverse(&(h2.adjoint() * h2), "H_2ᴴH_2")?;
    let p = h2 * g_inv * h2.adjoint();
    Ok(hermitian_part(&(linalg::identity(h2.nrows()) - p)))
}

/// Ascending eigenvalues of `Q_2`: `n_t − v` zeros followed by `n_v` ones.
pub fn projection_eigencheck(h2: &CMatrix) -> Result<Vec<f64>> {
    let q2 = null_projector(h2)?;
    Ok(linalg::hermitian_eigenvalues(&q2))
}

/// Transmit-side blocks and the conditional-law parameters of `H_1` given
/// `H_2`.
#[derive(Debug, Clone)]
pub struct PartitionBlocks {
    pub v: usize,
    pub r11: CMatrix,
    pub r12: CMatrix,
    pub r21: CMatrix,
    pub r22: CMatrix,
    pub hd1: CMatrix,
    pub hd2: CMatrix,
    /// `M = H_d1 − H_d2 R_{2,1}`.
    pub m_matrix: CMatrix,
    /// Regression matrix `R_{2,1} = R_22⁻¹ R_21`.
    pub r_cond: CMatrix,
    /// `R_11 − R_12 R_22⁻¹ R_21 = (R^{11})⁻¹`.
    pub sc_corr: CMatrix,
}

impl PartitionBlocks {
    /// Mean of `H_1` given `H_2`: `H_d1 + (H_2 − H_d2) R_{2,1}`.
    pub fn conditional_mean(&self, h2: &CMatrix) -> CMatrix {
        &self.hd1 + (h2 - &self.hd2) * &self.r_cond
    }
}

pub fn conditional_params(model: &ChannelModel, v: usize) -> Result<PartitionBlocks> {
    let dims = model.dims(v)?;
    let (r11, r12, r21, r22) = partition(model.r_tk(), v);
    let chol = linalg::cholesky(&r22).ok_or(Error::SingularInterferingCorrelation)?;
    let r_cond = chol.solve(&r21);
    let sc_corr = hermitian_part(&(&r11 - &r12 * &r_cond));
    let hd1 = block(model.h_d(), 0, 0, dims.n_r(), v);
    let hd2 = block(model.h_d(), 0, v, dims.n_r(), dims.n_t() - v);
    let m_matrix = &hd1 - &hd2 * &r_cond;
    Ok(PartitionBlocks {
        v,
        r11,
        r12,
        r21,
        r22,
        hd1,
        hd2,
        m_matrix,
        r_cond,
        sc_corr,
    })
}

/// Outcome of [`check_condition`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    /// `‖H_d1 − H_d2 R_{2,1}‖_F`.
    pub residual: f64,
    pub holds: bool,
    pub tol: f64,
}

pub fn check_condition(model: &ChannelModel, v: usize, tol: f64) -> Result<ConditionReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be > 0, got {tol}"
        )));
    }
    let blocks = conditional_params(model, v)?;
    let residual = frobenius(&blocks.m_matrix);
    Ok(ConditionReport {
        residual,
        holds: residual <= tol * frobenius(model.h_d()),
        tol,
    })
}

/// Returns a copy of `model` whose mean is replaced by
/// `(H_d2 R_{2,1}  H_d2)`, renormalised, so that the condition holds exactly
/// up to rounding.
pub fn impose_condition(model: &ChannelModel, v: usize) -> Result<ChannelModel> {
    let blocks = conditional_params(model, v)?;
    let mut mean = model.h_d().clone();
    let hd1 = &blocks.hd2 * &blocks.r_cond;
    mean.view_mut((0, 0), (model.n_r(), v)).copy_from(&hd1);
    ChannelModel::from_parts(model.r_t(), &mean, model.k_factor())
}

/// Scale of the mean-matched central Wishart: `R_{T,K} + H_dᴴ H_d / n_r`.
pub fn virtual_scale(model: &ChannelModel) -> CMatrix {
    let hd = model.h_d();
    let gram = hd.adjoint() * hd;
    hermitian_part(&(model.r_tk() + gram.scale(1.0 / model.n_r() as f64)))
}

/// `‖SC(R̂_{T,K}) − SC(R_{T,K})‖_F` for the leading `v×v` Schur complement.
/// Vanishes exactly when the mean/correlation condition holds.
pub fn theorem2_residual(model: &ChannelModel, v: usize) -> Result<f64> {
    model.dims(v)?;
    let sc_virtual = linalg::schur_complement(&virtual_scale(model), v)?;
    let sc = linalg::schur_complement(model.r_tk(), v)?;
    Ok(frobenius(&(sc_virtual - sc)))
}

/// `‖[H_d A⁻ᴴ]_{:, 1:v}‖_F`: the mean of the first `v` columns of the
/// whitened channel `H A⁻ᴴ`.
pub fn whitening_check(model: &ChannelModel, v: usize) -> Result<f64> {
    let dims = model.dims(v)?;
    let ul = ul_decompose(model.r_tk())?;
    let a_inv_h = linalg::inverse(ul.a(), "UL factor")?.adjoint();
    let whitened = model.h_d() * a_inv_h;
    Ok(frobenius(&block(&whitened, 0, 0, dims.n_r(), v)))
}

/// Ranks of the idempotent projectors for the given dimensions, paired as
/// `(rank of P_2, rank of Q_2)`.
pub fn projector_ranks(dims: &SystemDims) -> (usize, usize) {
    (dims.n_t() - dims.v(), dims.n_v())
}
