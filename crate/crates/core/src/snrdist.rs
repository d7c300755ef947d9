//! Distributions of the ZF SNRs and of the Schur complement `Γ_1`.
//!
//! Under the mean/correlation condition the SNR of stream `i ≤ v` is exactly
//! `Gamma(N, Γ_{K,i})` with `Γ_{K,i} = Γ_s / [R_{T,K}⁻¹]_{ii}`. The virtual
//! law replaces `R_{T,K}` by the mean-matched scale `R̂_{T,K}`. For
//! Rician(1)/Rayleigh(n_t − 1) fading the SNR of stream 1 has the m.g.f.
//! `(1 − sΓ_{K,1})^{−N} 1F1(N; n_r; σ₁(s))`, available both as a series and
//! as a determinant of elementary functions.

use statrs::distribution::{ContinuousCDF, Gamma};

use crate::channel::{ChannelModel, SystemDims};
use crate::hypergeom::{
    delta2, f00_rank1_idempotent, f00_rank_v_idempotent, f11_series, rank1_prefactor,
    rank1_threshold, EigenSpectrum, Rank1IdemParams, COINCIDENCE_RTOL,
};
use crate::linalg::{self, frobenius, hermitian_part};
use crate::schur::{
    check_condition, conditional_params, virtual_scale, PartitionBlocks, DEFAULT_CONDITION_TOL,
};
use crate::{CMatrix, Error, Result, C64};

/// Which scale a Gamma SNR law uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistKind {
    Exact,
    Virtual,
}

/// `Gamma(N, Γ)` law of a ZF SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSnrDist {
    pub shape: usize,
    pub scale: f64,
    pub kind: DistKind,
}

impl GammaSnrDist {
    pub fn new(shape: usize, scale: f64, kind: DistKind) -> Result<Self> {
        if shape == 0 || !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bad Gamma law: shape {shape}, scale {scale}"
            )));
        }
        Ok(Self { shape, scale, kind })
    }

    pub fn mean(&self) -> f64 {
        self.shape as f64 * self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        Gamma::new(self.shape as f64, 1.0 / self.scale)
            .map(|g| g.cdf(x))
            .unwrap_or(f64::NAN)
    }

    pub fn mgf(&self, s: f64) -> Result<f64> {
        mgf_gamma(self, s)
    }
}

fn check_stream(stream: usize, n_t: usize) -> Result<usize> {
    if stream == 0 || stream > n_t {
        return Err(Error::InvalidArgument(format!(
            "stream {stream} outside 1..={n_t}"
        )));
    }
    Ok(stream - 1)
}

/// Exact Gamma law of the SNR of `stream` (1-based) for the partition of
/// size `v`.
///
/// Only streams `≤ v` are covered, and only when the condition holds; with
/// `K = 0` the condition is trivially true and every stream is covered.
pub fn exact_gamma_snr(
    model: &ChannelModel,
    stream: usize,
    gamma_s: f64,
    v: usize,
) -> Result<GammaSnrDist> {
    let dims = model.dims(v)?;
    let i = check_stream(stream, dims.n_t())?;
    if model.k_factor() > 0.0 {
        if stream > v {
            return Err(Error::NoClosedForm(format!(
                "stream {stream} lies outside the first {v} streams"
            )));
        }
        let report = check_condition(model, v, DEFAULT_CONDITION_TOL)?;
        if !report.holds {
            return Err(Error::NoClosedForm(format!(
                "mean/correlation condition violated (residual {:e})",
                report.residual
            )));
        }
    }
    let r_inv = linalg::inverse(model.r_tk(), "R_{T,K}")?;
    GammaSnrDist::new(dims.n(), gamma_s / r_inv[(i, i)].re, DistKind::Exact)
}

/// Virtual Gamma law of the SNR of `stream` (1-based).
pub fn virtual_gamma_snr(
    model: &ChannelModel,
    stream: usize,
    gamma_s: f64,
) -> Result<GammaSnrDist> {
    let i = check_stream(stream, model.n_t())?;
    let n = model.n_r() - model.n_t() + 1;
    let r_hat_inv = linalg::inverse(&virtual_scale(model), "virtual scale")?;
    GammaSnrDist::new(n, gamma_s / r_hat_inv[(i, i)].re, DistKind::Virtual)
}

/// `(1 − sΓ)^{−N}`.
pub fn mgf_gamma(d: &GammaSnrDist, s: f64) -> Result<f64> {
    let base = 1.0 - s * d.scale;
    if !(base > 0.0) {
        return Err(Error::MgfPole(s));
    }
    Ok(base.powi(-(d.shape as i32)))
}

/// Parameters of the stream-1 SNR m.g.f. for Rician(1)/Rayleigh fading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rank1MgfParams {
    /// `Γ_{K,1} = Γ_s / [R_{T,K}⁻¹]_{11}`.
    pub gamma_k1: f64,
    /// `α = R^{11} ‖μ‖²`.
    pub alpha: f64,
    pub n: usize,
    pub n_r: usize,
    pub n_t: usize,
}

impl Rank1MgfParams {
    pub fn new(gamma_k1: f64, alpha: f64, n_r: usize, n_t: usize) -> Result<Self> {
        if !(gamma_k1 > 0.0) || !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gamma_k1 {gamma_k1}, alpha {alpha}"
            )));
        }
        if n_t < 2 || n_t > n_r {
            return Err(Error::InvalidArgument(format!(
                "need 2 <= n_t <= n_r, got {n_t}, {n_r}"
            )));
        }
        Ok(Self {
            gamma_k1,
            alpha,
            n: n_r - n_t + 1,
            n_r,
            n_t,
        })
    }

    /// `σ₁(s) = sΓ_{K,1} α / (1 − sΓ_{K,1})`.
    pub fn sigma1(&self, s: f64) -> f64 {
        let x = s * self.gamma_k1;
        x * self.alpha / (1.0 - x)
    }

    fn pole_check(&self, s: f64) -> Result<f64> {
        let base = 1.0 - s * self.gamma_k1;
        if !(base > 0.0) {
            return Err(Error::MgfPole(s));
        }
        Ok(base)
    }
}

/// Stream-1 m.g.f. parameters of a model with partition `v = 1`; `μ` is the
/// conditional mean offset `h_d1 − H_d2 r_{2,1}`.
pub fn rank1_params(model: &ChannelModel, gamma_s: f64) -> Result<Rank1MgfParams> {
    if !(gamma_s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma_s must be > 0, got {gamma_s}"
        )));
    }
    let blocks = conditional_params(model, 1)?;
    let sc = blocks.sc_corr[(0, 0)].re;
    let mu2 = frobenius(&blocks.m_matrix).powi(2);
    Rank1MgfParams::new(gamma_s * sc, mu2 / sc, model.n_r(), model.n_t())
}

/// `(1 − sΓ_{K,1})^{−N} 1F1(N; n_r; σ₁(s))` by the `1F1` power series.
pub fn mgf_gamma1_series(p: &Rank1MgfParams, s: f64, rtol: f64) -> Result<f64> {
    let base = p.pole_check(s)?;
    let f = f11_series(p.n as f64, p.n_r as f64, p.sigma1(s), rtol)?;
    Ok(base.powi(-(p.n as i32)) * f)
}

/// Determinantal form
/// `A (1 − sΓ_{K,1})^{n_t−2} Δ₂(N, n_r, σ₁(s)) / (sΓ_{K,1} α)^{n_r−1}`.
///
/// Falls back to [`mgf_gamma1_series`] when `|σ₁(s)|` is below
/// [`rank1_threshold`], which includes `s = 0` and `α = 0`.
pub fn mgf_gamma1_det(p: &Rank1MgfParams, s: f64) -> Result<f64> {
    let base = p.pole_check(s)?;
    let sigma1 = p.sigma1(s);
    if !(sigma1.abs() >= rank1_threshold(p.n_r)) {
        return mgf_gamma1_series(p, s, 1e-16);
    }
    let x = s * p.gamma_k1 * p.alpha;
    let value =
        rank1_prefactor(p.n, p.n_r) * base.powi(p.n_t as i32 - 2) * delta2(p.n, p.n_r, sigma1)
            / x.powi(p.n_r as i32 - 1);
    if !value.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "determinantal m.g.f. overflows at s = {s}"
        )));
    }
    Ok(value)
}

/// `C = L Lᴴ` and `I − Lᴴ Θ L`, whose determinant equals `|I − Θ C|` and
/// whose positive definiteness is the domain condition of the m.g.f.s.
fn domain_factor(theta: &CMatrix, sc_corr: &CMatrix) -> Result<(f64, CMatrix)> {
    let v = sc_corr.nrows();
    if theta.shape() != (v, v) {
        return Err(Error::InvalidArgument(format!(
            "Θ must be {v}x{v}, got {:?}",
            theta.shape()
        )));
    }
    if linalg::hermitian_defect(theta) > 1e-12 * (1.0 + frobenius(theta)) {
        return Err(Error::InvalidArgument("Θ must be Hermitian".into()));
    }
    let l = linalg::cholesky(sc_corr)
        .ok_or(Error::NotPositiveDefinite)?
        .unpack();
    let g = hermitian_part(&(linalg::identity(v) - l.adjoint() * theta * &l));
    let chol = linalg::cholesky(&g).ok_or(Error::MgfDomain)?;
    let det = chol
        .l()
        .diagonal()
        .iter()
        .map(|z| z.re * z.re)
        .product::<f64>();
    if !(det > 0.0) {
        return Err(Error::MgfDomain);
    }
    let psi = (linalg::identity(v) - theta * sc_corr)
        .lu()
        .solve(theta)
        .ok_or(Error::MgfDomain)?;
    Ok((det, hermitian_part(&psi)))
}

/// M.g.f. `E{etr(Θ Γ_1) | H_2}` of the Schur complement given the
/// interfering block: `|I − Θ C|^{−N_v} etr((I − Θ C)⁻¹ Θ Mᴴ Q_2 M)` with
/// `C` the correlation Schur complement.
pub fn mgf_sc_conditional(
    theta: &CMatrix,
    blocks: &PartitionBlocks,
    q2: &CMatrix,
    n_v: usize,
) -> Result<f64> {
    let (det, psi) = domain_factor(theta, &blocks.sc_corr)?;
    let m = &blocks.m_matrix;
    let quad = m.adjoint() * q2 * m;
    let tr: C64 = (psi * quad).trace();
    Ok(det.powi(-(n_v as i32)) * tr.re.exp())
}

/// Unconditioned m.g.f. `E{etr(Θ Γ_1)}` for Rician(v)/Rayleigh(n_t − v)
/// fading (`H_d2 = 0`): `|I − Θ C|^{−N_v} 0F0(S, Λ)` with
/// `S = M (I − Θ C)⁻¹ Θ Mᴴ` and `Λ` idempotent of rank `N_v`.
///
/// `0F0` is evaluated from the nonzero eigenvalues of `S`: one eigenvalue
/// goes through the rank-one formula (with its series fallback), several
/// distinct ones through the rank-`v` determinant, and coincident ones
/// through the general confluent formula. A nonzero eigenvalue below the
/// small-argument threshold among several is reported as
/// [`Error::SmallEigenvalue`].
pub fn mgf_sc_rician_rayleigh(
    theta: &CMatrix,
    blocks: &PartitionBlocks,
    dims: &SystemDims,
) -> Result<f64> {
    if blocks.v != dims.v() {
        return Err(Error::InvalidArgument(
            "blocks and dims disagree on v".into(),
        ));
    }
    let hd_scale = 1.0 + frobenius(&blocks.hd1);
    if frobenius(&blocks.hd2) > 1e-12 * hd_scale {
        return Err(Error::InvalidArgument(
            "needs H_d2 = 0 (Rician/Rayleigh partition)".into(),
        ));
    }
    let (det, psi) = domain_factor(theta, &blocks.sc_corr)?;
    let prefactor = det.powi(-(dims.n_v() as i32));
    let m = &blocks.m_matrix;
    let s = hermitian_part(&(m * psi * m.adjoint()));
    let f00 = f00_idempotent(&linalg::hermitian_eigenvalues(&s), dims.n_v(), dims.n_r())?;
    Ok(prefactor * f00)
}

/// `0F0(S, Λ)` from the full eigenvalue list of `S` and an idempotent `Λ` of
/// rank `n_v`.
fn f00_idempotent(s_eigs: &[f64], n_v: usize, n_r: usize) -> Result<f64> {
    let scale = s_eigs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let zero_tol = 1e-12 * scale.max(1.0);
    let mut nonzero: Vec<f64> = s_eigs
        .iter()
        .copied()
        .filter(|x| x.abs() > zero_tol)
        .collect();
    nonzero.sort_by(|a, b| b.total_cmp(a));
    match nonzero.len() {
        0 => Ok(1.0),
        1 => f00_rank1_idempotent(Rank1IdemParams::new(nonzero[0], n_v, n_r)?),
        _ => {
            let threshold = rank1_threshold(n_r);
            if nonzero.iter().any(|x| x.abs() < threshold) {
                return Err(Error::SmallEigenvalue);
            }
            match f00_rank_v_idempotent(&nonzero, n_v, n_r) {
                Err(Error::NearCoincident { .. }) => {
                    let mut all = nonzero.clone();
                    all.resize(n_r, 0.0);
                    let sp = EigenSpectrum::from_values(&all, COINCIDENCE_RTOL)?;
                    let lp = if n_v == n_r {
                        EigenSpectrum::new(vec![1.0], vec![n_r])?
                    } else {
                        EigenSpectrum::new(vec![1.0, 0.0], vec![n_v, n_r - n_v])?
                    };
                    crate::hypergeom::f00_general(&sp, &lp)
                }
                other => other,
            }
        }
    }
}
