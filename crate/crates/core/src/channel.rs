//! Correlated Rician MIMO channel: transmit correlation from a Laplacian
//! power azimuth spectrum, mean normalisation, K-factor split and sampling.
//!
//! The channel is `H = H_d + H_r` with `H_d = sqrt(K/(K+1)) H_d,norm`,
//! `‖H_d,norm‖² = n_r n_t`, and every row of `H_r` distributed as
//! `CN(0, R_T/(K+1))` with `trace(R_T) = n_t`.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use crate::linalg::{self, frobenius, hermitian_defect, trace_re};
use crate::rng::{chunks, substream};
use crate::schur::ul_decompose;
use crate::{CMatrix, Error, Result, C64};

/// Trapezoidal nodes used to integrate the power azimuth spectrum.
pub const PAS_QUADRATURE_INTERVALS: usize = 2048;

/// Converts a K-factor in dB to linear scale.
pub fn k_from_db(k_db: f64) -> f64 {
    10f64.powf(k_db / 10.0)
}

/// Antenna counts and the partition size of `H = (H_1 H_2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemDims {
    n_r: usize,
    n_t: usize,
    v: usize,
}

impl SystemDims {
    pub fn new(n_r: usize, n_t: usize, v: usize) -> Result<Self> {
        if n_t == 0 || n_t > n_r {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= n_t <= n_r, got n_r={n_r}, n_t={n_t}"
            )));
        }
        if v == 0 || v >= n_t {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= v < n_t, got v={v}, n_t={n_t}"
            )));
        }
        Ok(Self { n_r, n_t, v })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn v(&self) -> usize {
        self.v
    }

    /// Rank of the null-space projector `Q_2`: `n_r - n_t + v`.
    pub fn n_v(&self) -> usize {
        self.n_r - self.n_t + self.v
    }

    /// Degrees of freedom of the per-stream Gamma law: `n_r - n_t + 1`.
    pub fn n(&self) -> usize {
        self.n_r - self.n_t + 1
    }
}

/// Physical description of the fading: K-factor, angular spread of a
/// uniform linear transmit array and an unnormalised mean-matrix seed.
#[derive(Debug, Clone)]
pub struct FadingSpec {
    /// Linear Rician K-factor.
    pub k_factor: f64,
    pub azimuth_spread_deg: f64,
    pub center_azimuth_deg: f64,
    /// Element spacing in units of half a carrier wavelength.
    pub antenna_spacing_halfwavelengths: f64,
    /// Unnormalised `n_r × n_t` line-of-sight matrix.
    pub mean_matrix_raw: CMatrix,
}

impl FadingSpec {
    /// Builds a spec from a K-factor in dB; everything downstream is linear.
    pub fn from_db(
        k_db: f64,
        azimuth_spread_deg: f64,
        center_azimuth_deg: f64,
        antenna_spacing_halfwavelengths: f64,
        mean_matrix_raw: CMatrix,
    ) -> Result<Self> {
        let spec = Self {
            k_factor: k_from_db(k_db),
            azimuth_spread_deg,
            center_azimuth_deg,
            antenna_spacing_halfwavelengths,
            mean_matrix_raw,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_factor >= 0.0) || !self.k_factor.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "K-factor must be finite and >= 0, got {}",
                self.k_factor
            )));
        }
        if !(self.azimuth_spread_deg > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "azimuth spread must be > 0, got {}",
                self.azimuth_spread_deg
            )));
        }
        if !(self.antenna_spacing_halfwavelengths > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "antenna spacing must be > 0, got {}",
                self.antenna_spacing_halfwavelengths
            )));
        }
        Ok(())
    }
}

/// Transmit correlation `[R_T]_{p,q}` of a uniform linear array under a
/// Laplacian power azimuth spectrum.
///
/// The spectrum has standard deviation `AS`, is centred at `θ_c` and is
/// truncated to `±180°` around the centre. The integral
/// `∫ exp(j π d_n (p−q) sin θ) PAS(θ) dθ` is evaluated with a
/// [`PAS_QUADRATURE_INTERVALS`]-interval trapezoidal rule and the result is
/// renormalised to `trace = n_t`.
pub fn build_correlation_matrix(spec: &FadingSpec, n_t: usize) -> Result<CMatrix> {
    spec.validate()?;
    if n_t == 0 {
        return Err(Error::InvalidArgument("n_t must be >= 1".into()));
    }
    let sigma = spec.azimuth_spread_deg.to_radians();
    let center = spec.center_azimuth_deg.to_radians();
    let phase_per_lag = PI * spec.antenna_spacing_halfwavelengths;

    let n = PAS_QUADRATURE_INTERVALS;
    let step = 2.0 * PI / n as f64;
    let mut angles = Vec::with_capacity(n + 1);
    let mut weights = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let offset = -PI + step * k as f64;
        let trap = if k == 0 || k == n { 0.5 } else { 1.0 };
        angles.push((center + offset).sin());
        weights.push(trap * step * (-SQRT_2 * offset.abs() / sigma).exp());
    }
    let total: f64 = weights.iter().sum();

    let lag = |l: usize| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (s, w) in angles.iter().zip(&weights) {
            acc += C64::from_polar(*w, phase_per_lag * l as f64 * s);
        }
        acc / total
    };
    let lags: Vec<C64> = (0..n_t).map(lag).collect();

    let mut r = CMatrix::zeros(n_t, n_t);
    for p in 0..n_t {
        for q in 0..n_t {
            r[(p, q)] = if p >= q {
                lags[p - q]
            } else {
                lags[q - p].conj()
            };
        }
    }
    let tr = trace_re(&r);
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::CorrelationSynthesis(format!(
            "non-positive trace {tr}"
        )));
    }
    r.scale_mut(n_t as f64 / tr);

    let min_eig = linalg::hermitian_eigenvalues(&r)[0];
    if !(min_eig >= -1e-10 * n_t as f64) {
        return Err(Error::CorrelationSynthesis(format!(
            "result not positive semidefinite (min eigenvalue {min_eig:e})"
        )));
    }
    Ok(r)
}

/// Scales `raw` so that `‖out‖²_F = n_r n_t`.
pub fn normalize_mean(raw: &CMatrix) -> Result<CMatrix> {
    let norm2 = raw.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if norm2 == 0.0 || !norm2.is_finite() {
        return Err(Error::ZeroMean);
    }
    let target = (raw.nrows() * raw.ncols()) as f64;
    Ok(raw.scale((target / norm2).sqrt()))
}

/// Deterministic part and transmit covariance of a Rician channel.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    h_d: CMatrix,
    r_t: CMatrix,
    r_tk: CMatrix,
    k_factor: f64,
}

impl ChannelModel {
    /// Assembles a model from an arbitrary Hermitian PSD transmit
    /// correlation (renormalised to `trace = n_t`), an unnormalised mean and a
    /// linear K-factor. With `K = 0` the mean is ignored.
    pub fn from_parts(r_t: &CMatrix, mean_raw: &CMatrix, k_factor: f64) -> Result<Self> {
        if !r_t.is_square() {
            return Err(Error::InvalidArgument("R_T must be square".into()));
        }
        let n_t = r_t.nrows();
        if mean_raw.ncols() != n_t || mean_raw.nrows() < n_t {
            return Err(Error::InvalidArgument(format!(
                "mean matrix is {}x{}, expected n_r x {n_t} with n_r >= {n_t}",
                mean_raw.nrows(),
                mean_raw.ncols()
            )));
        }
        if !(k_factor >= 0.0) || !k_factor.is_finite() {
            return Err(Error::InvalidArgument(format!("bad K-factor {k_factor}")));
        }
        let scale = 1e-12 * (1.0 + frobenius(r_t));
        if hermitian_defect(r_t) > scale {
            return Err(Error::InvalidArgument("R_T is not Hermitian".into()));
        }
        let mut r_t = linalg::hermitian_part(r_t);
        let tr = trace_re(&r_t);
        if !(tr > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        r_t.scale_mut(n_t as f64 / tr);

        let h_d = if k_factor == 0.0 {
            CMatrix::zeros(mean_raw.nrows(), n_t)
        } else {
            normalize_mean(mean_raw)?.scale((k_factor / (k_factor + 1.0)).sqrt())
        };
        let r_tk = r_t.scale(1.0 / (k_factor + 1.0));
        Ok(Self {
            h_d,
            r_t,
            r_tk,
            k_factor,
        })
    }

    pub fn h_d(&self) -> &CMatrix {
        &self.h_d
    }

    pub fn r_t(&self) -> &CMatrix {
        &self.r_t
    }

    /// `R_{T,K} = R_T / (K+1)`, the covariance of each row of `H_r`.
    pub fn r_tk(&self) -> &CMatrix {
        &self.r_tk
    }

    pub fn k_factor(&self) -> f64 {
        self.k_factor
    }

    pub fn n_r(&self) -> usize {
        self.h_d.nrows()
    }

    pub fn n_t(&self) -> usize {
        self.h_d.ncols()
    }

    pub fn dims(&self, v: usize) -> Result<SystemDims> {
        SystemDims::new(self.n_r(), self.n_t(), v)
    }
}

/// `H_d` and `R_{T,K}` from a fading spec, following the K-factor split.
pub fn assemble_channel(spec: &FadingSpec, n_r: usize, n_t: usize) -> Result<ChannelModel> {
    if spec.mean_matrix_raw.shape() != (n_r, n_t) {
        return Err(Error::InvalidArgument(format!(
            "mean matrix is {:?}, expected ({n_r}, {n_t})",
            spec.mean_matrix_raw.shape()
        )));
    }
    let r_t = build_correlation_matrix(spec, n_t)?;
    ChannelModel::from_parts(&r_t, &spec.mean_matrix_raw, spec.k_factor)
}

/// Per-draw channel generator `H = H_d + G Aᴴ` with `A Aᴴ = R_{T,K}`.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    h_d: CMatrix,
    a_h: CMatrix,
}

impl ChannelSampler {
    pub fn new(model: &ChannelModel) -> Result<Self> {
        let ul = ul_decompose(model.r_tk())?;
        Ok(Self {
            h_d: model.h_d().clone(),
            a_h: ul.a().adjoint(),
        })
    }

    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        let g = linalg::complex_gaussian(rng, self.h_d.nrows(), self.h_d.ncols());
        &self.h_d + g * &self.a_h
    }
}

/// `count` channel draws, deterministic in `seed` regardless of threads.
pub fn sample_channel(model: &ChannelModel, count: usize, seed: u64) -> Result<Vec<CMatrix>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    let sampler = ChannelSampler::new(model)?;
    let parts: Vec<Vec<CMatrix>> = chunks(count)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, _, len)| {
            let mut rng = substream(seed, c);
            (0..len).map(|_| sampler.draw(&mut rng)).collect()
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

/// Transmit-side link budget. `N_0 = 1` throughout, so `E_s/N_0 = Γ_s n_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub es_over_n0: f64,
    pub gamma_s: f64,
    pub gamma_b: f64,
}

impl LinkBudget {
    pub fn from_gamma_s(gamma_s: f64, n_t: usize, m: usize) -> Result<Self> {
        if !(gamma_s > 0.0) || n_t == 0 || m < 2 {
            return Err(Error::InvalidArgument(format!(
                "bad link budget: gamma_s={gamma_s}, n_t={n_t}, M={m}"
            )));
        }
        Ok(Self {
            es_over_n0: gamma_s * n_t as f64,
            gamma_s,
            gamma_b: gamma_s / (m as f64).log2(),
        })
    }

    /// Budget from the average SNR per transmitted bit, in dB.
    pub fn from_gamma_b_db(gamma_b_db: f64, n_t: usize, m: usize) -> Result<Self> {
        let gamma_b = 10f64.powf(gamma_b_db / 10.0);
        Self::from_gamma_s(gamma_b * (m as f64).log2(), n_t, m)
    }
}
