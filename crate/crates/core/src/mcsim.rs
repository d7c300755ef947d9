//! Monte Carlo link simulator for ZF detection of MPSK streams, plus
//! samplers of the ZF SNRs and of the Gramian Schur complement.
//!
//! Conventions: `N_0 = 1` and `E_s = Γ_s n_t`, so the received vector is
//! `y = sqrt(Γ_s) H x + n` with unit-modulus symbols `x_i = e^{j2πk_i/M}` and
//! `n ~ CN(0, I)`. A fresh channel is drawn for every trial. Work is split
//! into fixed chunks of [`crate::rng::CHUNK`] trials, chunk `c` using
//! substream `c` of the seed, and per-chunk counts are summed, so results do
//! not depend on the number of threads.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{ChannelModel, ChannelSampler, LinkBudget};
use crate::linalg::{self, complex_gaussian};
use crate::rng::{chunks, substream};
use crate::schur::gramian_and_sc;
use crate::snrdist::GammaSnrDist;
use crate::{CMatrix, Error, Result, C64};

/// Redraw budget per trial for rank-deficient channel draws.
const MAX_REDRAWS: usize = 100;

/// Symbol-error count of one stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    pub trials: u64,
    pub errors: u64,
    pub ser: f64,
    pub ci_halfwidth_3sigma: f64,
}

impl SimResult {
    pub fn from_counts(trials: u64, errors: u64) -> Self {
        let ser = errors as f64 / trials as f64;
        Self {
            trials,
            errors,
            ser,
            ci_halfwidth_3sigma: 3.0 * (ser * (1.0 - ser) / trials as f64).sqrt(),
        }
    }

    /// Whether `value` lies inside `ser ± ci_halfwidth_3sigma`.
    pub fn contains(&self, value: f64) -> bool {
        (value - self.ser).abs() <= self.ci_halfwidth_3sigma
    }
}

/// Empirical ZF SNRs of one stream (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSamples {
    pub stream: usize,
    pub values: Vec<f64>,
}

fn check_count(count: usize) -> Result<()> {
    if count < 1000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 1000 draws, got {count}"
        )));
    }
    Ok(())
}

/// Draws a channel whose Gramian is numerically positive definite, returning
/// the channel, the Cholesky factor of `W` and the number of redraws.
fn draw_invertible<R: Rng + ?Sized>(
    sampler: &ChannelSampler,
    rng: &mut R,
) -> Result<(CMatrix, nalgebra::Cholesky<C64, nalgebra::Dyn>, usize)> {
    for redraws in 0..MAX_REDRAWS {
        let h = sampler.draw(rng);
        if let Some(chol) = linalg::cholesky(&(h.adjoint() * &h)) {
            return Ok((h, chol, redraws));
        }
    }
    Err(Error::RankDeficient)
}

fn warn_redraws(redraws: usize, total: usize) {
    if redraws as f64 > 1e-3 * total as f64 {
        log::warn!("{redraws} rank-deficient channel draws redrawn out of {total}");
    }
}

/// Nearest MPSK symbol index to `z`.
fn detect(z: C64, m: usize) -> usize {
    let k = (z.arg() * m as f64 / (2.0 * PI)).round() as i64;
    k.rem_euclid(m as i64) as usize
}

/// Per-stream symbol-error rates of ZF detection over `trials` channel and
/// noise draws.
pub fn simulate_ser(
    model: &ChannelModel,
    budget: &LinkBudget,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<SimResult>> {
    check_count(trials)?;
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "MPSK order must be >= 2, got {m}"
        )));
    }
    let sampler = ChannelSampler::new(model)?;
    let n_t = model.n_t();
    let n_r = model.n_r();
    let amp = budget.gamma_s.sqrt();
    let constellation: Vec<C64> = (0..m)
        .map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64))
        .collect();

    let parts: Vec<(Vec<u64>, usize)> = chunks(trials)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, _, len)| -> Result<(Vec<u64>, usize)> {
            let mut rng = substream(seed, c);
            let mut errors = vec![0u64; n_t];
            let mut redraws = 0;
            let mut sent = vec![0usize; n_t];
            for _ in 0..len {
                let (h, chol, r) = draw_invertible(&sampler, &mut rng)?;
                redraws += r;
                let mut x = CMatrix::zeros(n_t, 1);
                for (i, k) in sent.iter_mut().enumerate() {
                    *k = rng.random_range(0..m);
                    x[(i, 0)] = constellation[*k];
                }
                let noise = complex_gaussian(&mut rng, n_r, 1);
                let y = (&h * x).scale(amp) + noise;
                let x_hat = chol.solve(&(h.adjoint() * y));
                for i in 0..n_t {
                    if detect(x_hat[(i, 0)], m) != sent[i] {
                        errors[i] += 1;
                    }
                }
            }
            Ok((errors, redraws))
        })
        .collect::<Result<_>>()?;

    let mut totals = vec![0u64; n_t];
    let mut redraws = 0;
    for (errs, r) in parts {
        redraws += r;
        for (t, e) in totals.iter_mut().zip(errs) {
            *t += e;
        }
    }
    warn_redraws(redraws, trials);
    Ok(totals
        .into_iter()
        .map(|e| SimResult::from_counts(trials as u64, e))
        .collect())
}

/// `[W⁻¹]_{ii}` for every stream from the R factor of `H`
/// (`W⁻¹ = R⁻¹ R⁻ᴴ`), or `None` when `H` is numerically rank deficient.
fn inverse_gramian_diagonal(h: &CMatrix) -> Option<Vec<f64>> {
    let n_t = h.ncols();
    let r = h.clone().qr().r();
    let max = (0..n_t).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
    if (0..n_t).any(|i| !(r[(i, i)].norm() > linalg::RANK_RTOL * max)) {
        return None;
    }
    let r_inv = r.solve_upper_triangular(&linalg::identity(n_t))?;
    Some(
        (0..n_t)
            .map(|i| r_inv.row(i).iter().map(|z| z.norm_sqr()).sum())
            .collect(),
    )
}

/// Per-stream ZF SNRs `γ_i = Γ_s / [W⁻¹]_{ii}` over `count` channel draws.
pub fn sample_snr(
    model: &ChannelModel,
    budget: &LinkBudget,
    count: usize,
    seed: u64,
) -> Result<Vec<SnrSamples>> {
    check_count(count)?;
    let sampler = ChannelSampler::new(model)?;
    let n_t = model.n_t();
    let parts: Vec<(Vec<Vec<f64>>, usize)> = chunks(count)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, _, len)| -> Result<(Vec<Vec<f64>>, usize)> {
            let mut rng = substream(seed, c);
            let mut out = vec![Vec::with_capacity(len); n_t];
            let mut redraws = 0;
            let mut filled = 0;
            while filled < len {
                match inverse_gramian_diagonal(&sampler.draw(&mut rng)) {
                    Some(diag) => {
                        for (col, d) in out.iter_mut().zip(diag) {
                            col.push(budget.gamma_s / d);
                        }
                        filled += 1;
                    }
                    None if redraws < MAX_REDRAWS * len => redraws += 1,
                    None => return Err(Error::RankDeficient),
                }
            }
            Ok((out, redraws))
        })
        .collect::<Result<_>>()?;

    let mut streams: Vec<SnrSamples> = (1..=n_t)
        .map(|stream| SnrSamples {
            stream,
            values: Vec::with_capacity(count),
        })
        .collect();
    let mut redraws = 0;
    for (cols, r) in parts {
        redraws += r;
        for (s, col) in streams.iter_mut().zip(cols) {
            s.values.extend(col);
        }
    }
    warn_redraws(redraws, count);
    Ok(streams)
}

/// Schur complements `Γ_1` of the Gramian over `count` channel draws.
pub fn sample_sc(model: &ChannelModel, v: usize, count: usize, seed: u64) -> Result<Vec<CMatrix>> {
    check_count(count)?;
    model.dims(v)?;
    let sampler = ChannelSampler::new(model)?;
    let parts: Vec<(Vec<CMatrix>, usize)> = chunks(count)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, _, len)| -> Result<(Vec<CMatrix>, usize)> {
            let mut rng = substream(seed, c);
            let mut out = Vec::with_capacity(len);
            let mut redraws = 0;
            while out.len() < len {
                match gramian_and_sc(&sampler.draw(&mut rng), v) {
                    Ok(g) => out.push(g.gamma1),
                    Err(Error::RankDeficient) if redraws < MAX_REDRAWS * len => redraws += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok((out, redraws))
        })
        .collect::<Result<_>>()?;
    let redraws = parts.iter().map(|p| p.1).sum();
    warn_redraws(redraws, count);
    Ok(parts.into_iter().flat_map(|p| p.0).collect())
}

/// Outcome of a one-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic 1% critical value `1.63 / √n`.
    pub critical_at_1pct: f64,
    pub reject: bool,
}

/// Kolmogorov–Smirnov test of `samples` against a Gamma SNR law.
pub fn ks_test_gamma(samples: &[f64], dist: &GammaSnrDist) -> Result<KsResult> {
    let n = samples.len();
    if n < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 samples, got {n}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = dist.cdf(x);
            (((i + 1) as f64 / nf) - f).max(f - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    let critical_at_1pct = 1.63 / nf.sqrt();
    Ok(KsResult {
        statistic,
        critical_at_1pct,
        reject: statistic > critical_at_1pct,
    })
}
