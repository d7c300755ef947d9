//! Hypergeometric functions: scalar `1F1(a; b; x)` by series, `0F0(S, Λ)` of
//! two Hermitian matrix arguments by determinantal formulas, and a Haar
//! Monte Carlo estimate of `0F0` used as an independent check.
//!
//! `0F0(S, Λ) = ∫ etr(S U Λ Uᴴ) dU` over Haar-distributed unitary `U`
//! depends only on the eigenvalues of `S` and `Λ`, which is all the
//! determinantal evaluators take.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::linalg::complex_gaussian;
use crate::rng::{chunks, substream};
use crate::{Error, Result};

/// Term budget of [`f11_series`].
pub const MAX_SERIES_TERMS: usize = 100_000;

/// Relative gap below which two eigenvalues count as coincident.
pub const COINCIDENCE_RTOL: f64 = 1e-8;

/// Above this `σ₁` the exponential row factor is pulled out of the
/// determinant and reapplied in the log domain.
pub const LARGE_SIGMA: f64 = 200.0;

/// `(a)_k = a (a+1) ⋯ (a+k−1)`.
pub fn pochhammer(a: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (a + i as f64))
}

/// `ln φ(n) = Σ_{j=1}^{n} ln (j−1)!`.
pub fn ln_phi(n: usize) -> f64 {
    let mut ln_fact = 0.0;
    let mut acc = 0.0;
    for j in 1..=n {
        if j > 1 {
            ln_fact += ((j - 1) as f64).ln();
        }
        acc += ln_fact;
    }
    acc
}

/// `φ(n) = ∏_{j=1}^{n} (j−1)!`, with `φ(0) = 1`.
pub fn phi(n: usize) -> Result<f64> {
    let mut fact = 1.0;
    let mut acc = 1.0f64;
    for j in 1..=n {
        if j > 1 {
            fact *= (j - 1) as f64;
        }
        acc *= fact;
    }
    if acc.is_finite() {
        Ok(acc)
    } else {
        Err(Error::InvalidArgument(format!(
            "phi({n}) overflows; use ln_phi"
        )))
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k)
        .fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        .round()
}

/// Confluent hypergeometric `1F1(a; b; x)` by its power series.
///
/// For `x < 0` Kummer's transformation `1F1(a; b; x) = eˣ 1F1(b−a; b; −x)`
/// is applied first so the summed terms share one sign.
pub fn f11_series(a: f64, b: f64, x: f64, rtol: f64) -> Result<f64> {
    if b <= 0.0 && b.fract() == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "b = {b} is a nonpositive integer"
        )));
    }
    if !(rtol > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!("bad rtol {rtol} or x {x}")));
    }
    if x < 0.0 {
        return Ok(x.exp() * f11_series_raw(b - a, b, -x, rtol)?);
    }
    f11_series_raw(a, b, x, rtol)
}

fn f11_series_raw(a: f64, b: f64, x: f64, rtol: f64) -> Result<f64> {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for n in 0..MAX_SERIES_TERMS {
        let nf = n as f64;
        let ratio = (a + nf) / (b + nf) * x / (nf + 1.0);
        term *= ratio;
        sum += term;
        if term == 0.0 || (term.abs() <= rtol * sum.abs() && ratio.abs() < 0.5) {
            return Ok(sum);
        }
        if !sum.is_finite() {
            break;
        }
    }
    Err(Error::SeriesDivergence {
        terms: MAX_SERIES_TERMS,
    })
}

/// `0F0` of a single matrix argument: `etr(S)`.
pub fn f00_single(s_eigenvalues: &[f64]) -> f64 {
    s_eigenvalues.iter().sum::<f64>().exp()
}

/// Distinct eigenvalue representatives with their multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    values: Vec<f64>,
    multiplicities: Vec<usize>,
}

impl EigenSpectrum {
    pub fn new(values: Vec<f64>, multiplicities: Vec<usize>) -> Result<Self> {
        if values.is_empty() || values.len() != multiplicities.len() {
            return Err(Error::Spectrum(format!(
                "{} values but {} multiplicities",
                values.len(),
                multiplicities.len()
            )));
        }
        if multiplicities.contains(&0) {
            return Err(Error::Spectrum("multiplicities must be >= 1".into()));
        }
        if values.iter().any(|x| !x.is_finite()) || values.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Spectrum(
                "values must be finite and strictly decreasing".into(),
            ));
        }
        Ok(Self {
            values,
            multiplicities,
        })
    }

    /// Groups `raw` (any order) into distinct values, merging entries whose
    /// gap is below `rtol` times the spectrum scale.
    pub fn from_values(raw: &[f64], rtol: f64) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Spectrum("empty spectrum".into()));
        }
        let mut sorted = raw.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let scale = sorted.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let mut groups: Vec<Vec<f64>> = Vec::new();
        for x in sorted {
            match groups.last_mut() {
                Some(g) if (g[g.len() - 1] - x).abs() <= rtol * scale => g.push(x),
                _ => groups.push(vec![x]),
            }
        }
        let values = groups
            .iter()
            .map(|g| g.iter().sum::<f64>() / g.len() as f64)
            .collect();
        let multiplicities = groups.iter().map(Vec::len).collect();
        Self::new(values, multiplicities)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn total(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    /// Values repeated according to their multiplicities.
    pub fn expanded(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(&x, &m)| std::iter::repeat_n(x, m))
            .collect()
    }

    /// Derivative orders `m − 1, m − 2, …, 0` within each group.
    fn derivative_orders(&self) -> Vec<usize> {
        self.multiplicities
            .iter()
            .flat_map(|&m| (0..m).rev())
            .collect()
    }
}

fn check_distinct(x: &[f64], what: &str) -> Result<()> {
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for w in x.windows(2) {
        if w[0] < w[1] || w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Spectrum(format!(
                "{what} must be finite and decreasing"
            )));
        }
        let gap = (w[0] - w[1]) / scale;
        if gap < COINCIDENCE_RTOL {
            return Err(Error::NearCoincident { gap });
        }
    }
    Ok(())
}

fn vandermonde(x: &[f64]) -> f64 {
    let mut acc = 1.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            acc *= x[i] - x[j];
        }
    }
    acc
}

/// `0F0(S, Λ)` for two spectra with distinct eigenvalues:
/// `φ(n) det(e^{σ_i λ_j}) / (∏_{i<j}(σ_i − σ_j) ∏_{i<j}(λ_i − λ_j))`.
pub fn f00_distinct(sigma: &[f64], lambda: &[f64]) -> Result<f64> {
    let n = sigma.len();
    if n == 0 || n != lambda.len() {
        return Err(Error::Spectrum(format!(
            "spectra of lengths {} and {}",
            n,
            lambda.len()
        )));
    }
    check_distinct(sigma, "sigma")?;
    check_distinct(lambda, "lambda")?;
    let d = DMatrix::from_fn(n, n, |i, j| (sigma[i] * lambda[j]).exp());
    Ok(d.determinant() * phi(n)? / (vandermonde(sigma) * vandermonde(lambda)))
}

/// `∂^a_σ ∂^b_λ e^{σλ} = Σ_{k ≤ min(a,b)} C(b,k) a!/(a−k)! λ^{a−k} σ^{b−k} e^{σλ}`.
pub fn mixed_partial(a: usize, b: usize, sigma: f64, lambda: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..=a.min(b) {
        let falling = factorial(a) / factorial(a - k);
        acc += binomial(b, k) * falling * lambda.powi((a - k) as i32) * sigma.powi((b - k) as i32);
    }
    acc * (sigma * lambda).exp()
}

/// `0F0(S, Λ)` for arbitrary spectra: the continuous extension of the
/// distinct-eigenvalue formula, with each group of `m` equal eigenvalues
/// replaced by derivatives of orders `m−1, …, 0`.
pub fn f00_general(sigma: &EigenSpectrum, lambda: &EigenSpectrum) -> Result<f64> {
    let n = sigma.total();
    if n != lambda.total() {
        return Err(Error::Spectrum(format!(
            "ambient dimensions differ: {n} vs {}",
            lambda.total()
        )));
    }
    let (s, a) = (sigma.expanded(), sigma.derivative_orders());
    let (l, b) = (lambda.expanded(), lambda.derivative_orders());
    if a.len() != n || b.len() != n {
        return Err(Error::Spectrum(
            "derivative order bookkeeping failed".into(),
        ));
    }
    let d = DMatrix::from_fn(n, n, |i, j| mixed_partial(a[i], b[j], s[i], l[j]));

    let group_vandermonde = |sp: &EigenSpectrum| {
        let (v, m) = (sp.values(), sp.multiplicities());
        let mut acc = 1.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                acc *= (v[i] - v[j]).powi((m[i] * m[j]) as i32);
            }
        }
        acc
    };
    let mut norm = phi(n)?;
    for &m in sigma.multiplicities().iter().chain(lambda.multiplicities()) {
        norm /= phi(m)?;
    }
    Ok(d.determinant() * norm / (group_vandermonde(sigma) * group_vandermonde(lambda)))
}

/// Smallest `|σ₁|` at which [`f00_rank1_idempotent`] uses the determinant;
/// below it the ratio `Δ₂ / σ₁^{n_r−1}` loses too many digits and the
/// `1F1` series is used instead. The cancellation worsens with `n_r`, so the
/// threshold grows with it.
pub fn rank1_threshold(n_r: usize) -> f64 {
    if n_r <= 5 {
        0.05
    } else {
        0.05 * 4f64.powi((n_r - 5) as i32)
    }
}

/// Parameters of `0F0(S, Λ)` with `S` rank one and `Λ` idempotent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rank1IdemParams {
    /// Nonzero eigenvalue of `S`.
    pub sigma1: f64,
    /// Rank of `Λ`.
    pub n: usize,
    /// Ambient dimension.
    pub n_r: usize,
}

impl Rank1IdemParams {
    pub fn new(sigma1: f64, n: usize, n_r: usize) -> Result<Self> {
        if n == 0 || n > n_r {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= N <= N_R, got N={n}, N_R={n_r}"
            )));
        }
        if !sigma1.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma1 = {sigma1}")));
        }
        Ok(Self { sigma1, n, n_r })
    }
}

/// Determinant of the `n_r × n_r` matrix whose first `v` rows carry the
/// nonzero eigenvalues of `S` and whose remaining rows hold the integer
/// entries produced by the zero eigenvalues and the idempotent `Λ` of rank
/// `n_v`. Rows with `σ_i > LARGE_SIGMA` are divided by `e^{σ_i}`; the return
/// value is `(det, ln of the factored-out scale)`.
fn delta_idempotent(sigma: &[f64], n_v: usize, n_r: usize) -> (f64, f64) {
    let v = sigma.len();
    let mut ln_scale = 0.0;
    let mut d = DMatrix::<f64>::zeros(n_r, n_r);
    for i in 0..n_r {
        if i < v {
            let s = sigma[i];
            let (e, tail) = if s > LARGE_SIGMA {
                ln_scale += s;
                (1.0, (-s).exp())
            } else {
                (s.exp(), 1.0)
            };
            for j in 0..n_r {
                d[(i, j)] = if j < n_v {
                    e * s.powi((n_v - 1 - j) as i32)
                } else {
                    tail * s.powi((n_r - 1 - j) as i32)
                };
            }
        } else {
            let below = n_r - 1 - i;
            for j in 0..n_r {
                d[(i, j)] = if j < n_v {
                    let order = n_v - 1 - j;
                    if below >= order {
                        factorial(order) * binomial(below, order)
                    } else {
                        0.0
                    }
                } else if i == j {
                    factorial(below)
                } else {
                    0.0
                };
            }
        }
    }
    (d.determinant(), ln_scale)
}

/// `Δ₁(N_v, N_R, S)` for the nonzero eigenvalues `sigma` of a rank-`v` `S`.
pub fn delta1(n_v: usize, n_r: usize, sigma: &[f64]) -> f64 {
    let (det, ln_scale) = delta_idempotent(sigma, n_v, n_r);
    det * ln_scale.exp()
}

/// `Δ₂(N, N_R, σ₁)`, the rank-one case of [`delta1`].
pub fn delta2(n: usize, n_r: usize, sigma1: f64) -> f64 {
    delta1(n, n_r, &[sigma1])
}

/// `0F0(S, Λ)` with `S` of rank `v` (distinct nonzero eigenvalues
/// `sigma_nonzero`) and `Λ` idempotent of rank `n_v`.
pub fn f00_rank_v_idempotent(sigma_nonzero: &[f64], n_v: usize, n_r: usize) -> Result<f64> {
    let v = sigma_nonzero.len();
    if v == 0 || v >= n_r || n_v == 0 || n_v > n_r {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= v < N_R and 1 <= N_v <= N_R, got v={v}, N_v={n_v}, N_R={n_r}"
        )));
    }
    let threshold = rank1_threshold(n_r);
    if sigma_nonzero.iter().any(|s| !(s.abs() >= threshold)) {
        return Err(Error::SmallEigenvalue);
    }
    let mut sorted = sigma_nonzero.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    check_distinct(&sorted, "sigma")?;

    let (det, ln_scale) = delta_idempotent(sigma_nonzero, n_v, n_r);
    let mut denom = 1.0;
    for i in 0..v {
        for j in i + 1..v {
            denom *= sigma_nonzero[i] - sigma_nonzero[j];
        }
    }
    let ln_norm = ln_phi(n_r) - ln_phi(n_r - v) - ln_phi(n_r - n_v) - ln_phi(n_v);
    let ln_powers: f64 = sigma_nonzero
        .iter()
        .map(|s| (n_r - v) as f64 * s.abs().ln())
        .sum();
    let sign = sigma_nonzero
        .iter()
        .filter(|s| **s < 0.0)
        .count()
        .checked_mul(n_r - v)
        .map_or(1.0, |k| if k % 2 == 0 { 1.0 } else { -1.0 });
    let value = sign * det / denom * (ln_norm - ln_powers + ln_scale).exp();
    if !value.is_finite() {
        return Err(Error::InvalidArgument(
            "0F0 overflows double precision".into(),
        ));
    }
    Ok(value)
}

/// `A = (N_R − 1)! / (φ(N) φ(N_R − N))`.
pub fn rank1_prefactor(n: usize, n_r: usize) -> f64 {
    (ln_factorial(n_r - 1) - ln_phi(n) - ln_phi(n_r - n)).exp()
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `A Δ₂(N, N_R, σ₁) / σ₁^{N_R−1}` with no small-argument fallback.
/// By the rank-one identity this equals `1F1(N; N_R; σ₁)`.
pub fn f11_determinantal(n: usize, n_r: usize, sigma1: f64) -> Result<f64> {
    Rank1IdemParams::new(sigma1, n, n_r)?;
    if sigma1 == 0.0 {
        return Err(Error::SmallEigenvalue);
    }
    let (det, ln_scale) = delta_idempotent(&[sigma1], n, n_r);
    let k = n_r - 1;
    let sign = if sigma1 < 0.0 && k % 2 == 1 {
        -1.0
    } else {
        1.0
    };
    let ln_mag =
        ln_factorial(k) - ln_phi(n) - ln_phi(n_r - n) + ln_scale - k as f64 * sigma1.abs().ln();
    let value = sign * det * ln_mag.exp();
    if !value.is_finite() {
        return Err(Error::InvalidArgument(
            "1F1 overflows double precision".into(),
        ));
    }
    Ok(value)
}

/// `0F0(S, Λ)` for rank-one `S` and idempotent `Λ` of rank `N`.
///
/// Uses the determinantal form for `|σ₁| ≥ rank1_threshold(N_R)` and the
/// equivalent series `1F1(N; N_R; σ₁)` below it.
pub fn f00_rank1_idempotent(p: Rank1IdemParams) -> Result<f64> {
    let p = Rank1IdemParams::new(p.sigma1, p.n, p.n_r)?;
    if p.sigma1.abs() < rank1_threshold(p.n_r) {
        return f11_series(p.n as f64, p.n_r as f64, p.sigma1, 1e-16);
    }
    f11_determinantal(p.n, p.n_r, p.sigma1)
}

/// Monte Carlo estimate of `0F0(S, Λ) = E{etr(S U Λ Uᴴ)}` for diagonal
/// `S`, `Λ` and Haar `U`; returns `(mean, standard error)`.
///
/// `U` is the Q factor of a complex Gaussian matrix with the phases of the
/// diagonal of R moved into Q, which makes its law exactly Haar.
pub fn haar_oracle(
    s_diag: &[f64],
    lambda_diag: &[f64],
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let n = s_diag.len();
    if n == 0 || n != lambda_diag.len() {
        return Err(Error::Spectrum(
            "diagonals must be nonempty and of equal length".into(),
        ));
    }
    if samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "need >= 1000 samples, got {samples}"
        )));
    }
    let parts: Vec<(usize, f64, f64)> = chunks(samples)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, _, len)| {
            let mut rng = substream(seed, c);
            let (mut mean, mut m2) = (0.0, 0.0);
            for k in 0..len {
                let u = haar_unitary(&mut rng, n);
                let mut tr = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        tr += s_diag[i] * u[(i, j)].norm_sqr() * lambda_diag[j];
                    }
                }
                let x = tr.exp();
                let delta = x - mean;
                mean += delta / (k + 1) as f64;
                m2 += delta * (x - mean);
            }
            (len, mean, m2)
        })
        .collect();

    let (mut count, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for (len, mu, q) in parts {
        let total = count + len;
        let delta = mu - mean;
        mean += delta * len as f64 / total as f64;
        m2 += q + delta * delta * (count as f64 * len as f64) / total as f64;
        count = total;
    }
    let var = m2 / (count - 1) as f64;
    Ok((mean, (var / count as f64).sqrt()))
}

/// Haar-distributed `n × n` unitary.
pub fn haar_unitary<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> crate::CMatrix {
    let z = complex_gaussian(rng, n, n);
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let norm = d.norm();
        if norm > 0.0 {
            let phase = d / norm;
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}
