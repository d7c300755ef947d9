//! Average symbol-error probability of MPSK over fading, from the SNR m.g.f.:
//!
//! `P_e = (1/π) ∫_0^{(M−1)π/M} M_γ(−sin²(π/M) / sin²θ) dθ`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::quadrature::GaussLegendre;
use crate::snrdist::{mgf_gamma, mgf_gamma1_det, DistKind, GammaSnrDist, Rank1MgfParams};
use crate::{Error, Result};

/// Gauss–Legendre nodes used by every AEP integral.
pub const AEP_NODES: usize = 96;

fn default_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(AEP_NODES))
}

/// How an [`AepPoint`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AepMethod {
    ExactCondition,
    Virtual,
    RiceRayDeterminantal,
    MgfGeneric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AepPoint {
    pub gamma_b_db: f64,
    pub stream: usize,
    pub value: f64,
    pub method: AepMethod,
}

fn check_order(m: usize) -> Result<()> {
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "MPSK order must be a power of two >= 2, got {m}"
        )));
    }
    Ok(())
}

/// Symbol-error probability of MPSK at SNR `gamma` on an AWGN channel.
pub fn instantaneous_pe(gamma: f64, m: usize) -> Result<f64> {
    check_order(m)?;
    if !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "SNR must be >= 0, got {gamma}"
        )));
    }
    let g = (PI / m as f64).sin().powi(2);
    let upper = (m - 1) as f64 * PI / m as f64;
    let integral = default_rule().integrate(0.0, upper, |t| (-gamma * g / t.sin().powi(2)).exp());
    Ok(integral / PI)
}

/// AEP from an m.g.f. with the default node count.
pub fn aep_from_mgf(mgf: impl Fn(f64) -> Result<f64>, m: usize) -> Result<f64> {
    aep_from_mgf_with_rule(mgf, m, default_rule())
}

/// AEP from an m.g.f. with an explicit quadrature rule.
pub fn aep_from_mgf_with_rule(
    mgf: impl Fn(f64) -> Result<f64>,
    m: usize,
    rule: &GaussLegendre,
) -> Result<f64> {
    check_order(m)?;
    let g = (PI / m as f64).sin().powi(2);
    let upper = (m - 1) as f64 * PI / m as f64;
    let integral = rule.try_integrate(0.0, upper, |t| {
        let sin2 = t.sin().powi(2);
        if sin2 == 0.0 {
            return Ok(0.0);
        }
        mgf(-g / sin2)
    })?;
    let value = integral / PI;
    if !value.is_finite() {
        return Err(Error::InvalidArgument("AEP integral is not finite".into()));
    }
    Ok(value)
}

/// AEP of a `Gamma(n, gamma_ki)` SNR (exact under the condition).
pub fn aep_exact_condition(n: usize, gamma_ki: f64, m: usize) -> Result<f64> {
    let d = GammaSnrDist::new(n, gamma_ki, DistKind::Exact)?;
    aep_from_mgf(|s| mgf_gamma(&d, s), m)
}

/// AEP of the virtual `Gamma(n, gamma_hat_ki)` SNR.
pub fn aep_virtual(n: usize, gamma_hat_ki: f64, m: usize) -> Result<f64> {
    let d = GammaSnrDist::new(n, gamma_hat_ki, DistKind::Virtual)?;
    aep_from_mgf(|s| mgf_gamma(&d, s), m)
}

/// Stream-1 AEP for Rician(1)/Rayleigh fading through the determinantal
/// m.g.f. (with its series fallback where `|σ₁|` is tiny).
pub fn aep_rice_ray_det(p: &Rank1MgfParams, m: usize) -> Result<f64> {
    aep_from_mgf(|s| mgf_gamma1_det(p, s), m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snrdist::mgf_gamma1_series;

    /// Adaptive Simpson to an absolute tolerance.
    fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    fn pe_oracle(gamma: f64, m: usize) -> f64 {
        let g = (PI / m as f64).sin().powi(2);
        let f = move |t: f64| {
            let s = t.sin().powi(2);
            if s == 0.0 {
                0.0
            } else {
                (-gamma * g / s).exp()
            }
        };
        adaptive(&f, 0.0, (m - 1) as f64 * PI / m as f64, 1e-14) / PI
    }

    #[test]
    fn pe_examples() {
        for m in [2, 4, 8, 16] {
            let p0 = instantaneous_pe(0.0, m).unwrap();
            assert!((p0 - (m - 1) as f64 / m as f64).abs() < 1e-14);
            assert!(instantaneous_pe(1e6, m).unwrap() <= 1e-12);
        }
        let got = instantaneous_pe(10.0, 4).unwrap();
        assert!((got - pe_oracle(10.0, 4)).abs() < 1e-10);
        assert!(instantaneous_pe(1.0, 3).is_err());
        assert!(instantaneous_pe(-1.0, 4).is_err());
    }

    #[test]
    fn bpsk_closed_form() {
        // M = 2: P_e = Q(sqrt(2γ)) = erfc(sqrt(γ)) / 2
        let gamma: f64 = 1.7;
        // scipy.special.erfc(sqrt(1.7)) / 2
        let q = 0.032_598_209_539_065_04;
        let got = instantaneous_pe(gamma, 2).unwrap();
        assert!((got - q).abs() < 1e-12, "{got:e} vs {q:e}");
    }

    #[test]
    fn aep_from_mgf_examples() {
        let p = aep_from_mgf(|_| Ok(1.0), 4).unwrap();
        assert!((p - 0.75).abs() < 1e-14);
        let d = GammaSnrDist::new(2, 10.0, DistKind::Exact).unwrap();
        let a = aep_from_mgf(|s| mgf_gamma(&d, s), 4).unwrap();
        assert!((a - aep_exact_condition(2, 10.0, 4).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn exact_examples() {
        assert!((aep_exact_condition(2, 1e-20, 4).unwrap() - 0.75).abs() < 1e-9);
        for g in [0.3, 3.0, 30.0] {
            assert!(
                (aep_exact_condition(2, g, 4).unwrap() - aep_virtual(2, g, 4).unwrap()).abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn rayleigh_bpsk_closed_form() {
        // N = 1, M = 2: P_e = (1 − sqrt(Γ/(1+Γ))) / 2
        for g in [0.5f64, 5.0, 50.0] {
            let want = 0.5 * (1.0 - (g / (1.0 + g)).sqrt());
            assert!((aep_exact_condition(1, g, 2).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_aep_matches_adaptive_oracle() {
        for (n, g) in [(1, 0.5), (2, 10.0), (3, 100.0)] {
            let f = move |t: f64| {
                let s = t.sin().powi(2);
                if s == 0.0 {
                    0.0
                } else {
                    (1.0 + 0.5 / s * g).powi(-(n as i32))
                }
            };
            let want = adaptive(&f, 0.0, 0.75 * PI, 1e-14) / PI;
            assert!((aep_exact_condition(n, g, 4).unwrap() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn doubling_nodes_is_stable() {
        let wide = GaussLegendre::new(2 * AEP_NODES);
        let p = Rank1MgfParams::new(5.0, 3.0, 4, 3).unwrap();
        for g in [0.1, 1.0, 10.0, 100.0] {
            let d = GammaSnrDist::new(2, g, DistKind::Exact).unwrap();
            let a = aep_from_mgf(|s| mgf_gamma(&d, s), 4).unwrap();
            let b = aep_from_mgf_with_rule(|s| mgf_gamma(&d, s), 4, &wide).unwrap();
            assert!((a - b).abs() <= 1e-10);
        }
        let a = aep_rice_ray_det(&p, 4).unwrap();
        let b = aep_from_mgf_with_rule(|s| mgf_gamma1_det(&p, s), 4, &wide).unwrap();
        assert!((a - b).abs() <= 1e-10);
    }

    #[test]
    fn determinantal_path() {
        let p = Rank1MgfParams::new(4.0, 1e-12, 4, 3).unwrap();
        let a = aep_rice_ray_det(&p, 4).unwrap();
        assert!((a - aep_exact_condition(2, 4.0, 4).unwrap()).abs() < 1e-6);

        for (g, alpha) in [(0.5, 2.0), (5.0, 8.0), (30.0, 20.0)] {
            let p = Rank1MgfParams::new(g, alpha, 4, 3).unwrap();
            let det = aep_rice_ray_det(&p, 4).unwrap();
            let series = aep_from_mgf(|s| mgf_gamma1_series(&p, s, 1e-16), 4).unwrap();
            assert!((det - series).abs() < 1e-7 * series, "{det} vs {series}");
            let generic = aep_from_mgf(|s| mgf_gamma1_det(&p, s), 4).unwrap();
            assert!((generic - det).abs() < 1e-9);
        }
    }

    #[test]
    fn aep_is_monotone_and_bounded() {
        let mut last = 1.0;
        for db in 0..20 {
            let g = 10f64.powf(db as f64 / 10.0);
            let p = Rank1MgfParams::new(g, 6.0, 4, 3).unwrap();
            let v = aep_rice_ray_det(&p, 4).unwrap();
            assert!((0.0..=0.75).contains(&v));
            assert!(v <= last);
            last = v;
        }
    }
}
