//! Acceptance checks, one line per criterion.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zf_rician::channel::{ChannelModel, LinkBudget};
use zf_rician::cli::{
    build_model, run_experiment, ExperimentConfig, FadingCase, Method, ResultRow, Scenario,
};
use zf_rician::hypergeom::{
    f00_distinct, f00_rank1_idempotent, f00_rank_v_idempotent, f11_determinantal, f11_series,
    haar_oracle, Rank1IdemParams,
};
use zf_rician::linalg::{complex_gaussian, frobenius, identity};
use zf_rician::mcsim::{ks_test_gamma, sample_sc, sample_snr};
use zf_rician::schur::{conditional_params, impose_condition, theorem2_residual};
use zf_rician::snrdist::{
    exact_gamma_snr, mgf_gamma1_det, mgf_gamma1_series, mgf_sc_rician_rayleigh, Rank1MgfParams,
};
use zf_rician::{CMatrix, C64};

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (lo.ln() + (hi / lo).ln() * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = complex_gaussian(rng, n, n);
    g.adjoint() * g + identity(n).scale(0.2)
}

/// Distinct values in `[lo, hi)` with pairwise gaps of at least `gap`,
/// sorted in decreasing order.
fn spread(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        x.sort_by(|a, b| b.total_cmp(a));
        if x.windows(2).all(|w| w[0] - w[1] >= gap) {
            return x;
        }
    }
}

fn grid_config(
    scenario: Scenario,
    case: FadingCase,
    methods: &[Method],
    trials: usize,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        scenario,
        fading_case: case,
        gamma_b_grid_db: (0..=14).map(f64::from).collect(),
        trials,
        seed,
        methods: methods.iter().copied().collect(),
        ..Default::default()
    }
}

fn sim_contains(r: &ResultRow, value: f64) -> bool {
    (value - r.ser_sim.unwrap()).abs() <= r.ser_ci.unwrap()
}

fn hypergeometric_identity() -> Outcome {
    let mut worst_f00 = 0.0f64;
    let mut worst_det = 0.0f64;
    let mut cases = 0;
    for n_r in 1..=6 {
        for n in 1..=n_r {
            for sigma in log_grid(0.1, 50.0, 20) {
                let series =
                    f11_series(n as f64, n_r as f64, sigma, 1e-16).map_err(|e| e.to_string())?;
                let f00 = f00_rank1_idempotent(Rank1IdemParams::new(sigma, n, n_r).unwrap())
                    .map_err(|e| e.to_string())?;
                let det = f11_determinantal(n, n_r, sigma).map_err(|e| e.to_string())?;
                worst_f00 = worst_f00.max(rel(f00, series));
                worst_det = worst_det.max(rel(det, series));
                cases += 1;
            }
        }
    }
    let detail = format!(
        "{cases} cases, max rel diff {worst_f00:.2e} (determinantal form alone {worst_det:.2e})"
    );
    if worst_f00 <= 1e-7 && worst_det <= 1e-7 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn haar_validation() -> Outcome {
    const SAMPLES: usize = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let n = if case < 10 { 3 } else { 4 };
        let s = spread(&mut rng, n, -1.5, 1.5, 0.1);
        let l = spread(&mut rng, n, -1.0, 1.0, 0.1);
        let exact = f00_distinct(&s, &l).map_err(|e| e.to_string())?;
        let (est, se) = haar_oracle(&s, &l, SAMPLES, 100 + case).map_err(|e| e.to_string())?;
        let z = (est - exact).abs() / se;
        worst = worst.max(z);
        if z > 3.0 {
            return Err(format!("distinct case {case}: {est} ± {se} vs {exact}"));
        }
    }
    for case in 0..5 {
        let mut sigma = spread(&mut rng, 2, -2.5, 2.5, 0.2);
        while sigma.iter().any(|x| x.abs() < 0.3) {
            sigma = spread(&mut rng, 2, -2.5, 2.5, 0.2);
        }
        let exact = f00_rank_v_idempotent(&sigma, 3, 4).map_err(|e| e.to_string())?;
        let s = [sigma[0], sigma[1], 0.0, 0.0];
        let (est, se) = haar_oracle(&s, &[1.0, 1.0, 1.0, 0.0], SAMPLES, 200 + case)
            .map_err(|e| e.to_string())?;
        let z = (est - exact).abs() / se;
        worst = worst.max(z);
        if z > 3.0 {
            return Err(format!("rank-2 case {case}: {est} ± {se} vs {exact}"));
        }
    }
    Ok(format!(
        "25 cases at {SAMPLES} samples, max |error| {worst:.2} SE"
    ))
}

fn condition_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut max_holds = 0.0f64;
    let mut min_broken = f64::INFINITY;
    for _ in 0..500 {
        let n_t = rng.random_range(2..=4);
        let n_r = rng.random_range(n_t..=6);
        let v = rng.random_range(1..n_t);
        let r = random_pd(&mut rng, n_t);
        let mean = complex_gaussian(&mut rng, n_r, n_t);
        let k = rng.random_range(0.5..10.0);
        let base = ChannelModel::from_parts(&r, &mean, k).map_err(|e| e.to_string())?;
        let holds = impose_condition(&base, v).map_err(|e| e.to_string())?;
        max_holds = max_holds.max(theorem2_residual(&holds, v).map_err(|e| e.to_string())?);

        let mut hd = holds.h_d().clone();
        let e = complex_gaussian(&mut rng, n_r, v);
        let step = e.scale(1e-2 * frobenius(&hd) / frobenius(&e));
        let mut cols = hd.columns_mut(0, v);
        cols += step;
        let broken = ChannelModel::from_parts(holds.r_t(), &hd, k).map_err(|e| e.to_string())?;
        min_broken = min_broken.min(theorem2_residual(&broken, v).map_err(|e| e.to_string())?);
    }
    let detail = format!(
        "max residual with condition {max_holds:.2e}, min residual perturbed {min_broken:.2e}"
    );
    if max_holds <= 1e-10 && min_broken > 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gamma_law_under_condition() -> Outcome {
    const COUNT: usize = 100_000;
    let cfg = ExperimentConfig {
        scenario: Scenario::B1,
        fading_case: FadingCase::RiceRiceCondition,
        v: 2,
        ..Default::default()
    };
    let model = build_model(&cfg).map_err(|e| e.to_string())?;
    let rayleigh =
        ChannelModel::from_parts(model.r_t(), model.h_d(), 0.0).map_err(|e| e.to_string())?;
    let budget = LinkBudget::from_gamma_b_db(10.0, cfg.n_t, cfg.m).map_err(|e| e.to_string())?;
    let samples = sample_snr(&model, &budget, COUNT, 4).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for stream in 1..=cfg.v {
        let d =
            exact_gamma_snr(&model, stream, budget.gamma_s, cfg.v).map_err(|e| e.to_string())?;
        let d0 =
            exact_gamma_snr(&rayleigh, stream, budget.gamma_s, cfg.v).map_err(|e| e.to_string())?;
        let values = &samples[stream - 1].values;
        let ks = ks_test_gamma(values, &d).map_err(|e| e.to_string())?;
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mean_err = rel(mean, d.mean());
        let scale_err = rel(d.scale * (model.k_factor() + 1.0), d0.scale);
        parts.push(format!(
            "stream {stream}: KS {:.4} < {:.4}, mean err {:.2}%, (K+1) scaling err {scale_err:.1e}",
            ks.statistic,
            ks.critical_at_1pct,
            100.0 * mean_err
        ));
        if ks.reject || mean_err > 0.01 || scale_err > 1e-12 {
            return Err(parts.join("; "));
        }
    }
    Ok(parts.join("; "))
}

fn condition_curves() -> Outcome {
    let cfg = grid_config(
        Scenario::B1,
        FadingCase::RiceRiceCondition,
        &[Method::Exact, Method::Approx, Method::Sim],
        100_000,
        5,
    );
    let out = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let gap = out
        .summary
        .max_abs_exact_minus_approx
        .unwrap_or(f64::INFINITY);
    let mut checked = 0;
    for r in &out.rows {
        let exact = r.aep_exact.unwrap();
        if exact >= 1e-3 {
            checked += 1;
            if !sim_contains(r, exact) {
                return Err(format!(
                    "{} dB: exact {exact:.4e} outside sim {:.4e} ± {:.1e}",
                    r.gamma_b_db,
                    r.ser_sim.unwrap(),
                    r.ser_ci.unwrap()
                ));
            }
        }
    }
    let detail =
        format!("max |exact - approx| {gap:.1e}, sim agrees with exact at {checked} points");
    if gap <= 1e-10 && checked > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rice_ray_curves() -> Outcome {
    let cfg = grid_config(
        Scenario::A1,
        FadingCase::RiceRay,
        &[Method::Approx, Method::Determinantal, Method::Sim],
        100_000,
        6,
    );
    let out = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let mut checked = 0;
    let mut approx_outside = 0;
    for r in &out.rows {
        let det = r.aep_det.unwrap();
        if det >= 1e-3 {
            checked += 1;
            if !sim_contains(r, det) {
                return Err(format!(
                    "{} dB: determinantal {det:.4e} outside sim CI",
                    r.gamma_b_db
                ));
            }
        }
        if !sim_contains(r, r.aep_approx.unwrap()) {
            approx_outside += 1;
        }
    }
    let detail = format!(
        "determinantal inside CI at {checked} points, approximation outside at {approx_outside}"
    );
    if checked > 0 && approx_outside >= 1 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mgf_path_independence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = log_grid(0.01, 1e3, 40);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n_r = rng.random_range(2..=6);
        let n_t = rng.random_range(2..=n_r);
        let gamma_k1 = (rng.random_range(-2.0..2.0f64) * std::f64::consts::LN_10).exp();
        let alpha = rng.random_range(0.0..8.0);
        let p = Rank1MgfParams::new(gamma_k1, alpha, n_r, n_t).map_err(|e| e.to_string())?;
        for &s in &grid {
            let det = mgf_gamma1_det(&p, -s).map_err(|e| e.to_string())?;
            let series = mgf_gamma1_series(&p, -s, 1e-16).map_err(|e| e.to_string())?;
            worst = worst.max(rel(det, series));
        }
    }
    let detail = format!("100 parameter sets x 40 points, max rel diff {worst:.2e}");
    if worst <= 1e-7 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rician_rayleigh_sc_mgf() -> Outcome {
    const COUNT: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let v = 2;
    let mut worst = 0.0f64;
    for model_idx in 0..5u64 {
        let r = random_pd(&mut rng, 3);
        let mut mean = complex_gaussian(&mut rng, 4, 3);
        mean.columns_mut(v, 1).fill(C64::new(0.0, 0.0));
        let k = rng.random_range(1.0..8.0);
        let model = ChannelModel::from_parts(&r, &mean, k).map_err(|e| e.to_string())?;
        let blocks = conditional_params(&model, v).map_err(|e| e.to_string())?;
        let dims = model.dims(v).map_err(|e| e.to_string())?;
        let draws = sample_sc(&model, v, COUNT, 300 + model_idx).map_err(|e| e.to_string())?;
        let mean_diag: Vec<f64> = (0..v)
            .map(|j| draws.iter().map(|g| g[(j, j)].re).sum::<f64>() / COUNT as f64)
            .collect();
        for _ in 0..5 {
            let mut theta = CMatrix::zeros(v, v);
            for j in 0..v {
                let c = rng.random_range(0.1..1.5);
                theta[(j, j)] = C64::new(-c / mean_diag[j], 0.0);
            }
            let want = mgf_sc_rician_rayleigh(&theta, &blocks, &dims).map_err(|e| e.to_string())?;
            let vals: Vec<f64> = draws
                .iter()
                .map(|g| (&theta * g).trace().re.exp())
                .collect();
            let mu = vals.iter().sum::<f64>() / COUNT as f64;
            let var = vals.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (COUNT - 1) as f64;
            let se = (var / COUNT as f64).sqrt();
            let z = (mu - want).abs() / se;
            worst = worst.max(z);
            if z > 3.0 {
                return Err(format!(
                    "model {model_idx}: empirical {mu} ± {se} vs {want}"
                ));
            }
        }
    }
    Ok(format!(
        "25 cases at {COUNT} samples, max |error| {worst:.2} SE"
    ))
}

fn interference_phenomenon() -> Outcome {
    const TRIALS: usize = 200_000;
    let grid: Vec<f64> = (0..=7).map(|k| 2.0 * k as f64).collect();
    let run = |scenario, case, methods: &[Method]| {
        let mut cfg = grid_config(scenario, case, methods, TRIALS, 9);
        cfg.gamma_b_grid_db = grid.clone();
        run_experiment(&cfg).map_err(|e| e.to_string())
    };
    let outside = |rows: &[ResultRow]| {
        rows.iter()
            .filter(|r| !sim_contains(r, r.aep_approx.unwrap()))
            .count()
    };

    let a1 = run(
        Scenario::A1,
        FadingCase::RayRiceCorr,
        &[Method::Approx, Method::Sim],
    )?;
    let b1 = run(
        Scenario::B1,
        FadingCase::RayRiceCorr,
        &[Method::Approx, Method::Sim],
    )?;
    let b1_rayleigh = run(Scenario::B1, FadingCase::RayleighOnly, &[Method::Sim])?;
    let (a1_out, b1_out) = (outside(&a1.rows), outside(&b1.rows));
    let high = grid.len() - 1;
    let (rician, rayleigh) = (
        b1.rows[high].ser_sim.unwrap(),
        b1_rayleigh.rows[high].ser_sim.unwrap(),
    );
    let detail = format!(
        "A1 approximation outside CI at {a1_out}/{n} points, B1 at {b1_out}/{n}; \
         B1 at {} dB: Rician interference {rician:.3e} vs Rayleigh {rayleigh:.3e}",
        grid[high],
        n = grid.len()
    );
    let rician_better = (grid.len() / 2..grid.len())
        .all(|k| b1.rows[k].ser_sim.unwrap() < b1_rayleigh.rows[k].ser_sim.unwrap());
    if a1_out == 0 && b1_out >= 1 && rician_better {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "rank-one 0F0 equals 1F1",
            budget: Duration::from_secs(5),
            run: hypergeometric_identity,
        },
        Criterion {
            name: "closed-form 0F0 vs Haar average",
            budget: Duration::from_secs(120),
            run: haar_validation,
        },
        Criterion {
            name: "virtual and actual Schur complements coincide iff condition holds",
            budget: Duration::from_secs(30),
            run: condition_equivalence,
        },
        Criterion {
            name: "Gamma SNR law under the condition",
            budget: Duration::from_secs(60),
            run: gamma_law_under_condition,
        },
        Criterion {
            name: "B1 full-Rician under condition: exact = approx = sim",
            budget: Duration::from_secs(300),
            run: condition_curves,
        },
        Criterion {
            name: "A1 Rician/Rayleigh: determinantal = sim, approx differs",
            budget: Duration::from_secs(300),
            run: rice_ray_curves,
        },
        Criterion {
            name: "stream-1 m.g.f. determinantal vs series",
            budget: Duration::from_secs(10),
            run: mgf_path_independence,
        },
        Criterion {
            name: "Rician/Rayleigh Schur-complement m.g.f. vs Monte Carlo",
            budget: Duration::from_secs(180),
            run: rician_rayleigh_sc_mgf,
        },
        Criterion {
            name: "Rayleigh/Rician interference: correlation decides accuracy and ranking",
            budget: Duration::from_secs(600),
            run: interference_phenomenon,
        },
    ];
    let mut failures = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) => (elapsed <= c.budget, d),
            Err(d) => (false, d),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "{} [{}] {} ({:.2} s, budget {} s): {}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            c.name,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
