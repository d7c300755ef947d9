//! Scenario-driven experiment runner.
//!
//! An [`ExperimentConfig`] pairs a scenario preset with one of five fading
//! cases and lists the methods to evaluate over a grid of per-bit SNRs.
//! [`run_experiment`] produces one [`ResultRow`] per grid point and analysed
//! stream, plus a [`RunSummary`]; [`emit_csv`] writes the rows as CSV.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::aep::{aep_exact_condition, aep_from_mgf, aep_rice_ray_det, aep_virtual};
use crate::channel::{build_correlation_matrix, ChannelModel, FadingSpec, LinkBudget};
use crate::linalg::complex_gaussian;
use crate::mcsim::simulate_ser;
use crate::rng::derive_seed;
use crate::schur::{check_condition, impose_condition, DEFAULT_CONDITION_TOL};
use crate::snrdist::{exact_gamma_snr, mgf_gamma1_series, rank1_params, virtual_gamma_snr};
use crate::{CMatrix, Error, Result, C64};

/// CSV header written by [`emit_csv`].
pub const CSV_HEADER: [&str; 7] = [
    "gamma_b_db",
    "stream",
    "aep_exact",
    "aep_approx",
    "aep_det",
    "ser_sim",
    "ser_ci_3sigma",
];

/// Seed of the fixed line-of-sight matrix shared by the presets.
pub const PRESET_MEAN_SEED: u64 = 42;

const SERIES_RTOL: f64 = 1e-14;

/// Physical parameters of a scenario.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    pub k_db: f64,
    pub azimuth_spread_deg: f64,
    #[serde(default = "default_center")]
    pub center_azimuth_deg: f64,
    /// Element spacing in half wavelengths.
    #[serde(default = "default_spacing")]
    pub antenna_spacing: f64,
    /// Seed of the `CN(0, 1)` draw used as the unnormalised mean.
    #[serde(default = "default_mean_seed")]
    pub mean_seed: u64,
}

fn default_center() -> f64 {
    5.0
}

fn default_spacing() -> f64 {
    1.0
}

fn default_mean_seed() -> u64 {
    PRESET_MEAN_SEED
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Scenario {
    /// Urban microcell: `K = 9 dB`, `AS = 3°`.
    #[serde(rename = "B1", alias = "b1")]
    B1,
    /// Indoor office: `K = 7 dB`, `AS = 51°`.
    #[serde(rename = "A1", alias = "a1")]
    A1,
    /// Parameters taken from the `[custom]` table.
    #[serde(rename = "custom")]
    Custom,
}

impl Scenario {
    /// Parameters of a named preset; `None` for [`Scenario::Custom`].
    pub fn preset(self) -> Option<ScenarioParams> {
        let (k_db, azimuth_spread_deg) = match self {
            Scenario::B1 => (9.0, 3.0),
            Scenario::A1 => (7.0, 51.0),
            Scenario::Custom => return None,
        };
        Some(ScenarioParams {
            k_db,
            azimuth_spread_deg,
            center_azimuth_deg: default_center(),
            antenna_spacing: default_spacing(),
            mean_seed: PRESET_MEAN_SEED,
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "b1" => Ok(Scenario::B1),
            "a1" => Ok(Scenario::A1),
            "custom" => Ok(Scenario::Custom),
            _ => Err(Error::Config(format!(
                "unknown scenario `{s}` (expected B1, A1 or custom)"
            ))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::B1 => "B1",
            Scenario::A1 => "A1",
            Scenario::Custom => "custom",
        })
    }
}

/// Which transmit streams see a line-of-sight component.
///
/// Streams `1..=v` are the intended block, the rest interfere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingCase {
    /// `K = 0`.
    RayleighOnly,
    /// Rayleigh intended streams, Rician interferers, intended and
    /// interfering fading uncorrelated.
    RayRiceUncorr,
    /// Rician everywhere with the intended mean tied to the interfering mean
    /// through the correlation so that the condition holds.
    RiceRiceCondition,
    /// Rician intended streams, Rayleigh interferers.
    RiceRay,
    /// Rayleigh intended streams, Rician interferers, scenario correlation.
    RayRiceCorr,
}

impl FadingCase {
    pub const ALL: [FadingCase; 5] = [
        FadingCase::RayleighOnly,
        FadingCase::RayRiceUncorr,
        FadingCase::RiceRiceCondition,
        FadingCase::RiceRay,
        FadingCase::RayRiceCorr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FadingCase::RayleighOnly => "rayleigh_only",
            FadingCase::RayRiceUncorr => "ray_rice_uncorr",
            FadingCase::RiceRiceCondition => "rice_rice_condition",
            FadingCase::RiceRay => "rice_ray",
            FadingCase::RayRiceCorr => "ray_rice_corr",
        }
    }

    /// Methods evaluated when the configuration does not list any.
    pub fn default_methods(self) -> BTreeSet<Method> {
        let list: &[Method] = match self {
            FadingCase::RiceRay => &[
                Method::Exact,
                Method::Approx,
                Method::Determinantal,
                Method::Sim,
            ],
            FadingCase::RayRiceCorr => &[Method::Approx, Method::Sim],
            _ => &[Method::Exact, Method::Approx, Method::Sim],
        };
        list.iter().copied().collect()
    }
}

impl FromStr for FadingCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FadingCase::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = FadingCase::ALL.iter().map(|c| c.name()).collect();
                Error::Config(format!(
                    "unknown fading case `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

impl fmt::Display for FadingCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact Gamma law, or the series m.g.f. for `rice_ray`.
    Exact,
    /// Virtual Gamma law.
    Approx,
    /// Determinantal m.g.f. (`rice_ray` with `v = 1` only).
    Determinantal,
    /// Monte Carlo link simulation.
    Sim,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "approx" => Ok(Method::Approx),
            "determinantal" => Ok(Method::Determinantal),
            "sim" => Ok(Method::Sim),
            _ => Err(Error::Config(format!(
                "unknown method `{s}` (expected exact, approx, determinantal or sim)"
            ))),
        }
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(s: &str) -> Result<BTreeSet<Method>> {
    s.split(',').map(|t| t.trim().parse()).collect()
}

/// Parses `start:step:stop` (inclusive) or a comma-separated list of dB
/// values.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("bad number `{t}` in grid `{s}`")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0) || !(stop >= start) {
                return Err(Error::Config(format!(
                    "grid `{s}` needs step > 0 and stop >= start"
                )));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|k| start + k as f64 * step).collect())
        }
        [_] => s.split(',').map(num).collect(),
        _ => Err(Error::Config(format!(
            "grid `{s}` is neither start:step:stop nor a list"
        ))),
    }
}

/// One experiment: scenario, fading case, dimensions and methods.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_scenario")]
    pub scenario: Scenario,
    #[serde(default = "default_case")]
    pub fading_case: FadingCase,
    #[serde(default = "default_n_r")]
    pub n_r: usize,
    #[serde(default = "default_n_t")]
    pub n_t: usize,
    #[serde(default = "default_v")]
    pub v: usize,
    /// MPSK order.
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_grid")]
    pub gamma_b_grid_db: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Empty means the case defaults.
    #[serde(default)]
    pub methods: BTreeSet<Method>,
    /// Parameters of the `custom` scenario.
    #[serde(default)]
    pub custom: Option<ScenarioParams>,
}

fn default_scenario() -> Scenario {
    Scenario::B1
}

fn default_case() -> FadingCase {
    FadingCase::RiceRiceCondition
}

fn default_n_r() -> usize {
    4
}

fn default_n_t() -> usize {
    3
}

fn default_v() -> usize {
    1
}

fn default_m() -> usize {
    4
}

fn default_grid() -> Vec<f64> {
    (0..=10).map(|k| 2.0 * k as f64).collect()
}

fn default_trials() -> usize {
    100_000
}

fn default_seed() -> u64 {
    1
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: default_scenario(),
            fading_case: default_case(),
            n_r: default_n_r(),
            n_t: default_n_t(),
            v: default_v(),
            m: default_m(),
            gamma_b_grid_db: default_grid(),
            trials: default_trials(),
            seed: default_seed(),
            methods: BTreeSet::new(),
            custom: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Requested methods, or the case defaults when none are listed.
    pub fn effective_methods(&self) -> BTreeSet<Method> {
        if self.methods.is_empty() {
            let mut methods = self.fading_case.default_methods();
            if self.fading_case == FadingCase::RiceRay && self.v != 1 {
                methods.remove(&Method::Exact);
                methods.remove(&Method::Determinantal);
            }
            methods
        } else {
            self.methods.clone()
        }
    }

    pub fn scenario_params(&self) -> Result<ScenarioParams> {
        match self.scenario.preset() {
            Some(p) => Ok(p),
            None => self
                .custom
                .clone()
                .ok_or_else(|| Error::Config("scenario `custom` needs a [custom] table".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::channel::SystemDims::new(self.n_r, self.n_t, self.v)?;
        if self.m < 2 || !self.m.is_power_of_two() {
            return Err(Error::Config(format!(
                "MPSK order must be a power of two >= 2, got {}",
                self.m
            )));
        }
        let grid = &self.gamma_b_grid_db;
        if grid.is_empty() {
            return Err(Error::Config("gamma_b_grid_db is empty".into()));
        }
        if grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(
                "gamma_b_grid_db must be finite and strictly increasing".into(),
            ));
        }
        let methods = self.effective_methods();
        if methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if methods.contains(&Method::Sim) && self.trials < 1000 {
            return Err(Error::Config(format!(
                "sim needs trials >= 1000, got {}",
                self.trials
            )));
        }
        let case = self.fading_case;
        if methods.contains(&Method::Exact) {
            match case {
                FadingCase::RayRiceCorr => {
                    return Err(Error::NoClosedForm(
                        "the SNR law of ray_rice_corr is unknown".into(),
                    ))
                }
                FadingCase::RiceRay if self.v != 1 => {
                    return Err(Error::NoClosedForm(
                        "rice_ray is tractable for v = 1 only".into(),
                    ))
                }
                _ => {}
            }
        }
        if methods.contains(&Method::Determinantal) && !(case == FadingCase::RiceRay && self.v == 1)
        {
            return Err(Error::Config(format!(
                "determinantal applies to rice_ray with v = 1, not {case} with v = {}",
                self.v
            )));
        }
        let params = self.scenario_params()?;
        if !params.k_db.is_finite() {
            return Err(Error::Config(format!(
                "K must be finite in dB, got {}",
                params.k_db
            )));
        }
        Ok(())
    }
}

/// The fixed `CN(0, 1)` matrix used as unnormalised mean.
pub fn preset_mean(n_r: usize, n_t: usize, seed: u64) -> CMatrix {
    complex_gaussian(&mut ChaCha8Rng::seed_from_u64(seed), n_r, n_t)
}

/// Channel model of `cfg`'s scenario and fading case.
pub fn build_model(cfg: &ExperimentConfig) -> Result<ChannelModel> {
    let params = cfg.scenario_params()?;
    let (n_r, n_t, v) = (cfg.n_r, cfg.n_t, cfg.v);
    let mut mean = preset_mean(n_r, n_t, params.mean_seed);
    let spec = FadingSpec::from_db(
        params.k_db,
        params.azimuth_spread_deg,
        params.center_azimuth_deg,
        params.antenna_spacing,
        mean.clone(),
    )?;
    let mut r_t = build_correlation_matrix(&spec, n_t)?;
    let zero = C64::new(0.0, 0.0);
    let k = spec.k_factor;
    match cfg.fading_case {
        FadingCase::RayleighOnly => ChannelModel::from_parts(&r_t, &mean, 0.0),
        FadingCase::RayRiceUncorr => {
            mean.columns_mut(0, v).fill(zero);
            r_t.view_mut((0, v), (v, n_t - v)).fill(zero);
            r_t.view_mut((v, 0), (n_t - v, v)).fill(zero);
            ChannelModel::from_parts(&r_t, &mean, k)
        }
        FadingCase::RiceRiceCondition => {
            impose_condition(&ChannelModel::from_parts(&r_t, &mean, k)?, v)
        }
        FadingCase::RiceRay => {
            mean.columns_mut(v, n_t - v).fill(zero);
            ChannelModel::from_parts(&r_t, &mean, k)
        }
        FadingCase::RayRiceCorr => {
            mean.columns_mut(0, v).fill(zero);
            ChannelModel::from_parts(&r_t, &mean, k)
        }
    }
}

/// One grid point and stream; `None` marks a method that was not run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub gamma_b_db: f64,
    /// 1-based stream index.
    pub stream: usize,
    pub aep_exact: Option<f64>,
    pub aep_approx: Option<f64>,
    pub aep_det: Option<f64>,
    pub ser_sim: Option<f64>,
    /// Half-width of the 3σ binomial interval around `ser_sim`.
    pub ser_ci: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub fading_case: FadingCase,
    /// `‖H_d1 − H_d2 R_{2,1}‖_F` of the model.
    pub condition_residual: f64,
    /// Whether exact and approximate AEP must coincide.
    pub exact_equals_approx_expected: bool,
    /// `max |aep_exact − aep_approx|` over rows carrying both.
    pub max_abs_exact_minus_approx: Option<f64>,
    pub rows: usize,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "scenario: {}, fading case: {}",
            self.scenario, self.fading_case
        )?;
        writeln!(f, "condition residual: {:.3e}", self.condition_residual)?;
        writeln!(
            f,
            "exact = approx expected: {}",
            if self.exact_equals_approx_expected {
                "yes"
            } else {
                "no"
            }
        )?;
        match self.max_abs_exact_minus_approx {
            Some(d) => writeln!(f, "max |exact - approx|: {d:.3e}")?,
            None => writeln!(f, "max |exact - approx|: n/a")?,
        }
        write!(f, "rows: {}", self.rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub summary: RunSummary,
}

fn point_rows(
    cfg: &ExperimentConfig,
    model: &ChannelModel,
    methods: &BTreeSet<Method>,
    gamma_b_db: f64,
    seed: u64,
) -> Result<Vec<ResultRow>> {
    let budget = LinkBudget::from_gamma_b_db(gamma_b_db, cfg.n_t, cfg.m)?;
    let gamma_s = budget.gamma_s;
    let sim = if methods.contains(&Method::Sim) {
        Some(simulate_ser(model, &budget, cfg.m, cfg.trials, seed)?)
    } else {
        None
    };
    let rice_ray = cfg.fading_case == FadingCase::RiceRay;
    (1..=cfg.v)
        .map(|stream| {
            let aep_exact = if methods.contains(&Method::Exact) {
                Some(if rice_ray {
                    let p = rank1_params(model, gamma_s)?;
                    aep_from_mgf(|s| mgf_gamma1_series(&p, s, SERIES_RTOL), cfg.m)?
                } else {
                    let d = exact_gamma_snr(model, stream, gamma_s, cfg.v)?;
                    aep_exact_condition(d.shape, d.scale, cfg.m)?
                })
            } else {
                None
            };
            let aep_approx = if methods.contains(&Method::Approx) {
                let d = virtual_gamma_snr(model, stream, gamma_s)?;
                Some(aep_virtual(d.shape, d.scale, cfg.m)?)
            } else {
                None
            };
            let aep_det = if methods.contains(&Method::Determinantal) {
                Some(aep_rice_ray_det(&rank1_params(model, gamma_s)?, cfg.m)?)
            } else {
                None
            };
            let s = sim.as_ref().map(|r| r[stream - 1]);
            Ok(ResultRow {
                gamma_b_db,
                stream,
                aep_exact,
                aep_approx,
                aep_det,
                ser_sim: s.map(|r| r.ser),
                ser_ci: s.map(|r| r.ci_halfwidth_3sigma),
            })
        })
        .collect()
}

/// Runs every grid point in parallel; rows come back in grid order and
/// grid point `k` simulates with seed `derive_seed(cfg.seed, k)`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let model = build_model(cfg)?;
    let methods = cfg.effective_methods();
    let report = check_condition(&model, cfg.v, DEFAULT_CONDITION_TOL)?;
    let per_point: Vec<Vec<ResultRow>> = cfg
        .gamma_b_grid_db
        .par_iter()
        .enumerate()
        .map(|(k, &g)| point_rows(cfg, &model, &methods, g, derive_seed(cfg.seed, k as u64)))
        .collect::<Result<_>>()?;
    let rows: Vec<ResultRow> = per_point.into_iter().flatten().collect();
    let max_abs_exact_minus_approx = rows
        .iter()
        .filter_map(|r| Some((r.aep_exact? - r.aep_approx?).abs()))
        .reduce(f64::max);
    let summary = RunSummary {
        scenario: cfg.scenario,
        fading_case: cfg.fading_case,
        condition_residual: report.residual,
        exact_equals_approx_expected: report.holds,
        max_abs_exact_minus_approx,
        rows: rows.len(),
    };
    Ok(ExperimentOutput { rows, summary })
}

fn field(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

/// Writes `rows` as CSV to any writer.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            field(Some(r.gamma_b_db)),
            r.stream.to_string(),
            field(r.aep_exact),
            field(r.aep_approx),
            field(r.aep_det),
            field(r.ser_sim),
            field(r.ser_ci),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `rows` to `path`.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(rows, std::io::BufWriter::new(file)).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a file written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!(
            "{}: unexpected CSV header",
            path.display()
        )));
    }
    let bad = |what: &str| Error::Config(format!("{}: bad {what}", path.display()));
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| bad("number"))
        }
    };
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(ResultRow {
                gamma_b_db: rec[0].parse().map_err(|_| bad("gamma_b_db"))?,
                stream: rec[1].parse().map_err(|_| bad("stream"))?,
                aep_exact: opt(&rec[2])?,
                aep_approx: opt(&rec[3])?,
                aep_det: opt(&rec[4])?,
                ser_sim: opt(&rec[5])?,
                ser_ci: opt(&rec[6])?,
            })
        })
        .collect()
}

/// Human-readable description of the named presets.
pub fn list_presets() -> String {
    let mut s = String::new();
    for sc in [Scenario::B1, Scenario::A1] {
        let p = sc.preset().expect("named preset");
        s.push_str(&format!(
            "{sc}: K = {} dB, AS = {} deg, center = {} deg, spacing = {} half-wavelengths, mean seed = {}\n",
            p.k_db, p.azimuth_spread_deg, p.center_azimuth_deg, p.antenna_spacing, p.mean_seed
        ));
    }
    s
}
