use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use zf_rician::cli::{
    emit_csv, list_presets, parse_grid, parse_methods, run_experiment, write_csv, ExperimentConfig,
    FadingCase, Scenario,
};

/// Zero-forcing MIMO error-probability experiments under transmit-correlated
/// Rician fading.
#[derive(Debug, Parser)]
#[command(name = "zf-rician", version)]
struct Args {
    /// TOML experiment file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// B1, A1 or custom.
    #[arg(long)]
    scenario: Option<Scenario>,
    /// rayleigh_only, ray_rice_uncorr, rice_rice_condition, rice_ray or ray_rice_corr.
    #[arg(long = "case")]
    fading_case: Option<FadingCase>,
    /// Per-bit SNR grid in dB: `start:step:stop` or a comma-separated list.
    #[arg(long)]
    grid: Option<String>,
    /// Comma-separated subset of exact, approx, determinantal, sim.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the scenario presets and exit.
    #[arg(long)]
    list_presets: bool,
}

fn run(args: Args) -> zf_rician::Result<()> {
    if args.list_presets {
        print!("{}", list_presets());
        return Ok(());
    }
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.scenario {
        cfg.scenario = s;
    }
    if let Some(c) = args.fading_case {
        cfg.fading_case = c;
    }
    if let Some(g) = &args.grid {
        cfg.gamma_b_grid_db = parse_grid(g)?;
    }
    if let Some(m) = &args.methods {
        cfg.methods = parse_methods(m)?;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let output = run_experiment(&cfg)?;
    match &args.out {
        Some(path) => emit_csv(&output.rows, path)?,
        None => write_csv(&output.rows, std::io::stdout().lock()).map_err(|source| {
            zf_rician::Error::Csv {
                path: PathBuf::from("<stdout>"),
                source,
            }
        })?,
    }
    eprintln!("{}", output.summary);
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
