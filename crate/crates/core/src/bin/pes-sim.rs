use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use pes_sim::config::{key_reference, parse_config, LoadedConfig};
use pes_sim::engine::{calibration_check, run_ensemble, CalibrationReport, SimError, SimulationConfig};
use pes_sim::intervention::{ScenarioConfig, ScenarioName};
use pes_sim::output::{write_metadata, write_outputs, RunManifest};
use pes_sim::prediction::ModelVariant;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_CALIBRATION: u8 = 4;

const EXIT_CODES: &str = "\
EXIT CODES
  0  success
  1  runtime failure (I/O, output directory not writable)
  2  invalid command line or configuration
  3  degenerate spin-up history: every completed spell fell on one side of t_u_threshold
  4  calibrate-check ran but a calibration target was missed";

#[derive(Parser)]
#[command(
    name = "pes-sim",
    version,
    about = "Agent-based simulation of a job-seeker pool, a labor market and a public employment service",
    after_long_help = long_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one ensemble and write its CSV files.
    #[command(after_long_help = long_help())]
    Run(RunArgs),
    /// Run the 16-cell grid {full, base} x {unbiased, biased} x 4 scenarios.
    ///
    /// Each cell is written to <out>/<variant>_<bias>_<scenario>. The grid
    /// overrides engine.model_variant, market.beta_b (0 or 2) and
    /// scenario.name; every other key comes from the configuration.
    #[command(after_long_help = long_help())]
    Matrix(RunArgs),
    /// Run the spin-up only and check the market calibration targets.
    #[command(after_long_help = long_help())]
    CalibrateCheck(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides engine.base_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides engine.n_runs.
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Args)]
struct CheckArgs {
    /// Configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
}

fn long_help() -> String {
    format!("{}\n{EXIT_CODES}", key_reference())
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Matrix(args) => cmd_matrix(&args),
        Command::CalibrateCheck(args) => cmd_calibrate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path) -> Result<LoadedConfig, Failure> {
    parse_config(path).map_err(|e| match e {
        pes_sim::config::ConfigError::Io { .. } => Failure::new(EXIT_FAILURE, e),
        _ => Failure::new(EXIT_CONFIG, e),
    })
}

fn with_overrides(loaded: &LoadedConfig, args: &RunArgs) -> Result<SimulationConfig, Failure> {
    let mut config = loaded.config.clone();
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    if let Some(runs) = args.runs {
        config.n_runs = runs;
    }
    config.validate().map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    Ok(config)
}

/// Runs one ensemble into `dir`. A degenerate history still leaves the
/// configuration copies and a manifest describing the abort.
fn run_into(dir: &Path, config: &SimulationConfig, source_text: &str) -> Result<(), Failure> {
    let start = Instant::now();
    let io = |e: pes_sim::output::OutputError| Failure::new(EXIT_FAILURE, e);
    match run_ensemble(config) {
        Ok(ensemble) => {
            let manifest = RunManifest::new(config, start.elapsed().as_secs_f64(), None);
            write_outputs(dir, config, source_text, &ensemble.runs, &manifest).map_err(io)?;
            log::info!("wrote {} run(s) to {}", ensemble.runs.len(), dir.display());
            Ok(())
        }
        Err(e) => {
            let manifest = RunManifest::new(config, start.elapsed().as_secs_f64(), Some(e.to_string()));
            write_metadata(dir, config, source_text, &manifest).map_err(io)?;
            let code = match e {
                SimError::DegenerateHistory { .. } => EXIT_DEGENERATE,
                SimError::InvalidConfig(_) => EXIT_CONFIG,
            };
            Err(Failure::new(code, e))
        }
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let loaded = load(&args.config)?;
    let config = with_overrides(&loaded, args)?;
    run_into(&args.out, &config, &loaded.source_text)
}

fn cmd_matrix(args: &RunArgs) -> Result<(), Failure> {
    let loaded = load(&args.config)?;
    let base = with_overrides(&loaded, args)?;
    let mut first_failure = None;
    for variant in [ModelVariant::Full, ModelVariant::Base] {
        for (bias, beta_b) in [("unbiased", 0.0), ("biased", 2.0)] {
            for name in ScenarioName::NAMED {
                let mut config = base.clone();
                config.model_variant = variant;
                config.market.beta_b = beta_b;
                config.scenario = ScenarioConfig {
                    k_scale: base.scenario.k_scale,
                    ..ScenarioConfig::named(name)
                };
                let cell = format!("{variant}_{bias}_{}", name.as_str());
                log::info!("matrix cell {cell}");
                if let Err(f) = run_into(&args.out.join(&cell), &config, &loaded.source_text) {
                    eprintln!("error: {cell}: {}", f.message);
                    first_failure.get_or_insert(f);
                }
            }
        }
    }
    first_failure.map_or(Ok(()), Err)
}

fn cmd_calibrate(args: &CheckArgs) -> Result<(), Failure> {
    let loaded = load(&args.config)?;
    let report = calibration_check(&loaded.config).map_err(|e| match e {
        SimError::DegenerateHistory { .. } => Failure::new(EXIT_DEGENERATE, e),
        SimError::InvalidConfig(_) => Failure::new(EXIT_CONFIG, e),
    })?;
    print_report(&report, &loaded.config);
    if report.passes() {
        Ok(())
    } else {
        Err(Failure::new(EXIT_CALIBRATION, "calibration targets missed"))
    }
}

fn print_report(r: &CalibrationReport, config: &SimulationConfig) {
    let verdict = |ok: bool| if ok { "ok" } else { "MISSED" };
    let (lb_lo, lb_hi) = CalibrationReport::LABEL_BALANCE_RANGE;
    let (tr_lo, tr_hi) = CalibrationReport::T_U_MAX_RATIO_RANGE;
    println!("spin-up spells       {} over {} run(s)", r.n_spells, r.n_runs);
    println!(
        "label balance        {:.3}  (fraction with T_u > {}; target [{lb_lo}, {lb_hi}])  {}",
        r.label_balance,
        config.intervention.t_u_threshold,
        verdict(r.label_balance_ok())
    );
    println!("median T_u           {}", r.median_t_u);
    println!(
        "t_u_max / median     {:.2}  (t_u_max = {}; target [{tr_lo}, {tr_hi}])  {}",
        r.t_u_max_ratio,
        config.intervention.t_u_max,
        verdict(r.t_u_max_ok())
    );
    println!("underprivileged pool fraction at end of spin-up  {:.3}", r.frac_upriv);
}
