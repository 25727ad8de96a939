use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use nuflavor::experiment::{
    compare_propagators, emit_comparison, emit_series, mitigation_selftest, run_experiment,
    tomography_selftest, ExperimentConfig, OutputFormat, Propagator, SelfTestCheck,
};

#[derive(Parser)]
#[command(
    name = "nuflavor",
    version,
    about = "Collective neutrino oscillation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full simulate, tomograph, mitigate, extrapolate pipeline.
    Run(RunArgs),
    /// Compare single-step propagators with exact evolution.
    ComparePropagators(CompareArgs),
    /// Check tomography on states with known answers.
    TomographySelftest(SeedArgs),
    /// Check Bayesian resampling, readout correction and extrapolation.
    MitigationSelftest(SeedArgs),
    /// Print the default configuration as TOML.
    DefaultConfig,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: ConfigArgs,
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    #[arg(long, value_parser = ["exact", "u1", "u2"])]
    propagator: Option<String>,
    /// Comma-separated odd noise multipliers, e.g. `1,3`.
    #[arg(long, value_delimiter = ',')]
    noise_levels: Option<Vec<u32>>,
    /// Posterior replicas per estimate.
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: ConfigArgs,
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
}

#[derive(Args)]
struct SeedArgs {
    #[arg(long, default_value_t = 2021)]
    seed: u64,
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output = out.clone();
    }
    Ok(config)
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = load(&args.common)?;
    if let Some(p) = &args.propagator {
        config.propagator = Propagator::parse(p)?;
    }
    if let Some(levels) = args.noise_levels {
        config.noise_levels = levels;
    }
    if let Some(l) = args.replicas {
        config.replicas = l;
    }
    config.validate()?;
    eprintln!(
        "running {} times x {} noise levels, {} replicas",
        config.times.len(),
        config.noise_levels.len(),
        config.replicas
    );
    let bundle = run_experiment(&config).context("pipeline failed")?;
    let files = emit_series(&bundle, &config.output, OutputFormat::parse(&args.format)?)?;
    eprintln!("wrote {} files to {}", files.len(), config.output.display());
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let config = load(&args.common)?;
    let report = compare_propagators(&config)?;
    let path = match OutputFormat::parse(&args.format)? {
        OutputFormat::Csv => emit_comparison(&report, &config.output)?,
        OutputFormat::Json => {
            std::fs::create_dir_all(&config.output)?;
            let path = config.output.join("propagators.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
            path
        }
    };
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn report(checks: Vec<SelfTestCheck>) -> bool {
    let mut ok = true;
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        ok &= c.passed;
    }
    ok
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args).map(|_| true),
        Command::ComparePropagators(args) => compare(args).map(|_| true),
        Command::TomographySelftest(args) => tomography_selftest(args.seed)
            .map(report)
            .map_err(Into::into),
        Command::MitigationSelftest(args) => mitigation_selftest(args.seed)
            .map(report)
            .map_err(Into::into),
        Command::DefaultConfig => ExperimentConfig::default()
            .to_toml()
            .map(|t| {
                print!("{t}");
                true
            })
            .map_err(Into::into),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
