use clap::{Args, Parser, Subcommand};
use ionrep::config::{self, ConfigError, ParameterSet};
use ionrep::exec::Execution;
use ionrep::montecarlo::{self, TrialModel};
use ionrep::rates::{self, Scheme};
use ionrep::{report, sweep};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thiserror::Error;

#[derive(Parser, Debug)]
#[command(name = "ionrep", version, about = "Er/Eu single-ion quantum repeater toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Parameter file (`key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analytic rate sweep as CSV.
    Rates {
        /// Distances in km: `a,b,c` or `min:max:step`. Defaults to the
        /// configured total length.
        #[arg(long)]
        distances: Option<String>,
        /// Comma-separated subset of repeater, repeater_multiplexed, direct, plob.
        #[arg(long, default_value = "repeater,repeater_multiplexed,direct,plob")]
        schemes: String,
    },
    /// Monte Carlo estimate of the distribution time against the formula.
    Mc {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Gate durations, effective rates and fidelities.
    Fidelity {
        /// Add fidelities from exact master-equation integration.
        #[arg(long)]
        exact: bool,
    },
    /// Dipole-dipole shifts and gate timing for the configured ion pair.
    Dipole {
        /// Override the configured separation, nm.
        #[arg(long)]
        separation_nm: Option<f64>,
    },
    /// Cavity emission, indistinguishability and spin relaxation.
    Cavity,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("cannot read config {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{0}")]
    Runtime(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::ReadConfig { .. } | CliError::Config { .. } | CliError::Argument(_) => 2,
            CliError::Runtime(_) | CliError::Write { .. } => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn load(path: Option<&Path>) -> Result<ParameterSet, CliError> {
    let (text, name) = match path {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|source| CliError::ReadConfig {
                path: p.to_path_buf(),
                source,
            })?,
            p.display().to_string(),
        ),
        None => (String::new(), "defaults".to_string()),
    };
    config::parse_config(&text).map_err(|source| CliError::Config { path: name, source })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Write {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_rates(
    set: &ParameterSet,
    distances: Option<&str>,
    schemes: &str,
    exec: Execution,
) -> Result<String, CliError> {
    let distances = match distances {
        Some(d) => sweep::parse_distances(d).map_err(|e| CliError::Argument(e.to_string()))?,
        None => vec![set.repeater.total_length_l],
    };
    let schemes = sweep::parse_schemes(schemes).map_err(|e| CliError::Argument(e.to_string()))?;
    let spec = sweep::SweepSpec {
        distances,
        schemes,
        cfg: set.repeater.clone(),
        output_path: None,
    };
    let rows = sweep::run_sweep(&spec, exec).map_err(|e| match e {
        sweep::SweepError::Distance(_) | sweep::SweepError::NoDistances | sweep::SweepError::NoSchemes => {
            CliError::Argument(e.to_string())
        }
        other => runtime(other),
    })?;
    Ok(sweep::to_csv(&rows))
}

fn run_mc(set: &ParameterSet, seed: u64, trials: usize, exec: Execution) -> Result<String, CliError> {
    let cfg = &set.repeater;
    let mut model = TrialModel::new(cfg).map_err(runtime)?;
    model.gates = montecarlo::GateFidelities::from_params(&set.gates).map_err(runtime)?;
    model.memory_dephasing = set.config.memory_dephasing_per_s;
    let est = montecarlo::estimate_rate_with(&model, trials, seed, exec).map_err(|e| match e {
        montecarlo::MonteCarloError::TooFewTrials { .. } => CliError::Argument(e.to_string()),
        other => runtime(other),
    })?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "L = {} km, n = {}, m = {}, trials = {}, seed = {}",
        cfg.total_length_l, cfg.nesting_n, cfg.channels_m, trials, seed
    );
    let _ = writeln!(out, "mean slots            {:.4}", est.mean_slots);
    let _ = writeln!(out, "mean time             {:.6e} s ± {:.2e}", est.mean_time, est.std_err);
    let _ = writeln!(out, "rate                  {:.6} Hz", est.rate);
    if cfg.channels_m > 1 {
        let analytic = rates::scheme_rate(cfg, Scheme::RepeaterMultiplexed).map_err(runtime)?;
        let _ = writeln!(out, "formula rate          {:.6} Hz (multiplexed)", analytic);
        let _ = writeln!(out, "MC / formula rate     {:.4}", est.rate / analytic);
    } else {
        let analytic = rates::expected_time(cfg).map_err(runtime)?;
        let _ = writeln!(out, "formula time          {:.6e} s", analytic);
        let _ = writeln!(out, "MC / formula time     {:.4}", est.mean_time / analytic);
    }
    let _ = writeln!(out, "mean fidelity est.    {:.4}", est.mean_fidelity);
    Ok(out)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let set = load(cli.common.config.as_deref())?;
    let exec = if cli.common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let out = cli.common.out.as_deref();
    let text = match &cli.command {
        Command::Rates { distances, schemes } => {
            run_rates(&set, distances.as_deref(), schemes, exec)?
        }
        Command::Mc { seed, trials } => run_mc(&set, *seed, *trials, exec)?,
        Command::Fidelity { exact } => {
            report::fidelity_report(&set.gates, *exact, exec).map_err(runtime)?
        }
        Command::Dipole { separation_nm } => {
            let mut pair = set.ion_pair.clone();
            if let Some(r) = separation_nm {
                pair = pair.with_separation(r * 1e-9);
                pair.validate().map_err(|e| CliError::Argument(e.to_string()))?;
            }
            report::dipole_report(&pair).map_err(runtime)?
        }
        Command::Cavity => report::cavity_report(&set.cavity, &set.relaxation).map_err(runtime)?,
    };
    emit(out, &text)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
