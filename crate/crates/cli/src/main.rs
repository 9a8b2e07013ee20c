mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dme_core::apps::{kmeans, power, write_trajectory, TrajectoryPoint};
use dme_core::data::{self, DataSource};
use dme_core::harness::{self, ExperimentSpec};
use dme_core::selftest;

use config::{RunArgs, Settings};

#[derive(Debug, Parser)]
#[command(
    name = "dme",
    version,
    about = "Distributed mean estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the mean with one protocol and report MSE and bits.
    Estimate(RunArgs),
    /// Run every (protocol, k) combination on one dataset.
    Sweep(RunArgs),
    /// Distributed Lloyd's k-means; writes the bits/objective trajectory.
    Kmeans(RunArgs),
    /// Distributed power iteration; writes the bits/distance trajectory.
    Poweriter(RunArgs),
    /// Run the built-in roundtrip and unbiasedness checks.
    Selftest,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Selftest(usize),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Selftest(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Selftest(n) => write!(f, "{n} selftest check(s) failed"),
        }
    }
}

impl From<dme_core::Error> for CliError {
    fn from(e: dme_core::Error) -> Self {
        match e {
            dme_core::Error::Io(_) | dme_core::Error::Csv(_) => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn output(settings: &Settings) -> Result<Box<dyn Write>, CliError> {
    Ok(match &settings.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn experiment(settings: &Settings) -> Result<ExperimentSpec, CliError> {
    Ok(ExperimentSpec {
        source: settings.source.clone(),
        n: settings.n,
        d: settings.d,
        configs: settings.configs()?,
        trials: settings.trials,
        data_seed: settings.seed,
        normalize: settings.normalize,
    })
}

fn run_estimate(args: &RunArgs, single: bool) -> Result<(), CliError> {
    let settings = Settings::resolve(args)?;
    let mut spec = experiment(&settings)?;
    if single {
        spec.configs = vec![settings.single_config()?];
    }
    let reports = harness::run_experiment(&spec)?;
    harness::write_reports(output(&settings)?, &reports)?;
    Ok(())
}

/// Splits file rows across `n` clients round-robin.
fn file_shards(
    source: &DataSource,
    n: usize,
    d: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>, CliError> {
    let rows = data::generate(source, 0, d, seed)?;
    if n == 0 {
        return Err(CliError::Config(
            "--n (number of clients) is required for file datasets".into(),
        ));
    }
    let mut shards = vec![Vec::new(); n.min(rows.len())];
    let m = shards.len();
    for (i, row) in rows.into_iter().enumerate() {
        shards[i % m].push(row);
    }
    Ok(shards)
}

fn write_run(settings: &Settings, trajectory: &[TrajectoryPoint]) -> Result<(), CliError> {
    write_trajectory(output(settings)?, trajectory)?;
    Ok(())
}

fn run_kmeans(args: &RunArgs) -> Result<(), CliError> {
    let s = Settings::resolve(args)?;
    let config = s.single_config()?;
    let shards = match &s.source {
        DataSource::File(_) => file_shards(&s.source, s.n, s.d, s.seed)?,
        _ => kmeans::synthetic_clusters(s.n, s.points_per_client, s.d, s.centers, s.seed),
    };
    let run = kmeans::distributed_lloyd(&shards, s.centers, &config, s.iterations, s.seed)?;
    write_run(&s, &run.trajectory)
}

fn run_poweriter(args: &RunArgs) -> Result<(), CliError> {
    let s = Settings::resolve(args)?;
    let config = s.single_config()?;
    let shards = match &s.source {
        DataSource::File(_) => file_shards(&s.source, s.n, s.d, s.seed)?,
        _ => power::synthetic_spiked(s.n, s.points_per_client, s.d, s.spike, s.seed),
    };
    let reference = power::reference_eigvec(&shards, 10_000, s.seed)?;
    let run =
        power::distributed_power_iteration(&shards, &config, s.iterations, &reference, s.seed)?;
    write_run(&s, &run.trajectory)
}

fn run_selftest() -> Result<(), CliError> {
    let results = selftest::run();
    let mut failed = 0;
    for r in &results {
        let status = if r.passed { "ok" } else { "FAILED" };
        println!("{:<28} {status:<6} {}", r.name, r.detail);
        failed += usize::from(!r.passed);
    }
    if failed > 0 {
        return Err(CliError::Selftest(failed));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Estimate(a) => run_estimate(a, true),
        Command::Sweep(a) => run_estimate(a, false),
        Command::Kmeans(a) => run_kmeans(a),
        Command::Poweriter(a) => run_poweriter(a),
        Command::Selftest => run_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dme: {e}");
            ExitCode::from(e.code())
        }
    }
}
