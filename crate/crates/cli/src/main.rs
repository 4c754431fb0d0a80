use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use coflow_core::bench::{self, Algorithm, ExperimentConfig, GeneratorParams};
use coflow_core::lp::SolverChoice;
use coflow_core::CoflowInstance;

#[derive(Parser)]
#[command(name = "coflow-sched", version, about = "Coflow makespan scheduling on heterogeneous parallel cores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Run one algorithm on an instance and write a CSV of results.
    Run(RunArgs),
    /// Print the best whole-flow assignment makespan by exhaustive search.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
    },
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long)]
    ports: usize,
    #[arg(long)]
    cores: usize,
    #[arg(long)]
    coflows: usize,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long, default_value_t = 1)]
    dmin: u64,
    #[arg(long, default_value_t = 5)]
    dmax: u64,
    /// Core speeds, or a set to draw them from when the count differs from --cores.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    speeds: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    RandTime,
    DetTime,
    RandInterval,
    DetInterval,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::RandTime => Algorithm::RandTime,
            AlgorithmArg::DetTime => Algorithm::DetTime,
            AlgorithmArg::RandInterval => Algorithm::RandInterval,
            AlgorithmArg::DetInterval => Algorithm::DetInterval,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Auto,
    Dense,
    Sparse,
}

impl From<SolverArg> for SolverChoice {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => SolverChoice::Auto,
            SolverArg::Dense => SolverChoice::Dense,
            SolverArg::Sparse => SolverChoice::Sparse,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    algorithm: AlgorithmArg,
    /// Interval growth parameter; required by the interval algorithms.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Write the first trial's schedule as JSON.
    #[arg(long)]
    dump_schedule: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    solver: SolverArg,
    /// Fill the wall_ms column.
    #[arg(long)]
    timing: bool,
    /// Leave oracle_opt blank.
    #[arg(long)]
    no_oracle: bool,
    /// Defaults to the instance file stem.
    #[arg(long)]
    instance_id: Option<String>,
}

fn load(path: &Path) -> Result<CoflowInstance> {
    CoflowInstance::load(path).with_context(|| format!("loading {}", path.display()))
}

fn gen(args: GenArgs) -> Result<ExitCode> {
    let params = GeneratorParams {
        ports: args.ports,
        cores: args.cores,
        coflows: args.coflows,
        density: args.density,
        d_lo: args.dmin,
        d_hi: args.dmax,
        speeds: args.speeds,
        seed: args.seed,
    };
    let instance = bench::generate_instance(&params)?;
    std::fs::write(&args.out, instance.to_json()).with_context(|| format!("writing {}", args.out.display()))?;
    log::info!("{} flows written to {}", instance.flows().len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let algorithm = Algorithm::from(args.algorithm);
    if algorithm.is_interval() && args.eta.is_none() {
        Cli::command()
            .error(clap::error::ErrorKind::MissingRequiredArgument, format!("{} requires --eta", algorithm))
            .exit();
    }
    let instance = load(&args.instance)?;
    let id = args
        .instance_id
        .unwrap_or_else(|| args.instance.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    let mut config = ExperimentConfig::new(algorithm, args.eta, args.trials, args.seed);
    config.solver = args.solver.into();
    config.timing = args.timing;
    config.oracle = !args.no_oracle;

    let result = bench::run_experiment(&instance, &id, &config)?;
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    bench::write_csv(&result.rows, BufWriter::new(file))?;
    if let Some(path) = &args.dump_schedule {
        let json = serde_json::to_string_pretty(&result.first_schedule.to_json())?;
        std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    for (trial, message) in &result.failures {
        eprintln!("trial {}: {}", trial, message);
    }
    log::info!(
        "{}: C* = {}, LB = {}, mean makespan = {}",
        algorithm,
        result.lp_opt,
        result.lower_bound,
        result.mean_makespan()
    );
    Ok(if result.all_verified { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn oracle(path: &Path) -> Result<ExitCode> {
    let instance = load(path)?;
    println!("{}", bench::brute_force_makespan(&instance)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(args) => gen(args),
        Command::Run(args) => run(args),
        Command::Oracle { instance } => oracle(&instance),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {:#}", e);
        ExitCode::FAILURE
    })
}
