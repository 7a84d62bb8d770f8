use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gbesq_cli::config::{OutputConfig, TaskConfig, SCHEMA_VERSION};
use gbesq_cli::run::{run, RunOptions};
use gbesq_cli::{CliError, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "gbesq",
    version,
    about = "Squared Bessel processes with time-varying dimension"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides `numeric.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "GBESQ_THREADS")]
    threads: Option<usize>,

    /// Overrides `output.csv`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, PartialEq, Eq)]
enum Command {
    Laplace,
    SampleEndpoint,
    SampleBridgeIntegral,
    PriceBond,
    SimSv,
    SimDefault,
    /// Runs the acceptance criteria. Without a config all of them run and
    /// nothing is written unless `--out` is given.
    Validate {
        /// Comma-separated criterion ids.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Laplace => "laplace",
            Command::SampleEndpoint => "sample-endpoint",
            Command::SampleBridgeIntegral => "sample-bridge-integral",
            Command::PriceBond => "price-bond",
            Command::SimSv => "sim-sv",
            Command::SimDefault => "sim-default",
            Command::Validate { .. } => "validate",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gbesq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Config("--threads must be positive".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let (cfg, write) = match (&cli.config, &cli.command) {
        (Some(path), _) => (ScenarioConfig::load(path)?, true),
        (None, Command::Validate { criteria }) => {
            let cfg = ScenarioConfig {
                schema_version: SCHEMA_VERSION,
                model: None,
                task: TaskConfig::Validate {
                    criteria: criteria.clone(),
                },
                numeric: Default::default(),
                output: OutputConfig {
                    csv: Some(PathBuf::from("validate.csv")),
                    ..Default::default()
                },
            };
            cfg.check()?;
            (cfg, cli.out.is_some())
        }
        (None, cmd) => return Err(CliError::Config(format!("{} needs --config", cmd.name()))),
    };
    if cfg.task.name() != cli.command.name() {
        return Err(CliError::Config(format!(
            "the config describes a {} task, not {}",
            cfg.task.name(),
            cli.command.name()
        )));
    }
    if let (Command::Validate { criteria }, TaskConfig::Validate { .. }) = (&cli.command, &cfg.task)
    {
        if !criteria.is_empty() && cli.config.is_some() {
            return Err(CliError::Config(
                "--criteria and a config file cannot be combined".into(),
            ));
        }
    }
    let opts = RunOptions {
        seed: cli.seed,
        out: cli.out.clone(),
        threads,
    };
    let outcome = run(cfg, &opts, write)?;
    if let Some(path) = outcome.csv {
        eprintln!(
            "gbesq: wrote {} rows to {}",
            outcome.table.rows.len(),
            path.display()
        );
    }
    Ok(())
}
