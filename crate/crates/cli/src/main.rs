use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mvsao_cli::config::{Field, SaoConfig};
use mvsao_cli::{resolve, run_and_write, CliError, Format, Kind, Overrides, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "mvsao", version, about = "Trace moments of random vector-valued Schrodinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One single-trace estimate per time in `t`.
    Trace(RunArgs),
    /// The joint moment of the traces at all times in `t`.
    Moment(RunArgs),
    /// Covariance of the traces at the two times in `t`.
    Covariance(RunArgs),
    /// Ensemble average over discretized operators.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        /// Write every noise field and spectrum to this file.
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Append results here instead of printing them.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    workers: Option<usize>,
    /// Times, overriding the config.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    t: Option<Vec<f64>>,
    /// Number of Monte Carlo samples, overriding the config.
    #[arg(long)]
    paths: Option<usize>,
    /// Use the stochastic Airy operator: `sao`, `sao:<field>` or
    /// `sao:<field>:<colors>` (defaults: real, 2 colors).
    #[arg(long)]
    preset: Option<String>,
    /// Record wall-clock seconds per row.
    #[arg(long)]
    timing: bool,
}

fn parse_preset(s: &str) -> Result<SaoConfig, CliError> {
    let mut parts = s.split(':');
    if parts.next() != Some("sao") {
        return Err(CliError::Config(format!("unknown preset `{s}`")));
    }
    let field = match parts.next().unwrap_or("real") {
        "real" => Field::Real,
        "complex" => Field::Complex,
        "quaternion" => Field::Quaternion,
        other => return Err(CliError::Config(format!("unknown field `{other}` in preset"))),
    };
    let colors = match parts.next() {
        Some(r) => r
            .parse()
            .map_err(|_| CliError::Config(format!("bad color count `{r}` in preset")))?,
        None => 2,
    };
    if parts.next().is_some() {
        return Err(CliError::Config(format!("malformed preset `{s}`")));
    }
    Ok(SaoConfig { field, colors })
}

fn run(kind: Kind, args: RunArgs, archive: Option<PathBuf>) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    let over = Overrides {
        seed: args.seed,
        t: args.t,
        paths: args.paths,
        workers: args.workers,
        out: args.out,
        format: args.format,
        sao: args.preset.as_deref().map(parse_preset).transpose()?,
    };
    let resolved = resolve(file, kind, over)?;
    let opts = RunOptions {
        timing: args.timing,
        archive: archive.as_deref(),
    };
    run_and_write(&resolved, &opts)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Trace(a) => run(Kind::Trace, a, None),
        Command::Moment(a) => run(Kind::Moment, a, None),
        Command::Covariance(a) => run(Kind::Covariance, a, None),
        Command::Oracle { run: a, archive } => run(Kind::Oracle, a, archive),
        Command::Selftest { workers } => {
            return if mvsao_cli::selftest::selftest(workers) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
