use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use movingwave_cli::{execute, CliError, Command, Config, Options};

/// Geometry, Carleman and observability checks, and interior control, for
/// wave equations on moving-boundary domains.
#[derive(Debug, Parser)]
#[command(name = "movingwave", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides `run.seed` of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Record `wall_time_s` in report.json.
    #[arg(long)]
    timing: bool,
}

fn run(args: &Args) -> Result<Vec<PathBuf>, CliError> {
    let config = Config::from_path(&args.config)?;
    let options = Options {
        out: args.out.clone(),
        seed: args.seed,
        timing: args.timing,
    };
    execute(args.command, &config, &options)?.write(&options.out)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
