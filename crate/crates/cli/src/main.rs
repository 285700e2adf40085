mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CmdError, Ctx, Format};
use config::Config;

/// Epidemic spreading with selfish protection decisions.
#[derive(Parser)]
#[command(name = "epigame", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibria with admissibility conditions and stability verdicts.
    Equilibria,
    /// One trajectory, or the vector field on a grid.
    Integrate {
        #[arg(long)]
        vector_field: bool,
    },
    /// Label a grid of initial states by the equilibrium they reach.
    Basin,
    /// Equilibrium infection level as a function of gamma.
    SweepGamma,
    /// Finite-population Markov chain runs.
    Simulate,
    /// Chain versus mean-field error for increasing population size.
    Converge,
    /// Replay a contact trace.
    Trace {
        /// Contact CSV (`a,b,t_start,t_end`); overrides trace.path.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config_path) = cli.config.as_deref() else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let config = match Config::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let ctx = Ctx {
        config,
        config_dir: config_path.parent().map(PathBuf::from).unwrap_or_default(),
        out: cli.out,
        seed: cli.seed,
        format: cli.format,
    };
    let result = match &cli.command {
        Command::Equilibria => commands::equilibria(&ctx),
        Command::Integrate { vector_field } => commands::integrate_cmd(&ctx, *vector_field),
        Command::Basin => commands::basin(&ctx),
        Command::SweepGamma => commands::sweep_gamma(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Converge => commands::converge(&ctx),
        Command::Trace { trace } => commands::trace(&ctx, trace.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(CmdError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
