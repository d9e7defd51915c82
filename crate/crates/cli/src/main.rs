use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use hartree_mix::pipeline::{exit_code, run, RunConfig, Stage};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Marginal,
    Dispersion,
    Stability,
    Green,
    Free,
    Linear,
    Nonlinear,
    Report,
}

impl From<Command> for Stage {
    fn from(c: Command) -> Stage {
        match c {
            Command::Marginal => Stage::Marginal,
            Command::Dispersion => Stage::Dispersion,
            Command::Stability => Stage::Stability,
            Command::Green => Stage::Green,
            Command::Free => Stage::Free,
            Command::Linear => Stage::Linear,
            Command::Nonlinear => Stage::Nonlinear,
            Command::Report => Stage::Report,
        }
    }
}

/// Phase-mixing experiments for the Hartree equation near translation-invariant equilibria.
#[derive(Debug, Parser)]
#[command(name = "hartree-mix", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut cfg = match RunConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let result = run(&cfg, cli.command.into());
    match &result {
        Ok(o) => {
            // a closed stdout (e.g. piped into head) is not an error of the run
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", o.summary);
            for a in &o.artifacts {
                let _ = writeln!(out, "wrote {}", a.display());
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
