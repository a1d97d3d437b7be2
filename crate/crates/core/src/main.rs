use std::path::PathBuf;
use std::process::ExitCode;

use boole_lab::cli::{run, Invocation, EXIT_USAGE};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Mix,
    Zerotype,
    Av,
    Cone,
    Hypotheses,
    Dist,
    Birkhoff,
    BooleIdentity,
}

/// Boole map laboratory: runs one experiment described by a config file.
#[derive(Debug, Parser)]
#[command(name = "boole-lab", version)]
struct Args {
    /// Experiment to run; must match `subcommand` in the config.
    #[arg(value_enum)]
    command: Command,
    /// Config file.
    #[arg(long)]
    config: PathBuf,
    /// CSV output path (overrides `[output] csv`; stdout when neither is set).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// SVG plot path (overrides `[output] svg`).
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let inv = Invocation {
        subcommand: args.command.to_possible_value().expect("no skipped variants").get_name().to_string(),
        config: args.config,
        csv: args.csv,
        svg: args.svg,
        seed: args.seed,
    };
    let code = run(&inv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    ExitCode::from(code as u8)
}
