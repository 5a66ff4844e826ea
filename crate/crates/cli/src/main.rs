use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use dissip_cli::{parse_config, run, Command, Overrides, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "dissip", version, about = "Certify, simulate and sweep first-order algorithms from JSON problem files")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the certification named by `analysis.mode`.
    Certify(RunArgs),
    /// Simulate with the executable oracle and check its bounds.
    Simulate(RunArgs),
    /// Evaluate a metric over the `sweep` grid.
    Sweep(RunArgs),
    /// Parse and validate a config without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn load(path: &PathBuf) -> anyhow::Result<dissip_cli::ProblemConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_config(&text)?)
}

fn execute(command: Command, args: &RunArgs) -> anyhow::Result<i32> {
    let mut config = load(&args.config)?;
    Overrides {
        seed: args.seed,
        tol: args.tol,
    }
    .apply(&mut config)?;
    let output = run(&config, command)?;
    let text = match args.format {
        Format::Json => output.to_json(),
        Format::Csv => output.to_csv()?,
    };
    match &args.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(output.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Exit 2 is reserved for negative verdicts.
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    let result = match &cli.command {
        Cmd::Certify(args) => execute(Command::Certify, args),
        Cmd::Simulate(args) => execute(Command::Simulate, args),
        Cmd::Sweep(args) => execute(Command::Sweep, args),
        Cmd::ValidateConfig { config } => load(config).map(|_| {
            println!("ok");
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
