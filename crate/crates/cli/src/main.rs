use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cran_cli::{run_experiment, solve_once, universally_infeasible, write_csv, CliError, ExperimentConfig, RunOptions, Sweep};
use cran_core::optimizer::SolveStatus;

/// Joint precoding and backhaul compression for cloud radio access
/// downlinks.
#[derive(Parser)]
#[command(name = "cran", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep written as CSV.
    Run(RunArgs),
    /// Solve one instance and print a report.
    Solve(SolveArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Named figure setup: fig3, fig5, fig6, fig7, fig8 or fig9.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sweep override, e.g. `C=1,2,4,8`.
    #[arg(long)]
    sweep: Option<Sweep>,
    #[arg(long)]
    trials: Option<u64>,
    /// Base seed; trial t uses seed + t.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (falls back to `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fill the wall_ms column. Without it the CSV is reproducible byte
    /// for byte.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    /// JSON result path (falls back to `out` in the config, then to
    /// `<config>.result.json`).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Done,
    Infeasible,
}

fn run(args: RunArgs) -> Result<Outcome, CliError> {
    let mut exp = match (&args.preset, &args.config) {
        (Some(p), None) => ExperimentConfig::preset(p)?,
        (None, Some(path)) => ExperimentConfig::from_file(path)?,
        (None, None) => return Err(CliError::Config("run needs --preset or --config".into())),
        (Some(_), Some(_)) => unreachable!("clap rejects both"),
    };
    if let Some(s) = args.sweep {
        exp.sweep = Some(s);
    }
    if let Some(t) = args.trials {
        exp.trials = t;
    }
    if let Some(s) = args.seed {
        exp.seed = s;
    }
    let out = args
        .out
        .or(exp.out.clone())
        .ok_or_else(|| CliError::Config("out: no output path (use --out)".into()))?;
    exp.validate()?;
    let rows = run_experiment(&exp, RunOptions { timing: args.timing })?;
    write_csv(&rows, BufWriter::new(File::create(&out)?))?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(if universally_infeasible(&rows) { Outcome::Infeasible } else { Outcome::Done })
}

fn default_record_path(config: &Path) -> PathBuf {
    config.with_extension("result.json")
}

fn solve(args: SolveArgs) -> Result<Outcome, CliError> {
    let (exp, record) = solve_once(&args.config)?;
    print!("{}", record.render());
    let path = args.out.or(exp.out).unwrap_or_else(|| default_record_path(&args.config));
    serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &record)?;
    println!("record      {}", path.display());
    Ok(if record.status == SolveStatus::Infeasible { Outcome::Infeasible } else { Outcome::Done })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Solve(a) => solve(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => {
            eprintln!("error: problem infeasible");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
