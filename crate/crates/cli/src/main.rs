use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use polyprop::run::{run, Overrides, Subcommand};
use polyprop::scenario::Scenario;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Simulate,
    Paths,
    Intensity,
    Oracle,
    Compare,
    All,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Simulate => Subcommand::Simulate,
            Command::Paths => Subcommand::Paths,
            Command::Intensity => Subcommand::Intensity,
            Command::Oracle => Subcommand::Oracle,
            Command::Compare => Subcommand::Compare,
            Command::All => Subcommand::All,
        }
    }
}

/// Polygonal extremal paths in constrained regions: collision dynamics,
/// polygon-kernel intensities and a lattice path-integral check.
#[derive(Debug, Parser)]
#[command(name = "polyprop", version)]
struct Cli {
    command: Command,
    /// Scenario file
    scenario: PathBuf,
    /// Output directory [default: scenario `out`, else out/<scenario name>]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of screen bins
    #[arg(long)]
    bins: Option<usize>,
    /// Maximum corners per polygon
    #[arg(long = "max-corners")]
    max_corners: Option<usize>,
    /// Continuations per corner hit
    #[arg(long)]
    fan: Option<usize>,
    /// Oracle nodes along the longer side
    #[arg(long)]
    grid: Option<usize>,
    /// Oracle time slices
    #[arg(long)]
    slices: Option<usize>,
    /// Deterministic uniform corner fans (the only mode)
    #[arg(long, default_value_t = true)]
    seedless: bool,
}

fn out_dir(cli: &Cli, scenario: &Scenario) -> PathBuf {
    if let Some(o) = &cli.out {
        return o.clone();
    }
    if let Some(o) = &scenario.run.out {
        return PathBuf::from(o);
    }
    let stem = cli.scenario.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    Path::new("out").join(stem)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        // usage mistakes are input problems, like a bad scenario
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let overrides = Overrides {
        bins: cli.bins,
        max_corners: cli.max_corners,
        fan_size: cli.fan,
        oracle_grid: cli.grid,
        oracle_slices: cli.slices,
    };
    let result = Scenario::from_file(&cli.scenario)
        .and_then(|s| overrides.apply(&s))
        .and_then(|s| run(cli.command.into(), &s, &out_dir(&cli, &s)));
    match result {
        Ok(artifacts) => {
            for line in &artifacts.summary {
                println!("{line}");
            }
            for f in &artifacts.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
