use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fedqlstm::harness::{
    load_report, run_experiment, sweep, write_outputs, ExperimentConfig, SweepRow, SweepSpec, SweepTable, REPORT_FILE,
};
use fedqlstm::{Error, Result};

#[derive(Parser)]
#[command(name = "fedqlstm", version, about = "Federated quantum LSTM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepPreset {
    Epochs,
    Clients,
    Optimizers,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        /// Experiment config (TOML). Without it the preset is used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in config: default or desk.
        #[arg(long, default_value = "default", conflicts_with = "config")]
        preset: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for rounds.csv and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write loss_curve.csv.
        #[arg(long)]
        emit_plot: bool,
        /// Print the resolved config as TOML and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Run a grid of settings over several seeds.
    Sweep {
        /// Sweep file (TOML with `seeds`, `base` and `settings`).
        #[arg(long, required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// Built-in grid, applied on top of `--base`.
        #[arg(long, value_enum, conflicts_with = "config")]
        preset: Option<SweepPreset>,
        /// Base experiment config for a preset grid (default: desk preset).
        #[arg(long, requires = "preset")]
        base: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3])]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate every report.json below a directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, preset, seed, out, emit_plot, print_config } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::preset(&preset)?,
            };
            if let Some(seed) = seed {
                cfg = cfg.with_seed(seed);
            }
            if out.is_some() {
                cfg.output = out;
            }
            if print_config {
                print!("{}", cfg.to_toml_string()?);
                return Ok(());
            }
            let output = cfg.output.take();
            let report = run_experiment(&cfg)?;
            if let Some(dir) = &output {
                write_outputs(&report, dir, emit_plot)?;
            }
            let table = SweepTable { rows: vec![SweepRow::from_report(&report)] };
            print!("{}", table.render());
            eprintln!("parameters: {}, wall clock: {:.1}s", report.num_params, report.wall_clock_seconds);
        }
        Command::Sweep { config, preset, base, seeds, out } => {
            let spec = match (config, preset) {
                (Some(path), _) => SweepSpec::load(&path)?,
                (None, Some(preset)) => {
                    let base = match base {
                        Some(path) => ExperimentConfig::load(&path)?,
                        None => ExperimentConfig::desk(),
                    };
                    match preset {
                        SweepPreset::Epochs => SweepSpec::epoch_sweep(base, seeds),
                        SweepPreset::Clients => SweepSpec::client_sweep(base, seeds),
                        SweepPreset::Optimizers => SweepSpec::optimizer_grid(base, seeds),
                    }
                }
                (None, None) => return Err(Error::config("either --config or --preset is required")),
            };
            let (table, _) = sweep(&spec, out.as_deref())?;
            print!("{}", table.render());
        }
        Command::Report { input } => {
            let mut paths = Vec::new();
            find_reports(&input, &mut paths)?;
            if paths.is_empty() {
                return Err(Error::config(format!("no {REPORT_FILE} found under {}", input.display())));
            }
            paths.sort();
            let rows = paths.iter().map(|p| load_report(p).map(|r| SweepRow::from_report(&r))).collect::<Result<_>>()?;
            print!("{}", SweepTable { rows }.render());
        }
    }
    Ok(())
}

fn find_reports(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            find_reports(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == REPORT_FILE) {
            out.push(path);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
