use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use steadychain::experiments::{Experiment, ExperimentConfig, RobustnessConfig};
use steadychain::{Error, Frame};

#[derive(Parser)]
#[command(name = "steadychain", version, about = "Steady-state sweeps for reservoir-engineered XY chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady states over the configured sweep.
    Steady(RunArgs),
    /// Trajectories from the all-down state.
    Evolve(RunArgs),
    /// Single pump: fidelity against gamma/kappa and nbar.
    #[command(name = "panel-a")]
    PanelA(RunArgs),
    /// Fidelity, purity and concurrence against reservoir count.
    #[command(name = "panel-bcd")]
    PanelBcd(RunArgs),
    /// Trajectories under random static rate errors.
    Robustness(RunArgs),
    /// Steady state against chain length.
    Scaling(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; falls back to the config's output_path, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides robustness.seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_frame)]
    frame: Option<Frame>,
}

fn parse_frame(s: &str) -> Result<Frame, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (experiment, args) = match cli.command {
        Command::Steady(a) => (Experiment::Steady, a),
        Command::Evolve(a) => (Experiment::Evolve, a),
        Command::PanelA(a) => (Experiment::PanelA, a),
        Command::PanelBcd(a) => (Experiment::PanelBcd, a),
        Command::Robustness(a) => (Experiment::Robustness, a),
        Command::Scaling(a) => (Experiment::Scaling, a),
    };
    match run(experiment, args) {
        Ok(failed) if failed > 0 => {
            eprintln!("{failed} row(s) failed");
            ExitCode::from(2)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(experiment: Experiment, args: RunArgs) -> Result<usize, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(frame) = args.frame {
        cfg.frame = frame;
    }
    if let Some(seed) = args.seed {
        if experiment == Experiment::Robustness {
            cfg.robustness.get_or_insert_with(RobustnessConfig::default).seed = seed;
        } else if let Some(r) = cfg.robustness.as_mut() {
            r.seed = seed;
        }
    }
    let workers = match args.workers {
        Some(0) => return Err(Error::Config("--workers must be at least 1".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let out = experiment.run(&cfg, workers)?;
    match args.out.or_else(|| cfg.output_path.as_ref().map(PathBuf::from)) {
        Some(path) => out.save(&path)?,
        None => out.write_csv(std::io::stdout().lock())?,
    }
    Ok(out.rows.iter().filter(|r| r.failed).count())
}
