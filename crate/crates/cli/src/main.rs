use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ppcat_cli::{Config, Experiment, Overrides, RunManifest};

/// Positive-P and gauge-P simulations of driven two-photon resonator arrays.
#[derive(Parser)]
#[command(name = "ppcat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Observable time series, with exact reference columns when available.
    Transient(Common),
    /// Regime labels over a grid of single-mode loss rates.
    Sweep(Common),
    /// Parity of a cat state under each integration scheme.
    ParityDecay(Common),
    /// Momentum-space occupation, correlations and Cauchy–Schwarz ratios.
    Momentum(Common),
    /// Density matrices and Wigner functions from the ensemble.
    Reconstruct(Common),
    /// Exact master-equation reference only.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "ppcat-out")]
    out: PathBuf,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    subensembles: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Worker threads (affects speed only).
    #[arg(long)]
    threads: Option<usize>,
    /// Skip the exact reference solution.
    #[arg(long)]
    no_oracle: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Transient(a) => (Experiment::Transient, a),
        Command::Sweep(a) => (Experiment::RegimeSweep, a),
        Command::ParityDecay(a) => (Experiment::ParityDecay, a),
        Command::Momentum(a) => (Experiment::MomentumScan, a),
        Command::Reconstruct(a) => (Experiment::Reconstruct, a),
        Command::Oracle(a) => (Experiment::Oracle, a),
    };
    let result = Config::load(experiment, args.config.as_deref()).and_then(|mut config| {
        config.apply(&Overrides {
            seed: args.seed,
            trajectories: args.trajectories,
            subensembles: args.subensembles,
            dt: args.dt,
            no_oracle: args.no_oracle,
        });
        let mut manifest = RunManifest::new(experiment, config, args.out);
        manifest.threads = args.threads;
        ppcat_cli::run(&manifest)
    });
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ppcat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
