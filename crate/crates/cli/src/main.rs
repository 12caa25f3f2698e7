//! Command-line front end: synthesize data, train, evaluate, predict and
//! run gradient checks.

mod commands;
mod error;
mod runconfig;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "agn", version, about = "Attractor-guided neural network for skeleton motion prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
pub struct ConfigArgs {
    /// `key=value` run configuration file (`#` starts a comment).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one configuration key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Random seed; falls back to the config file, then AGN_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Svg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic planar chain and save it as MOTB or CSV.
    Synth {
        /// Joints in the chain, root included.
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(2..=1000))]
        joints: u32,
        #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u32).range(1..))]
        frames: u32,
        #[arg(long, default_value_t = 25.0)]
        fps: f64,
        /// Gaussian noise standard deviation in millimeters.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Output path; `.motb` or `.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on every window of a motion file.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Receives run.cfg, loss.csv, model.agnc and per-epoch checkpoints.
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Initial learning rate.
        #[arg(long)]
        lr: Option<f64>,
        /// Frames between consecutive training windows.
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Per-horizon MPJPE of a checkpoint against the zero-velocity baseline.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Frame offsets to report.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,10")]
        horizons: Vec<usize>,
        /// Frames between consecutive evaluation windows.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Predict the frames following the last t_in frames of a sequence.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the output file extension.
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Central-difference gradient checks of every layer and a tiny model.
    Gradcheck {
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        #[arg(long, default_value_t = agn::model::gradsuite::DEFAULT_EPS)]
        eps: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { joints, frames, fps, noise, seed, out } => {
            commands::synth(joints as usize, frames as usize, fps, noise, seed, &out)
        }
        Command::Train { data, out_dir, config, epochs, batch_size, lr, stride, max_iterations } => {
            let flags = commands::TrainFlags { epochs, batch_size, lr, stride, max_iterations };
            commands::train(&data, &out_dir, &config, flags)
        }
        Command::Eval { checkpoint, data, horizons, stride, csv, config } => {
            commands::eval(&checkpoint, &data, &horizons, stride, csv.as_deref(), &config)
        }
        Command::Predict { checkpoint, input, out, format, config } => {
            commands::predict(&checkpoint, &input, &out, format, &config)
        }
        Command::Gradcheck { tolerance, eps, seed } => commands::gradcheck(tolerance, eps, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(error::EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
