//! `avatarback`: command-line driver for the avatar loop.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "avatarback",
    version,
    about = "Full-head Gaussian avatars from frontal captures"
)]
pub struct Cli {
    /// Overrides the seed in the scene config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Scene config (TOML); the bundled synthetic scene when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, or output file for `render` and `eval`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 1 gives bitwise-reproducible runs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct StageArgs {
    /// Resume from this checkpoint instead of starting fresh.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Psnr,
    Ssim,
    L1,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stage 1: fit the avatar to the frontal views.
    Fit(StageArgs),
    /// Stages up to 3: render the avatar and invert the generator on the hybrid set.
    Invert(StageArgs),
    /// Stages up to 4: synthesize back views from the inverted generator.
    Synthesize(StageArgs),
    /// Stages up to 5: align the avatar to real and pseudo views.
    Align(StageArgs),
    /// The whole loop, with a checkpoint after every stage.
    Loop(StageArgs),
    /// Render one view of an avatar checkpoint, or of the synthetic ground truth.
    Render {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 180.0, allow_negative_numbers = true)]
        camera_azimuth: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        camera_elevation: f64,
        /// Render the checkpoint's generator instead of its avatar.
        #[arg(long, requires = "checkpoint")]
        generator: bool,
    },
    /// Image metrics over paired directories, FID/KID over feature files,
    /// or perceptual score aggregation.
    Eval {
        #[arg(long, requires = "ref_dir")]
        pred_dir: Option<PathBuf>,
        #[arg(long, requires = "pred_dir")]
        ref_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Metric::All)]
        metric: Metric,
        #[arg(long, requires = "features_b")]
        features_a: Option<PathBuf>,
        #[arg(long, requires = "features_a")]
        features_b: Option<PathBuf>,
        /// JSON lines of five-criterion score records.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Write the bundled synthetic subject: config, mesh, frontal images,
    /// generator and ground-truth back views.
    MakeScene,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1).map(ToString::to_string) {
                if !msg.ends_with(&cause) {
                    msg = format!("{msg}: {cause}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
