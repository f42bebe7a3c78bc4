//! The `dcam` command line.
//!
//! Every subcommand reads one dataset, given as `idx:IMAGES,LABELS`,
//! `csv:PATH[#LABEL_COLUMN]` or `blobs:N,K,DIM,SEPARATION,SEED`, and writes
//! its artifacts into an output directory. Exit status is 0 on success, 1 when
//! a run fails and 2 for usage errors, which include missing input files.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dcam_core::EAE_HIDDEN;

/// Seed used when neither the configuration nor a flag sets one.
pub const SEED_ENV: &str = "DCAM_SEED";

#[derive(Debug, Parser)]
#[command(name = "dcam", version, about = "Deep clustering with associative memory dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DataArg {
    /// idx:IMAGES,LABELS | csv:PATH[#LABEL_COLUMN] | blobs:N,K,DIM,SEPARATION,SEED
    #[arg(long, value_name = "SPEC")]
    data: String,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// File of `key = value` lines naming training configuration fields
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration field (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Overrides the seed of the configuration file
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct NetArgs {
    /// Number of clusters
    #[arg(long)]
    k: usize,
    /// Encoder hidden widths; the decoder mirrors them
    #[arg(long, value_delimiter = ',', default_values_t = EAE_HIDDEN)]
    hidden: Vec<usize>,
    /// Latent width (defaults to k)
    #[arg(long)]
    latent_dim: Option<usize>,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Also write the pre-dynamics latent codes with their labels
    #[arg(long)]
    emit_latent: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the autoencoder alone and save it
    Pretrain {
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Pretrain, then train the network jointly with the prototypes
    Train {
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Start from a network saved by `pretrain` instead of pretraining
        #[arg(long, value_name = "MODEL")]
        init: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
        /// Save the model every time the number of attractor steps changes
        #[arg(long)]
        checkpoints: bool,
    },
    /// Label a dataset with a trained model
    Infer {
        #[arg(long, value_name = "MODEL")]
        model: PathBuf,
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Label and score a dataset with a trained model
    Evaluate {
        #[arg(long, value_name = "MODEL")]
        model: PathBuf,
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// k-means on the raw features, or on the latent codes of a saved network
    Baseline {
        #[command(flatten)]
        data: DataArg,
        /// Number of clusters
        #[arg(long)]
        k: usize,
        /// k-means++ restarts; the lowest inertia wins
        #[arg(long, default_value_t = 1000)]
        n_init: usize,
        /// Cluster the latent codes of this network instead of the features
        #[arg(long, value_name = "MODEL")]
        model: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Write a synthetic blobs dataset as CSV with a `label` column
    Blobs {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 50)]
        dim: usize,
        #[arg(long, default_value_t = 8.0)]
        separation: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV file to write
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

/// Runs the command line `argv` (program name first) and returns the exit
/// status.
pub fn run<S: AsRef<str>>(argv: &[S]) -> i32 {
    let cli = match Cli::try_parse_from(argv.iter().map(AsRef::as_ref)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("dcam: {msg}");
            2
        }
        Err(commands::Failure::Runtime(msg)) => {
            eprintln!("dcam: {msg}");
            1
        }
    }
}
