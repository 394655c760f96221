//! `idcenter` command-line front end.
//!
//! Exit status: 0 success, 1 usage error, 2 data or format error,
//! 3 numerical failure.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "idcenter", version, about = "Training-free feature centralization and re-identification evaluation")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores)
    #[arg(long, global = true, env = "IDCENTER_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Neighbour feature centralization over mutual nearest neighbours
    Nfc(NfcArgs),
    /// Blend each sample with the mean of its auxiliary features
    Aggregate(AggregateArgs),
    /// Normalize, then optionally aggregate and apply NFC
    Pipeline(PipelineArgs),
    /// mAP, CMC and identity density of a query set against a gallery
    Eval(EvalArgs),
    /// Identity density of one or more feature sets (unioned)
    Id2(Id2Args),
    /// Mahalanobis outlier filter and pose screening
    Cleanse(CleanseArgs),
    /// Per identity, the sample closest to the identity center
    SelectRepresentative(SelectArgs),
    /// Generate synthetic Gaussian identities
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct NfcArgs {
    /// Feature file (P2ID, or CSV by .csv extension)
    #[arg(long)]
    pub input: PathBuf,
    /// Outward neighbours per sample
    #[arg(long, default_value_t = 2)]
    pub k1: usize,
    /// Neighbours checked for reciprocity
    #[arg(long, default_value_t = 2)]
    pub k2: usize,
    /// Output P2ID file
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Auxiliary P2ID file aligned with the input
    #[arg(long)]
    pub aux: PathBuf,
    /// Weight of the auxiliary mean
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Order {
    AggregateFirst,
    NfcFirst,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Auxiliary P2ID file; enables the aggregation stage
    #[arg(long)]
    pub aux: Option<PathBuf>,
    /// Weight of the auxiliary mean
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// NFC outward neighbours; giving --k1 or --k2 enables NFC (other defaults to 2)
    #[arg(long)]
    pub k1: Option<usize>,
    /// NFC reciprocity neighbours
    #[arg(long)]
    pub k2: Option<usize>,
    /// Stage order when both stages are enabled
    #[arg(long, value_enum, default_value_t = Order::AggregateFirst)]
    pub order: Order,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub gallery: PathBuf,
    /// Apply k-reciprocal re-ranking before scoring
    #[arg(long)]
    pub rerank: bool,
    /// Re-ranking k1
    #[arg(long, default_value_t = 20)]
    pub rk1: usize,
    /// Re-ranking k2 (query expansion)
    #[arg(long, default_value_t = 6)]
    pub rk2: usize,
    /// Weight of the original distance in the re-ranked blend
    #[arg(long, default_value_t = 0.3)]
    pub lambda: f64,
    /// Keep same-identity same-camera gallery entries
    #[arg(long)]
    pub no_cam_filter: bool,
    /// Length of the reported CMC curve
    #[arg(long, default_value_t = 50)]
    pub max_rank: usize,
    /// JSON report path; a text summary goes to PATH.txt and stdout
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct Id2Args {
    /// One or more feature files
    #[arg(long, num_args = 1.., required = true)]
    pub input: Vec<PathBuf>,
    /// Optional JSON report path
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CleanseArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Pose keypoints (JSON Lines); without it the target manifest skips pose screening
    #[arg(long)]
    pub keypoints: Option<PathBuf>,
    /// Quantile p; samples outside [Q_p, Q_(1-p)] of their identity are removed
    #[arg(long, default_value_t = 0.005)]
    pub quantile: f64,
    /// Identities with fewer samples are not filtered
    #[arg(long, default_value_t = 10)]
    pub min_samples: usize,
    /// Covariance ridge relative to the mean variance
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon_scale: f64,
    /// Reference manifest (outlier filter only), JSON
    #[arg(long)]
    pub out_ref: PathBuf,
    /// Target manifest (outlier filter and valid pose), JSON
    #[arg(long)]
    pub out_trg: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of identities
    #[arg(long, default_value_t = 50)]
    pub ids: usize,
    /// Samples per identity
    #[arg(long, default_value_t = 10)]
    pub per_id: usize,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    /// Per-coordinate standard deviation around the identity center
    #[arg(long, default_value_t = 0.3)]
    pub sigma: f64,
    /// Auxiliary features per sample
    #[arg(long, default_value_t = 0)]
    pub aux_m: usize,
    /// Per-coordinate standard deviation of auxiliary features
    #[arg(long, default_value_t = 0.3)]
    pub aux_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leading samples of each identity that go to the query split
    #[arg(long, default_value_t = 2)]
    pub queries_per_id: usize,
    /// Writes PREFIX.{all,query,gallery}.p2id and matching .aux.p2id files
    #[arg(long)]
    pub out_prefix: PathBuf,
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
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: thread count must be >= 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(run::exit_code(&e))
        }
    }
}
