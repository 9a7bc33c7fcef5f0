mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use config::{pick, FileConfig, UsageError};

#[derive(Debug, Parser)]
#[command(name = "foodnet", version, about = "Train and evaluate a small CNN and a bag-of-features baseline for food-image recognition")]
pub struct Cli {
    /// Seed for every random choice (initialization, shuffles, splits, synthesis, warps)
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; 0 uses one per core. Outputs do not depend on this value
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// TOML file whose keys mirror the long flag names; explicit flags win
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pack a directory of class subdirectories into a dataset file
    Ingest(IngestArgs),
    /// Generate a synthetic ten-class dataset
    Synth(SynthArgs),
    /// Stratified train/test split of a dataset file
    Split(SplitArgs),
    /// Train the CNN with the cost-driven learning rate and early stopping
    TrainCnn(TrainCnnArgs),
    /// Train the bag-of-features + linear SVM baseline
    TrainBof(TrainBofArgs),
    /// Evaluate a CNN checkpoint or BoF model on a dataset file
    Eval(EvalArgs),
    /// Check backpropagation against finite differences (exit 1 on failure)
    Gradcheck(GradcheckArgs),
    /// Write random affine expansions of dataset images as PNG files
    AugmentPreview(AugmentPreviewArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory with one subdirectory per class
    #[arg(long)]
    pub root: PathBuf,
    /// Output dataset file
    #[arg(long)]
    pub out: PathBuf,
    /// Side length images are resized to
    #[arg(long, default_value_t = 128)]
    pub size: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Images per class
    #[arg(long, default_value_t = 50)]
    pub per_class: usize,
    /// Number of classes (at most 10)
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    /// Side length of the rendered images
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    /// Output dataset file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Input dataset file
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
    /// Fraction of each class assigned to training, in (0, 1)
    #[arg(long, default_value_t = 0.8)]
    pub frac: f64,
}

#[derive(Debug, Args)]
pub struct AugmentFlags {
    /// Maximum absolute rotation in degrees
    #[arg(long, default_value_t = 20.0)]
    pub max_rotation: f64,
    /// Maximum absolute translation as a fraction of width/height
    #[arg(long, default_value_t = 0.1)]
    pub max_translate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub scale_min: f64,
    #[arg(long, default_value_t = 1.1)]
    pub scale_max: f64,
    /// Value for pixels sampled outside the source image
    #[arg(long, default_value_t = 0.0)]
    pub fill: f32,
}

#[derive(Debug, Args)]
pub struct TrainCnnArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Where the best-test-accuracy checkpoint is written
    #[arg(long)]
    pub checkpoint_out: PathBuf,
    /// Per-epoch curves as CSV
    #[arg(long)]
    pub curves_out: PathBuf,
    /// Optional SVG chart of the curves
    #[arg(long)]
    pub chart_out: Option<PathBuf>,
    /// Base learning rate
    #[arg(long, default_value_t = 0.001)]
    pub eta0: f64,
    /// Ceiling on the learning rate
    #[arg(long, default_value_t = 0.05)]
    pub eta_max: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 100)]
    pub max_epochs: usize,
    /// Epochs without test-accuracy improvement before stopping
    #[arg(long, default_value_t = 25)]
    pub patience: usize,
    /// Replace every training image by a fresh random warp each epoch
    #[arg(long, overrides_with = "no_augment")]
    pub augment: bool,
    /// Train on the images as they are (default)
    #[arg(long)]
    pub no_augment: bool,
    #[command(flatten)]
    pub warp: AugmentFlags,
}

#[derive(Debug, Args)]
pub struct TrainBofArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Vocabulary size (number of visual words)
    #[arg(long, default_value_t = 256)]
    pub k: usize,
    /// SVM regularization strength
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    #[arg(long, default_value_t = 100)]
    pub svm_epochs: usize,
    #[arg(long, default_value_t = 50)]
    pub kmeans_iters: usize,
    /// Descriptors sampled to fit the vocabulary
    #[arg(long, default_value_t = 50_000)]
    pub max_descriptors: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// CNN checkpoint or BoF model (detected from the file header)
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// JSON report output
    #[arg(long)]
    pub report_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Flip the sign of the analytic gradient (self-test; must fail)
    #[arg(long)]
    pub corrupt: bool,
}

#[derive(Debug, Args)]
pub struct AugmentPreviewArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Augmented copies per source image
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// Number of source images, taken from the start of the dataset
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub warp: AugmentFlags,
}

fn run() -> anyhow::Result<()> {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        // help/version exit 0, parse errors exit 2
        Err(e) => e.exit(),
    };
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = pick(&matches, "seed", cli.seed, file.seed);
    let threads = pick(&matches, "threads", cli.threads, file.threads);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let (_, sub) = matches.subcommand().expect("subcommand is required");
    let ctx = commands::Context { seed, file, matches: sub };
    match &cli.command {
        Command::Ingest(a) => commands::ingest(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Split(a) => commands::split(&ctx, a),
        Command::TrainCnn(a) => commands::train_cnn(&ctx, a),
        Command::TrainBof(a) => commands::train_bof(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Gradcheck(a) => commands::gradcheck(&ctx, a),
        Command::AugmentPreview(a) => commands::augment_preview(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
