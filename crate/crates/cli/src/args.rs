use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "clipgeom", version, about = "Geometry of raw CLIP image/text embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a CSV matrix (optional leading `id` column) to EMB1.
    ImportCsv(ImportCsv),
    /// Per-modality moments and norm summary.
    Stats(Stats),
    /// Per-feature separability of image vs text.
    Sep(Pair<SepExtra>),
    /// Off-diagonal dominance of each covariance row.
    Odd(Odd),
    /// Thin-shell summary of centered norms.
    ThinShell(ThinShell),
    /// Image-vs-text histogram KL per feature.
    FeatureKl(Pair<FeatureKlExtra>),
    /// Fit and apply ZCA whitening.
    Whiten(Whiten),
    /// Compare whitened norms with √n and √(n − E²‖y‖).
    WhitenCheck(WhitenCheck),
    /// Chi-distribution mean and std, optionally with a Monte Carlo check.
    ChiRef(ChiRef),
    /// Conformity, cosine to the mean and the fitted estimate.
    Conformity(Conformity),
    /// Least-squares fit of conformity on cosine to the mean.
    FitEstimator(SingleInput),
    /// KL between image and text conformity distributions over an α grid.
    KlSweep(Pair<KlSweepExtra>),
    /// NT-Xent loss breakdown.
    Loss(Pair<LossExtra>),
    /// NT-Xent loss breakdown over an α grid (CSV).
    LossSweep(Pair<LossSweepExtra>),
    /// Top-1 retrieval correctness per pair.
    Classify(Pair<RuleExtra>),
    /// Indices of the most separable features.
    TopFeatures(Pair<TopExtra>),
    /// Train a linear SVM separating image from text on selected features.
    TrainSep(Pair<TrainExtra>),
    /// SLERP between two rows of an EMB1 file over a t grid.
    Slerp(Slerp),
    /// vSLERP between two rows over t and α grids.
    Vslerp(Vslerp),
    /// Seeded Gaussian embedding set.
    Synth(Synth),
    /// Seeded paired image/text sets with optional planted duplicates.
    SynthPaired(SynthPaired),
    /// Cosine-to-mean vs cosine-to-far-vector populations of a Gaussian cloud.
    BlurDemo(BlurDemo),
    /// Re-run the command recorded in a manifest.
    Replay(Replay),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ImportCsv(_) => "import-csv",
            Command::Stats(_) => "stats",
            Command::Sep(_) => "sep",
            Command::Odd(_) => "odd",
            Command::ThinShell(_) => "thin-shell",
            Command::FeatureKl(_) => "feature-kl",
            Command::Whiten(_) => "whiten",
            Command::WhitenCheck(_) => "whiten-check",
            Command::ChiRef(_) => "chi-ref",
            Command::Conformity(_) => "conformity",
            Command::FitEstimator(_) => "fit-estimator",
            Command::KlSweep(_) => "kl-sweep",
            Command::Loss(_) => "loss",
            Command::LossSweep(_) => "loss-sweep",
            Command::Classify(_) => "classify",
            Command::TopFeatures(_) => "top-features",
            Command::TrainSep(_) => "train-sep",
            Command::Slerp(_) => "slerp",
            Command::Vslerp(_) => "vslerp",
            Command::Synth(_) => "synth",
            Command::SynthPaired(_) => "synth-paired",
            Command::BlurDemo(_) => "blur-demo",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ImportCsv {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_parser = ["image", "text", "other"])]
    pub modality: String,
    /// The first line is data, not a header.
    #[arg(long)]
    pub no_header: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SingleInput {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct Stats {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Include the full covariance matrix.
    #[arg(long)]
    pub covariance: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Image and text inputs plus command-specific flags.
#[derive(Debug, Args, Serialize)]
pub struct Pair<T: Args> {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub texts: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub extra: T,
}

#[derive(Debug, Args, Serialize)]
pub struct SepExtra {
    /// Length of the reported ranking.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct Odd {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ThinShell {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    pub k: f64,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FeatureKlExtra {
    /// Comma-separated feature indices; all features when omitted.
    #[arg(long)]
    pub features: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    /// Also write both histograms of the first listed feature as TSV.
    #[arg(long)]
    pub hist_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct Whiten {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Absolute ε added to every eigenvalue; default 1e-8·λ_max.
    #[arg(long)]
    pub eigen_floor: Option<f64>,
    /// Write W as EMB1 (modality other) plus a `.json` sidecar with mean and ε.
    #[arg(long)]
    pub transform_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct WhitenCheck {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Whiten the input first instead of treating it as already whitened.
    #[arg(long)]
    pub fit: bool,
    #[arg(long, requires = "fit")]
    pub eigen_floor: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ChiRef {
    #[arg(long)]
    pub n: u64,
    /// Draw this many standard normal vectors and compare their norms.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct Conformity {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Use fixed coefficients instead of the least-squares fit.
    #[arg(long, requires = "b", allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, requires = "a", allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    /// Per-instance TSV: id, C, cos_to_mean, C_hat.
    #[arg(long)]
    pub instances_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct KlSweepExtra {
    #[arg(long, default_value = "image", value_parser = ["image", "text", "both"])]
    pub target: String,
    /// `lo:hi:step` (inclusive) or a single value.
    #[arg(long, default_value = "-1:1:0.05", allow_hyphen_values = true)]
    pub alphas: String,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    #[arg(long, default_value = "image-text", value_parser = ["image-text", "text-image"])]
    pub direction: String,
}

#[derive(Debug, Args, Serialize)]
pub struct LossExtra {
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
    #[arg(long, default_value = "symmetric", value_parser = ["symmetric", "text-to-image", "image-to-text"])]
    pub rule: String,
    /// Shift applied before the loss, `v − α·m`.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value = "image", value_parser = ["image", "text", "both"])]
    pub target: String,
    /// Average over seeded shuffled mini-batches instead of one batch.
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct LossSweepExtra {
    #[arg(long, default_value = "image", value_parser = ["image", "text", "both"])]
    pub target: String,
    #[arg(long, default_value = "-1:1:0.05", allow_hyphen_values = true)]
    pub alphas: String,
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
    #[arg(long, default_value = "symmetric", value_parser = ["symmetric", "text-to-image", "image-to-text"])]
    pub rule: String,
}

#[derive(Debug, Args, Serialize)]
pub struct RuleExtra {
    #[arg(long, default_value = "symmetric", value_parser = ["symmetric", "text-to-image", "image-to-text"])]
    pub rule: String,
}

#[derive(Debug, Args, Serialize)]
pub struct TopExtra {
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainExtra {
    /// Comma-separated feature indices; otherwise the top `k` separable.
    #[arg(long)]
    pub features: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Held-out image set to evaluate on.
    #[arg(long, requires = "test_texts")]
    pub test_images: Option<PathBuf>,
    #[arg(long, requires = "test_images")]
    pub test_texts: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct Slerp {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Row id, or row index when no id matches.
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
    #[arg(long, default_value = "0:1:0.1")]
    pub ts: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct Vslerp {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
    #[arg(long, default_value = "0.5")]
    pub ts: String,
    #[arg(long, default_value = "-2:2:0.5", allow_hyphen_values = true)]
    pub alphas: String,
    /// EMB1 file whose first row is the mean; defaults to the input's mean.
    #[arg(long)]
    pub mean: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct Synth {
    /// JSON synthetic spec; replaces the generator flags.
    #[arg(long, conflicts_with_all = ["dim", "count", "center", "scale", "seed", "modality"])]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    pub dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    /// Leading coordinates of the mean, comma-separated; the rest are 0.
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<String>,
    /// Per-feature standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "other", value_parser = ["image", "text", "other"])]
    pub modality: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthPaired {
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 128)]
    pub count: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub image_center: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub text_center: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0.9)]
    pub coupling: f64,
    #[arg(long, default_value_t = 0)]
    pub duplicates: usize,
    #[arg(long, default_value_t = clipgeom_core::synthetic::DEFAULT_DUPLICATE_JITTER)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Image set path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub texts_out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BlurDemo {
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value = "10,5,5", allow_hyphen_values = true)]
    pub center: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    /// TSV with both histograms, one block each.
    #[arg(long)]
    pub hist_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct Replay {
    #[arg(long)]
    pub manifest: PathBuf,
}
