//! Flag definitions. Every training knob mirrors a TrainConfig field
//! one-to-one so that experiments are pure flag sweeps with no hidden
//! state; defaults come from the library constants.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use dfdl::classify::{DEFAULT_LAMBDA, DEFAULT_MIN_REGION_PATCHES, DEFAULT_VOTE_THRESHOLD};
use dfdl::data::{DEFAULT_PATCHES_PER_CLASS, DEFAULT_PATCH_SIZE};
use dfdl::train::{
    DEFAULT_BASES_PER_CLASS, DEFAULT_MAX_OUTER_ITERS, DEFAULT_OBJECTIVE_TOL, DEFAULT_RHO,
    DEFAULT_RHO_SHRINK, DEFAULT_SPARSITY,
};
use dfdl::{Connectivity, DecisionMode, ImageDecisionRule};

#[derive(Debug, Parser)]
#[command(
    name = "dfdl",
    about = "Discriminative dictionary learning on image patches",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one dictionary per class from the manifest's train split.
    Train(TrainArgs),
    /// Classify a single image with a trained model.
    Classify(ClassifyArgs),
    /// Score a trained model on the manifest's test split.
    Eval(EvalArgs),
    /// Generate a seeded synthetic image dataset plus manifest.
    Synth(SynthArgs),
}

/// How patch grids are turned into an image-level positive/negative call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeFlag {
    Vote,
    Region,
}

/// Neighborhood used when growing connected regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConnectivityFlag {
    Four,
    Eight,
}

impl ModeFlag {
    pub fn to_mode(self) -> DecisionMode {
        match self {
            ModeFlag::Vote => DecisionMode::ProportionVote,
            ModeFlag::Region => DecisionMode::RegionDetect,
        }
    }
}

impl ConnectivityFlag {
    pub fn to_connectivity(self) -> Connectivity {
        match self {
            ConnectivityFlag::Four => Connectivity::Four,
            ConnectivityFlag::Eight => Connectivity::Eight,
        }
    }
}

#[derive(Debug, Parser)]
pub struct TrainArgs {
    /// Manifest listing training images (path<TAB>label<TAB>split);
    /// relative paths are resolved against the manifest's directory.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Where to write the trained model.
    #[arg(long, default_value = "model.dfdl")]
    pub out: PathBuf,

    /// Optional per-iteration trace log (line-delimited key=value).
    #[arg(long)]
    pub trace: Option<PathBuf>,

    /// Dictionary atoms learned per class.
    #[arg(long, default_value_t = DEFAULT_BASES_PER_CLASS)]
    pub bases: usize,

    /// OMP sparsity budget L used during training.
    #[arg(long, default_value_t = DEFAULT_SPARSITY)]
    pub sparsity: usize,

    /// Weight of the complementary (push-away) term.
    #[arg(long, default_value_t = DEFAULT_RHO)]
    pub rho: f64,

    /// Shrink factor applied to rho when F fails the PSD check.
    #[arg(long, default_value_t = DEFAULT_RHO_SHRINK)]
    pub rho_shrink: f64,

    /// Maximum outer (code/update) iterations per class.
    #[arg(long, default_value_t = DEFAULT_MAX_OUTER_ITERS)]
    pub iters: usize,

    /// Relative objective-change tolerance for early stopping.
    #[arg(long, default_value_t = DEFAULT_OBJECTIVE_TOL)]
    pub tol: f64,

    /// Block-coordinate sweeps per dictionary update.
    #[arg(long, default_value_t = 1)]
    pub sweeps: usize,

    /// Side length of the square patches.
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    pub patch_size: usize,

    /// Random patches drawn per class, spread across its images.
    #[arg(long, default_value_t = DEFAULT_PATCHES_PER_CLASS)]
    pub patches_per_class: usize,

    /// Area-averaging downsample factor applied before extraction.
    #[arg(long, default_value_t = 1)]
    pub downsample: usize,

    /// Master seed; patch draws and per-class initializations derive
    /// from it deterministically.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// l1 penalty stored in the model for SRC classification.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,

    /// Image-level decision rule stored in the model.
    #[arg(long, value_enum, default_value_t = ModeFlag::Vote)]
    pub mode: ModeFlag,

    /// Positive-proportion threshold for vote mode.
    #[arg(long, default_value_t = DEFAULT_VOTE_THRESHOLD)]
    pub threshold: f64,

    /// Minimum component size (in patches) for region mode.
    #[arg(long, default_value_t = DEFAULT_MIN_REGION_PATCHES)]
    pub min_region: usize,

    /// Region connectivity: four or eight neighbors.
    #[arg(long, value_enum, default_value_t = ConnectivityFlag::Eight)]
    pub connectivity: ConnectivityFlag,
}

impl TrainArgs {
    pub fn decision_rule(&self) -> ImageDecisionRule {
        ImageDecisionRule {
            mode: self.mode.to_mode(),
            threshold: self.threshold,
            min_region_patches: self.min_region,
            connectivity: self.connectivity.to_connectivity(),
        }
    }
}

#[derive(Debug, Parser)]
pub struct ClassifyArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,

    /// Image to classify (PGM or PPM).
    #[arg(long)]
    pub image: PathBuf,

    /// Patch side length; defaults to sqrt of the model dimension.
    #[arg(long)]
    pub patch_size: Option<usize>,

    /// Area-averaging downsample factor applied before extraction.
    #[arg(long, default_value_t = 1)]
    pub downsample: usize,

    /// Label treated as positive for vote/region statistics; defaults
    /// to the last class the model lists.
    #[arg(long)]
    pub positive_class: Option<String>,

    /// Override the stored decision mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeFlag>,

    /// Override the stored vote threshold.
    #[arg(long)]
    pub threshold: Option<f64>,

    /// Override the stored minimum region size.
    #[arg(long)]
    pub min_region: Option<usize>,

    /// Override the stored connectivity.
    #[arg(long, value_enum)]
    pub connectivity: Option<ConnectivityFlag>,

    /// Write the qualifying-region mask as a PGM at patch-grid
    /// resolution (region mode only).
    #[arg(long)]
    pub mask: Option<PathBuf>,

    /// Dump the per-patch label grid as tab-separated class indices.
    #[arg(long)]
    pub grid_dump: Option<PathBuf>,
}

#[derive(Debug, Parser)]
pub struct EvalArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,

    /// Manifest whose test split is scored.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Patch side length; defaults to sqrt of the model dimension.
    #[arg(long)]
    pub patch_size: Option<usize>,

    /// Area-averaging downsample factor applied before extraction.
    #[arg(long, default_value_t = 1)]
    pub downsample: usize,

    /// Also write the report as a JSON document.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Parser)]
pub struct SynthArgs {
    /// Directory for the generated images and manifest.
    #[arg(long)]
    pub out_dir: PathBuf,

    /// Patch side length; samples have dimension patch_size^2.
    #[arg(long, default_value_t = 10)]
    pub patch_size: usize,

    /// Number of classes.
    #[arg(long, default_value_t = 2)]
    pub classes: usize,

    /// Orthonormal atoms planted per class.
    #[arg(long, default_value_t = 8)]
    pub planted_atoms: usize,

    /// Nonzero planted coefficients per sample.
    #[arg(long, default_value_t = DEFAULT_SPARSITY)]
    pub sparsity: usize,

    /// Isotropic Gaussian noise level before normalization.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sd: f64,

    /// Training images per class.
    #[arg(long, default_value_t = 100)]
    pub train_images: usize,

    /// Test images per class.
    #[arg(long, default_value_t = 20)]
    pub test_images: usize,

    /// Each image is a tiles x tiles mosaic of independently drawn
    /// samples of its class.
    #[arg(long, default_value_t = 1)]
    pub tiles: usize,

    /// Seed for planting and sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn train_defaults_follow_the_library_constants() {
        let cli = Cli::try_parse_from(["dfdl", "train", "--manifest", "m.tsv"]).unwrap();
        let Command::Train(args) = cli.command else {
            panic!("expected a train command");
        };
        assert_eq!(args.patch_size, 20);
        assert_eq!(args.patches_per_class, 10_000);
        assert_eq!(args.bases, 500);
        assert_eq!(args.rho, 0.001);
        assert_eq!(args.rho_shrink, 0.9);
        assert_eq!(args.sparsity, 3);
        assert_eq!(args.lambda, 0.1);
        assert_eq!(args.threshold, 0.5);
        assert_eq!(args.min_region, 4);
        assert_eq!(args.connectivity, ConnectivityFlag::Eight);
        assert_eq!(args.mode, ModeFlag::Vote);
        assert_eq!(args.seed, 0);
        assert_eq!(args.downsample, 1);
    }

    #[test]
    fn missing_required_flags_are_usage_errors() {
        assert!(Cli::try_parse_from(["dfdl", "train"]).is_err());
        assert!(Cli::try_parse_from(["dfdl", "classify", "--model", "m.dfdl"]).is_err());
        assert!(Cli::try_parse_from(["dfdl", "nonsense"]).is_err());
    }

    #[test]
    fn decision_rule_reflects_the_flags() {
        let cli = Cli::try_parse_from([
            "dfdl",
            "train",
            "--manifest",
            "m.tsv",
            "--mode",
            "region",
            "--min-region",
            "9",
            "--connectivity",
            "four",
        ])
        .unwrap();
        let Command::Train(args) = cli.command else {
            panic!("expected a train command");
        };
        let rule = args.decision_rule();
        assert_eq!(rule.mode, DecisionMode::RegionDetect);
        assert_eq!(rule.min_region_patches, 9);
        assert_eq!(rule.connectivity, Connectivity::Four);
    }
}
