//! Discriminative feature-oriented dictionary learning.
//!
//! Per-class dictionaries are trained to reconstruct their own class's
//! patches well and everyone else's poorly; classification codes a patch
//! over the concatenated dictionaries and picks the class with the
//! smallest restricted residual. Image-level decisions aggregate patch
//! labels by proportion voting or connected-region detection.

pub mod classify;
pub mod data;
pub mod eig;
pub mod error;
pub mod model;
pub mod netpbm;
pub mod sparse;
pub mod train;

pub use classify::{
    classify_image_by_vote, classify_patch, classify_patches, detect_regions, ClassifierModel,
    Connectivity, DecisionMode, ImageDecisionRule, PatchDecision, PatchGridLabels, RegionDecision,
    VoteDecision,
};
pub use data::{
    downsample, extract_grid_patches, extract_random_patches, generate_synthetic, to_luminance,
    DatasetManifest, GrayImage, ManifestEntry, Split, SyntheticData, SyntheticSpec,
};
pub use error::{Error, Result};
pub use model::{load_model, save_model, write_trace};
pub use sparse::{l1_encode, omp_encode_batch, Dictionary, SampleSet, SparseCodes};
pub use train::{
    check_psd, compute_gram_pair, objective, train_dfdl, update_dictionary, weyl_lower_bound,
    GramPair, PsdReport, TrainConfig, TrainTrace,
};
