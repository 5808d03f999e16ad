//! Dataset-bias auditing for image classification.
//!
//! A probe turns each image into features that carry no information about the
//! task (eight border pixels, or a single blur score). A random forest trained
//! on those features should score at chance; anything clearly above chance
//! means the labels leak through acquisition conditions.

pub mod audit;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod forest;
pub mod idx;
pub mod probes;
pub mod rng;
pub mod synthgen;

pub use audit::{render_report, run_audit, run_blur_triplet, AuditReport, ReportFormat};
pub use dataset::{load_image_folder, random_guess_accuracy, split, ImageRecord, LabeledImageSet, Split, SplitSpec};
pub use error::{Error, Result};
pub use forest::{accuracy, fit, ForestConfig, RandomForestModel};
pub use idx::load_idx_pair;
pub use probes::{blur_metric, build_feature_matrix, eight_pixel_probe, masked_blur_metric, separate_background, BlurRegion, FeatureMatrix, ProbeId};
pub use synthgen::{generate, BiasChannel, SynthConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
