pub mod audio;
pub mod dsp;
pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod reduction;
pub mod synth;

pub use error::{Error, Result};
pub use audio::{AffectLabel, AudioClip, DatasetManifest, LabelRange};
pub use config::RunConfig;
pub use eval::{EvalReport, GridSpec, SplitIndices, Target};
pub use features::{Extractor, ExtractorConfig, FeatureMatrix, FeatureVector, N_FEATURES};
pub use models::{EstimatorSpec, Family, FeatureSelection, ModelArtifact};
