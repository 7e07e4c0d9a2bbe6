//! Run configuration shared by every command, loaded from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::LabelRange;
use crate::error::{Error, Result};
use crate::eval::GridSpec;
use crate::features::ExtractorConfig;
use crate::models::{EstimatorSpec, Family, FeatureSelection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { test_fraction: 0.2, seed: 42 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub manifest: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for estimators; grid configurations derive theirs from it.
    pub seed: u64,
    pub jobs: Option<usize>,
    pub extractor: ExtractorConfig,
    /// Raw annotation range; labels are used as-is when absent.
    pub label_range: Option<LabelRange>,
    /// Adds a `custom` feature set of columns whose training variance reaches this value.
    pub variance_threshold: Option<f64>,
    /// Adds a `custom` feature set with exactly these columns (takes precedence).
    pub custom_features: Vec<String>,
    pub pca_target: f64,
    pub kbest_k: usize,
    pub split: SplitConfig,
    pub families: Vec<Family>,
    /// Per-family hyperparameter overrides keyed by family name.
    pub models: BTreeMap<String, BTreeMap<String, f64>>,
    pub grid: GridSpec,
    pub checkpoint_every: usize,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            jobs: None,
            extractor: ExtractorConfig::default(),
            label_range: None,
            variance_threshold: None,
            custom_features: Vec::new(),
            pca_target: 0.9,
            kbest_k: 25,
            split: SplitConfig::default(),
            families: Family::ALL.to_vec(),
            models: BTreeMap::new(),
            grid: GridSpec::default(),
            checkpoint_every: 200,
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::SchemaMismatch(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pca_target > 0.0 && self.pca_target <= 1.0) {
            return Err(Error::InvalidArgument(format!("pca_target {} outside (0, 1]", self.pca_target)));
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!("test_fraction {} outside (0, 1)", self.split.test_fraction)));
        }
        if self.kbest_k == 0 || self.checkpoint_every == 0 {
            return Err(Error::InvalidArgument("kbest_k and checkpoint_every must be positive".into()));
        }
        for f in &self.families {
            self.spec_for(*f)?;
        }
        for name in self.models.keys() {
            name.parse::<Family>()?;
        }
        self.grid.validate()
    }

    /// Estimator spec with this config's overrides applied.
    pub fn spec_for(&self, family: Family) -> Result<EstimatorSpec> {
        let mut spec = EstimatorSpec::new(family);
        if let Some(hp) = self.models.get(family.name()) {
            for (k, v) in hp {
                spec.set(k, *v)?;
            }
        }
        Ok(spec)
    }

    /// The standard feature sets, in report order.
    pub fn feature_sets(&self) -> Vec<FeatureSelection> {
        let mut sets = vec![
            FeatureSelection::All,
            FeatureSelection::Pca { variance_target: self.pca_target },
            FeatureSelection::Kbest { k: self.kbest_k },
        ];
        if !self.custom_features.is_empty() {
            sets.push(FeatureSelection::Custom { names: self.custom_features.clone() });
        } else if let Some(threshold) = self.variance_threshold {
            sets.push(FeatureSelection::Variance { threshold });
        }
        sets
    }
}
