//! Regression estimators behind one fit/predict contract.

mod artifact;
pub mod forest;
pub mod linear;
pub mod mlp;
pub mod svr;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use artifact::{
    fit_model, load_model, model_from_json, model_to_json, save_model, FeatureSelection, FitDiagnostics,
    ModelArtifact, Parameters, Pipeline, Reduction, MODEL_SCHEMA_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ols,
    Lasso,
    Elasticnet,
    SvrLinear,
    SvrRbf,
    SvrPoly,
    Mlp2,
    RandomForest,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Ols,
        Family::Lasso,
        Family::Elasticnet,
        Family::SvrLinear,
        Family::SvrRbf,
        Family::SvrPoly,
        Family::Mlp2,
        Family::RandomForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Ols => "ols",
            Family::Lasso => "lasso",
            Family::Elasticnet => "elasticnet",
            Family::SvrLinear => "svr_linear",
            Family::SvrRbf => "svr_rbf",
            Family::SvrPoly => "svr_poly",
            Family::Mlp2 => "mlp2",
            Family::RandomForest => "random_forest",
        }
    }

    /// Whether inputs are z-scored before fitting.
    pub fn wants_scaling(self) -> bool {
        !matches!(self, Family::Ols | Family::RandomForest)
    }

    pub fn hyperparameters(self) -> &'static [HyperParam] {
        use Family::*;
        match self {
            Ols => &[],
            Lasso => &LASSO,
            Elasticnet => &ELASTICNET,
            SvrLinear => &SVR_LINEAR,
            SvrRbf => &SVR_RBF,
            SvrPoly => &SVR_POLY,
            Mlp2 => &MLP,
            RandomForest => &FOREST,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model family `{s}`")))
    }
}

/// Registry entry for one tunable value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParam {
    pub name: &'static str,
    /// `None` means the value is derived from the data or unbounded when unset.
    pub default: Option<f64>,
    pub min: f64,
    pub max: f64,
    pub integer: bool,
}

const fn real(name: &'static str, default: Option<f64>, min: f64, max: f64) -> HyperParam {
    HyperParam { name, default, min, max, integer: false }
}

const fn int(name: &'static str, default: Option<f64>, min: f64, max: f64) -> HyperParam {
    HyperParam { name, default, min, max, integer: true }
}

const POS: f64 = f64::MIN_POSITIVE;
const INF: f64 = f64::INFINITY;

const LASSO: [HyperParam; 3] = [
    real("alpha", Some(1.0), 0.0, INF),
    real("tol", Some(1e-7), POS, INF),
    int("max_iter", Some(10_000.0), 1.0, 1e9),
];
const ELASTICNET: [HyperParam; 4] = [
    real("alpha", Some(1.0), 0.0, INF),
    real("l1_ratio", Some(0.5), 0.0, 1.0),
    real("tol", Some(1e-7), POS, INF),
    int("max_iter", Some(10_000.0), 1.0, 1e9),
];
const SVR_LINEAR: [HyperParam; 4] = [
    real("C", Some(1.0), POS, INF),
    real("epsilon", Some(0.1), 0.0, INF),
    real("tol", Some(1e-3), POS, INF),
    int("max_iter", Some(100_000.0), 1.0, 1e12),
];
const SVR_RBF: [HyperParam; 5] = [
    real("C", Some(1.0), POS, INF),
    real("epsilon", Some(0.1), 0.0, INF),
    real("gamma", None, POS, INF),
    real("tol", Some(1e-3), POS, INF),
    int("max_iter", Some(100_000.0), 1.0, 1e12),
];
const SVR_POLY: [HyperParam; 6] = [
    real("C", Some(1.0), POS, INF),
    real("epsilon", Some(0.1), 0.0, INF),
    real("gamma", None, POS, INF),
    int("degree", Some(3.0), 1.0, 32.0),
    real("tol", Some(1e-3), POS, INF),
    int("max_iter", Some(100_000.0), 1.0, 1e12),
];
const MLP: [HyperParam; 4] = [
    int("hidden_units", Some(100.0), 1.0, 1e6),
    int("epochs", Some(200.0), 0.0, 1e9),
    real("learning_rate", Some(1e-3), POS, INF),
    int("adam", Some(1.0), 0.0, 1.0),
];
const FOREST: [HyperParam; 6] = [
    int("n_estimators", Some(100.0), 1.0, 1e6),
    int("max_depth", None, 1.0, 1e6),
    int("min_samples_split", Some(2.0), 2.0, 1e9),
    int("min_samples_leaf", Some(1.0), 1.0, 1e9),
    int("max_features", None, 1.0, 1e6),
    int("bootstrap", Some(1.0), 0.0, 1.0),
];

/// A model family with explicitly set hyperparameters; unset ones take registry defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub family: Family,
    pub hyperparameters: BTreeMap<String, f64>,
}

impl EstimatorSpec {
    pub fn new(family: Family) -> Self {
        EstimatorSpec { family, hyperparameters: BTreeMap::new() }
    }

    pub fn with(mut self, name: &str, value: f64) -> Result<Self> {
        self.set(name, value)?;
        Ok(self)
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        check(self.family, name, value)?;
        self.hyperparameters.insert(name.to_string(), value);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.hyperparameters.iter().try_for_each(|(k, v)| check(self.family, k, *v))
    }

    /// Explicit value, else the registry default.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.hyperparameters
            .get(name)
            .copied()
            .or_else(|| self.family.hyperparameters().iter().find(|h| h.name == name).and_then(|h| h.default))
    }

    fn get_usize(&self, name: &str) -> Option<usize> {
        self.get(name).map(|v| v as usize)
    }
}

fn check(family: Family, name: &str, value: f64) -> Result<()> {
    let Some(h) = family.hyperparameters().iter().find(|h| h.name == name) else {
        return Err(Error::UnknownHyperparameter { family: family.name().to_string(), name: name.to_string() });
    };
    if !value.is_finite() || value < h.min || value > h.max || (h.integer && value.fract() != 0.0) {
        return Err(Error::InvalidHyperparameter { name: name.to_string(), value });
    }
    Ok(())
}
