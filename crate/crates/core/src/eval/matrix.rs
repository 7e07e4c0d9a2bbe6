use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{r2, rmse};
use super::split::{train_test_split, SplitIndices};
use crate::audio::AffectLabel;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FEATURE_SCHEMA_VERSION};
use crate::models::{fit_model, Family, FeatureSelection};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Arousal,
    Valence,
}

impl Target {
    pub const BOTH: [Target; 2] = [Target::Arousal, Target::Valence];

    pub fn name(self) -> &'static str {
        match self {
            Target::Arousal => "arousal",
            Target::Valence => "valence",
        }
    }

    pub fn values(self, labels: &[AffectLabel]) -> Vec<f64> {
        labels
            .iter()
            .map(|l| match self {
                Target::Arousal => l.arousal,
                Target::Valence => l.valence,
            })
            .collect()
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arousal" => Ok(Target::Arousal),
            "valence" => Ok(Target::Valence),
            _ => Err(Error::InvalidArgument(format!("target must be arousal or valence, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub train_r2: f64,
    pub test_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub target: Target,
    pub feature_set: String,
    pub family: Family,
    /// Columns seen by the estimator.
    pub n_inputs: Option<usize>,
    pub hyperparameters: std::collections::BTreeMap<String, f64>,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
}

impl Cell {
    pub fn ok(&self) -> bool {
        self.metrics.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub feature_schema_version: u32,
    pub config: RunConfig,
    pub splits: Vec<(Target, SplitIndices)>,
    pub cells: Vec<Cell>,
    /// Seconds per cell, in cell order. Kept out of the JSON so reports are reproducible.
    #[serde(skip)]
    pub timings: Vec<f64>,
}

impl EvalReport {
    pub fn cell(&self, target: Target, feature_set: &str, family: Family) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.target == target && c.feature_set == feature_set && c.family == family)
    }

    pub fn n_failed(&self) -> usize {
        self.cells.iter().filter(|c| !c.ok()).count()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "target",
            "feature_set",
            "family",
            "n_inputs",
            "train_rmse",
            "test_rmse",
            "train_r2",
            "test_r2",
            "error",
        ])?;
        for c in &self.cells {
            let m = |f: fn(&Metrics) -> f64| c.metrics.as_ref().map(|v| f(v).to_string()).unwrap_or_default();
            w.write_record([
                c.target.name().to_string(),
                c.feature_set.clone(),
                c.family.name().to_string(),
                c.n_inputs.map(|v| v.to_string()).unwrap_or_default(),
                m(|v| v.train_rmse),
                m(|v| v.test_rmse),
                m(|v| v.train_r2),
                m(|v| v.test_r2),
                c.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_aligned(features: &FeatureMatrix, labels: &[AffectLabel]) -> Result<()> {
    if features.n_samples() != labels.len() {
        return Err(Error::LengthMismatch { left: features.n_samples(), right: labels.len() });
    }
    Ok(())
}

/// Fits on the train rows and scores train and test rows.
pub fn evaluate_cell(
    config: &RunConfig,
    family: Family,
    selection: &FeatureSelection,
    x: &DMatrix<f64>,
    y: &[f64],
    split: &SplitIndices,
    target: Target,
) -> Cell {
    let names = crate::features::feature_names();
    let mut cell = Cell {
        target,
        feature_set: selection.label(),
        family,
        n_inputs: None,
        hyperparameters: Default::default(),
        metrics: None,
        error: None,
    };
    let run = || -> Result<(Metrics, usize, std::collections::BTreeMap<String, f64>)> {
        let spec = config.spec_for(family)?;
        let xtr = x.select_rows(&split.train_idx);
        let xte = x.select_rows(&split.test_idx);
        let ytr: Vec<f64> = split.train_idx.iter().map(|&i| y[i]).collect();
        let yte: Vec<f64> = split.test_idx.iter().map(|&i| y[i]).collect();
        let (model, _) = fit_model(&spec, selection, &xtr, names, &ytr, target.name(), config.seed)?;
        let ptr = model.predict(&xtr)?;
        let pte = model.predict(&xte)?;
        if ptr.iter().chain(&pte).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite prediction".into()));
        }
        let m = Metrics {
            train_rmse: rmse(&ytr, &ptr)?,
            test_rmse: rmse(&yte, &pte)?,
            train_r2: r2(&ytr, &ptr)?,
            test_r2: r2(&yte, &pte)?,
        };
        let width = model.pipeline.transform(&xtr.rows(0, 1).into_owned())?.ncols();
        Ok((m, width, model.hyperparameters))
    };
    match run() {
        Ok((m, width, hp)) => {
            cell.metrics = Some(m);
            cell.n_inputs = Some(width);
            cell.hyperparameters = hp;
        }
        Err(e) => {
            log::warn!("{} / {} / {} failed: {e}", target.name(), cell.feature_set, family);
            cell.error = Some(e.to_string());
        }
    }
    cell
}

/// Every (target, feature set, family) combination on one shared split per target.
pub fn run_matrix(features: &FeatureMatrix, labels: &[AffectLabel], config: &RunConfig) -> Result<EvalReport> {
    config.validate()?;
    check_aligned(features, labels)?;
    let x = features.rows();
    let sets = config.feature_sets();
    let mut splits = Vec::new();
    let mut jobs = Vec::new();
    for target in Target::BOTH {
        let split = train_test_split(x.nrows(), config.split.test_fraction, config.split.seed)?;
        for sel in &sets {
            for family in &config.families {
                jobs.push((target, sel.clone(), *family, splits.len()));
            }
        }
        splits.push((target, split));
    }
    let ys: Vec<Vec<f64>> = Target::BOTH.iter().map(|t| t.values(labels)).collect();
    let results: Vec<(Cell, f64)> = jobs
        .par_iter()
        .map(|(target, sel, family, s)| {
            let start = Instant::now();
            let cell = evaluate_cell(config, *family, sel, x, &ys[*s], &splits[*s].1, *target);
            (cell, start.elapsed().as_secs_f64())
        })
        .collect();
    let (cells, timings) = results.into_iter().unzip();
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        feature_schema_version: FEATURE_SCHEMA_VERSION,
        config: config.clone(),
        splits,
        cells,
        timings,
    })
}
