use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::forest::{fit_random_forest, ForestParams, RandomForest};
use super::linear::{fit_elasticnet, fit_ols, LinearModel};
use super::mlp::{fit_mlp, Mlp, MlpParams, Optimizer};
use super::svr::{default_gamma, fit_svr, Kernel, SvrModel, SvrParams};
use super::{EstimatorSpec, Family};
use crate::error::{Error, Result};
use crate::reduction::{f_regression_scores, fit_scaler, pca_fit, pca_transform, select_k_best, PcaModel, Scaler};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Which columns an estimator sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSelection {
    All,
    Pca { variance_target: f64 },
    Kbest { k: usize },
    Custom { names: Vec<String> },
    /// Columns whose training variance is at least `threshold`.
    Variance { threshold: f64 },
}

impl FeatureSelection {
    /// Short label such as `all`, `pca90` or `kbest25`.
    pub fn label(&self) -> String {
        match self {
            FeatureSelection::All => "all".into(),
            FeatureSelection::Pca { variance_target } => format!("pca{}", (variance_target * 100.0).round()),
            FeatureSelection::Kbest { k } => format!("kbest{k}"),
            FeatureSelection::Custom { .. } | FeatureSelection::Variance { .. } => "custom".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reduction {
    None,
    Select { indices: Vec<usize>, names: Vec<String> },
    Pca { model: PcaModel },
}

/// Input preprocessing stored with a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub n_inputs: usize,
    pub scaler: Option<Scaler>,
    pub reduction: Reduction,
}

impl Pipeline {
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.n_inputs {
            return Err(Error::DimensionMismatch { expected: self.n_inputs, got: x.ncols() });
        }
        let z = match &self.scaler {
            Some(s) => s.transform(x)?,
            None => x.clone(),
        };
        match &self.reduction {
            Reduction::None => Ok(z),
            Reduction::Select { indices, .. } => Ok(z.select_columns(indices)),
            Reduction::Pca { model } => pca_transform(model, &z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Parameters {
    Linear(LinearModel),
    Svr(SvrModel),
    Mlp(Mlp),
    Forest(RandomForest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    pub family: Family,
    /// Effective values, including defaults and data-derived ones.
    pub hyperparameters: BTreeMap<String, f64>,
    pub pipeline: Pipeline,
    pub parameters: Parameters,
    pub target_name: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub duality_gap: Option<f64>,
    pub kkt_violation: Option<f64>,
    pub loss_trace: Vec<f64>,
}

impl ModelArtifact {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersionMismatch { found: self.schema_version, expected: MODEL_SCHEMA_VERSION });
        }
        let z = self.pipeline.transform(x)?;
        match &self.parameters {
            Parameters::Linear(m) => m.predict(&z),
            Parameters::Svr(m) => m.predict(&z, z.ncols()),
            Parameters::Mlp(m) => m.predict(&z),
            Parameters::Forest(m) => m.predict(&z),
        }
    }

    /// Names of the columns the estimator sees after selection.
    pub fn selected_names(&self) -> Option<&[String]> {
        match &self.pipeline.reduction {
            Reduction::Select { names, .. } => Some(names),
            _ => None,
        }
    }

    fn consistent(&self) -> bool {
        let kind_ok = matches!(
            (self.family, &self.parameters),
            (Family::Ols | Family::Lasso | Family::Elasticnet, Parameters::Linear(_))
                | (Family::SvrLinear | Family::SvrRbf | Family::SvrPoly, Parameters::Svr(_))
                | (Family::Mlp2, Parameters::Mlp(_))
                | (Family::RandomForest, Parameters::Forest(_))
        );
        let spec = EstimatorSpec { family: self.family, hyperparameters: self.hyperparameters.clone() };
        kind_ok && spec.validate().is_ok()
    }
}

fn build_pipeline(
    family: Family,
    selection: &FeatureSelection,
    x: &DMatrix<f64>,
    names: &[String],
    y: &[f64],
) -> Result<Pipeline> {
    let is_pca = matches!(selection, FeatureSelection::Pca { .. });
    let scaler = if family.wants_scaling() || is_pca { Some(fit_scaler(x)?) } else { None };
    let z = match &scaler {
        Some(s) => s.transform(x)?,
        None => x.clone(),
    };
    let reduction = match selection {
        FeatureSelection::All => Reduction::None,
        FeatureSelection::Pca { variance_target } => Reduction::Pca { model: pca_fit(&z, *variance_target)? },
        FeatureSelection::Kbest { k } => {
            let scores = select_k_best(&f_regression_scores(x, y)?, *k)?;
            let names = scores.selected_indices.iter().map(|&i| names[i].clone()).collect();
            Reduction::Select { indices: scores.selected_indices, names }
        }
        FeatureSelection::Custom { names: wanted } => {
            let mut indices = wanted
                .iter()
                .map(|w| {
                    names
                        .iter()
                        .position(|n| n == w)
                        .ok_or_else(|| Error::SchemaMismatch(format!("unknown feature `{w}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            indices.sort_unstable();
            indices.dedup();
            if indices.is_empty() {
                return Err(Error::InvalidArgument("custom feature set is empty".into()));
            }
            let names = indices.iter().map(|&i| names[i].clone()).collect();
            Reduction::Select { indices, names }
        }
        FeatureSelection::Variance { threshold } => {
            let n = x.nrows() as f64;
            let indices: Vec<usize> = x
                .column_iter()
                .enumerate()
                .filter(|(_, c)| {
                    let m = c.mean();
                    c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) >= *threshold
                })
                .map(|(j, _)| j)
                .collect();
            if indices.is_empty() {
                return Err(Error::InvalidArgument(format!("no feature reaches variance {threshold}")));
            }
            let names = indices.iter().map(|&i| names[i].clone()).collect();
            Reduction::Select { indices, names }
        }
    };
    Ok(Pipeline { n_inputs: x.ncols(), scaler, reduction })
}

/// Fits the preprocessing pipeline and estimator on `(x, y)`.
pub fn fit_model(
    spec: &EstimatorSpec,
    selection: &FeatureSelection,
    x: &DMatrix<f64>,
    names: &[String],
    y: &[f64],
    target_name: &str,
    seed: u64,
) -> Result<(ModelArtifact, FitDiagnostics)> {
    spec.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    if names.len() != x.ncols() {
        return Err(Error::DimensionMismatch { expected: x.ncols(), got: names.len() });
    }
    let pipeline = build_pipeline(spec.family, selection, x, names, y)?;
    let input = pipeline.transform(x)?;

    let mut hp: BTreeMap<String, f64> = spec
        .family
        .hyperparameters()
        .iter()
        .filter_map(|h| spec.get(h.name).map(|v| (h.name.to_string(), v)))
        .collect();
    let req = |name: &str| spec.get(name).expect("registry default");
    let mut diag = FitDiagnostics { converged: true, ..Default::default() };
    let parameters = match spec.family {
        Family::Ols => Parameters::Linear(fit_ols(&input, y)?),
        Family::Lasso | Family::Elasticnet => {
            let l1 = if spec.family == Family::Lasso { 1.0 } else { req("l1_ratio") };
            let (m, rep) =
                fit_elasticnet(&input, y, req("alpha"), l1, req("tol"), spec.get_usize("max_iter").unwrap_or(10_000))?;
            diag.converged = rep.converged;
            diag.iterations = rep.sweeps;
            diag.duality_gap = Some(rep.duality_gap);
            Parameters::Linear(m)
        }
        Family::SvrLinear | Family::SvrRbf | Family::SvrPoly => {
            let kernel = match spec.family {
                Family::SvrLinear => Kernel::Linear,
                fam => {
                    let gamma = spec.get("gamma").unwrap_or_else(|| default_gamma(&input));
                    hp.insert("gamma".into(), gamma);
                    if fam == Family::SvrRbf {
                        Kernel::Rbf { gamma }
                    } else {
                        Kernel::Poly { gamma, degree: req("degree") as u32 }
                    }
                }
            };
            let params = SvrParams {
                kernel,
                c: req("C"),
                epsilon: req("epsilon"),
                tol: req("tol"),
                max_iter: req("max_iter") as usize,
            };
            let (m, rep) = fit_svr(&input, y, &params)?;
            diag.converged = rep.converged;
            diag.iterations = rep.iterations;
            diag.kkt_violation = Some(rep.violation);
            Parameters::Svr(m)
        }
        Family::Mlp2 => {
            let params = MlpParams {
                hidden_units: req("hidden_units") as usize,
                epochs: req("epochs") as usize,
                learning_rate: req("learning_rate"),
                optimizer: if req("adam") == 1.0 { Optimizer::Adam } else { Optimizer::Gd },
                seed,
            };
            let (m, trace) = fit_mlp(&input, y, &params)?;
            diag.iterations = params.epochs;
            diag.loss_trace = trace;
            Parameters::Mlp(m)
        }
        Family::RandomForest => {
            let params = ForestParams {
                n_estimators: req("n_estimators") as usize,
                max_depth: spec.get_usize("max_depth"),
                min_samples_split: req("min_samples_split") as usize,
                min_samples_leaf: req("min_samples_leaf") as usize,
                max_features: spec.get_usize("max_features"),
                bootstrap: req("bootstrap") == 1.0,
                seed,
            };
            Parameters::Forest(fit_random_forest(&input, y, &params)?)
        }
    };
    let artifact = ModelArtifact {
        schema_version: MODEL_SCHEMA_VERSION,
        family: spec.family,
        hyperparameters: hp,
        pipeline,
        parameters,
        target_name: target_name.to_string(),
        seed,
    };
    Ok((artifact, diag))
}

pub fn model_to_json(artifact: &ModelArtifact) -> Result<String> {
    let mut s = serde_json::to_string_pretty(artifact)?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json(text: &str) -> Result<ModelArtifact> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::CorruptDocument(format!("not JSON: {e}")))?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::CorruptDocument("missing schema_version".into()))?;
    if found != MODEL_SCHEMA_VERSION as u64 {
        return Err(Error::SchemaVersionMismatch { found: found as u32, expected: MODEL_SCHEMA_VERSION });
    }
    let artifact: ModelArtifact = serde_json::from_value(value).map_err(|e| Error::CorruptDocument(e.to_string()))?;
    if !artifact.consistent() {
        return Err(Error::CorruptDocument(format!(
            "parameters or hyperparameters do not belong to family `{}`",
            artifact.family
        )));
    }
    Ok(artifact)
}

pub fn save_model(artifact: &ModelArtifact, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(artifact)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelArtifact> {
    model_from_json(&std::fs::read_to_string(path)?)
}
