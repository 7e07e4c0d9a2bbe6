use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{r2, rmse};
use super::split::SplitIndices;
use crate::error::{Error, Result};
use crate::models::forest::{fit_random_forest, ForestParams};
use crate::reduction::{f_regression_scores, select_k_best};

/// Hyperparameter axes for the forest search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub k: Vec<usize>,
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_samples_split: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            k: (10..30).collect(),
            n_estimators: vec![50, 100, 150, 200, 250, 300],
            max_depth: vec![5, 10, 20, 30, 50],
            min_samples_split: vec![2, 3, 4, 5, 6, 7],
            min_samples_leaf: vec![1, 2, 3, 5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    pub k: usize,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.k.len()
            * self.n_estimators.len()
            * self.max_depth.len()
            * self.min_samples_split.len()
            * self.min_samples_leaf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("grid axis `{what}` is empty or has invalid values")));
        if self.k.is_empty() || self.k.contains(&0) {
            return bad("k");
        }
        if self.n_estimators.is_empty() || self.n_estimators.contains(&0) {
            return bad("n_estimators");
        }
        if self.max_depth.is_empty() || self.max_depth.contains(&0) {
            return bad("max_depth");
        }
        if self.min_samples_split.is_empty() || self.min_samples_split.iter().any(|&v| v < 2) {
            return bad("min_samples_split");
        }
        if self.min_samples_leaf.is_empty() || self.min_samples_leaf.contains(&0) {
            return bad("min_samples_leaf");
        }
        Ok(())
    }

    /// Configuration `index` with `k` varying slowest and `min_samples_leaf` fastest.
    pub fn point(&self, index: usize) -> GridPoint {
        let mut r = index;
        let mut take = |axis: &[usize]| {
            let v = axis[r % axis.len()];
            r /= axis.len();
            v
        };
        let min_samples_leaf = take(&self.min_samples_leaf);
        let min_samples_split = take(&self.min_samples_split);
        let max_depth = take(&self.max_depth);
        let n_estimators = take(&self.n_estimators);
        let k = take(&self.k);
        GridPoint { k, n_estimators, max_depth, min_samples_split, min_samples_leaf }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub index: usize,
    #[serde(flatten)]
    pub point: GridPoint,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub train_r2: f64,
    pub test_r2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// Evaluated rows ordered by index.
    pub rows: Vec<GridRow>,
    pub best: GridRow,
    /// True when every configuration has been evaluated.
    pub complete: bool,
    pub total: usize,
    pub wall_clock_secs: f64,
}

impl GridResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(&self.rows, out)
    }
}

pub fn write_rows<W: Write>(rows: &[GridRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "index",
        "k",
        "n_estimators",
        "max_depth",
        "min_samples_split",
        "min_samples_leaf",
        "train_rmse",
        "test_rmse",
        "train_r2",
        "test_r2",
    ])?;
    for r in rows {
        let p = r.point;
        w.write_record([
            r.index.to_string(),
            p.k.to_string(),
            p.n_estimators.to_string(),
            p.max_depth.to_string(),
            p.min_samples_split.to_string(),
            p.min_samples_leaf.to_string(),
            r.train_rmse.to_string(),
            r.test_rmse.to_string(),
            r.train_r2.to_string(),
            r.test_r2.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Lowest test RMSE, then smaller k, then fewer trees, then lower index.
pub fn best_row(rows: &[GridRow]) -> Option<GridRow> {
    rows.iter()
        .min_by(|a, b| {
            a.test_rmse
                .total_cmp(&b.test_rmse)
                .then(a.point.k.cmp(&b.point.k))
                .then(a.point.n_estimators.cmp(&b.point.n_estimators))
                .then(a.index.cmp(&b.index))
        })
        .copied()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub fingerprint: String,
    pub total: usize,
    pub completed: Vec<usize>,
    pub rows: Vec<GridRow>,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::CheckpointMismatch(format!("unreadable checkpoint: {e}")))
    }

    fn store(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_string(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct GridOptions {
    pub checkpoint: Option<PathBuf>,
    /// Configurations between checkpoint writes.
    pub checkpoint_every: usize,
    /// Continue from an existing checkpoint file.
    pub resume: bool,
    /// Stop after this many new configurations (the search stays resumable).
    pub limit: Option<usize>,
}

fn fingerprint(x: &DMatrix<f64>, y: &[f64], split: &SplitIndices, grid: &GridSpec, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update((x.nrows() as u64).to_le_bytes());
    h.update((x.ncols() as u64).to_le_bytes());
    for v in x.iter().chain(y) {
        h.update(v.to_bits().to_le_bytes());
    }
    for i in split.train_idx.iter().chain(&split.test_idx) {
        h.update((*i as u64).to_le_bytes());
    }
    h.update(serde_json::to_vec(grid).expect("grid serializes"));
    h.update(seed.to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Exhaustive forest search; configuration `i` uses seed `seed ^ i`.
pub fn grid_search_rf(
    x: &DMatrix<f64>,
    y: &[f64],
    split: &SplitIndices,
    grid: &GridSpec,
    seed: u64,
    options: &GridOptions,
) -> Result<GridResult> {
    grid.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    if let Some(&k) = grid.k.iter().find(|&&k| k > x.ncols()) {
        return Err(Error::BadK { k, max: x.ncols() });
    }
    let start = Instant::now();
    let total = grid.len();
    let fp = fingerprint(x, y, split, grid, seed);
    let mut ckpt = Checkpoint { fingerprint: fp.clone(), total, completed: Vec::new(), rows: Vec::new() };
    if let (true, Some(path)) = (options.resume, &options.checkpoint) {
        if path.exists() {
            let prev = Checkpoint::load(path)?;
            if prev.fingerprint != fp || prev.total != total {
                return Err(Error::CheckpointMismatch(format!(
                    "{} was written for different data, split, grid or seed",
                    path.display()
                )));
            }
            log::info!("resuming grid search: {} of {total} configurations done", prev.completed.len());
            ckpt = prev;
        }
    }

    let xtr = x.select_rows(&split.train_idx);
    let xte = x.select_rows(&split.test_idx);
    let ytr: Vec<f64> = split.train_idx.iter().map(|&i| y[i]).collect();
    let yte: Vec<f64> = split.test_idx.iter().map(|&i| y[i]).collect();
    let scores = f_regression_scores(&xtr, &ytr)?;
    let mut selections = std::collections::BTreeMap::new();
    for &k in &grid.k {
        selections.insert(k, select_k_best(&scores, k)?.selected_indices);
    }

    let done: std::collections::BTreeSet<usize> = ckpt.completed.iter().copied().collect();
    let mut pending: Vec<usize> = (0..total).filter(|i| !done.contains(i)).collect();
    if let Some(limit) = options.limit {
        pending.truncate(limit);
    }
    let chunk = options.checkpoint_every.max(1);
    for block in pending.chunks(chunk) {
        let rows: Vec<GridRow> = block
            .par_iter()
            .map(|&index| -> Result<GridRow> {
                let point = grid.point(index);
                let cols = &selections[&point.k];
                let (a, b) = (xtr.select_columns(cols), xte.select_columns(cols));
                let params = ForestParams {
                    n_estimators: point.n_estimators,
                    max_depth: Some(point.max_depth),
                    min_samples_split: point.min_samples_split,
                    min_samples_leaf: point.min_samples_leaf,
                    max_features: None,
                    bootstrap: true,
                    seed: seed ^ index as u64,
                };
                let forest = fit_random_forest(&a, &ytr, &params)?;
                let (ptr, pte) = (forest.predict(&a)?, forest.predict(&b)?);
                Ok(GridRow {
                    index,
                    point,
                    train_rmse: rmse(&ytr, &ptr)?,
                    test_rmse: rmse(&yte, &pte)?,
                    train_r2: r2(&ytr, &ptr)?,
                    test_r2: r2(&yte, &pte)?,
                })
            })
            .collect::<Result<_>>()?;
        ckpt.completed.extend(block);
        ckpt.rows.extend(rows);
        if let Some(path) = &options.checkpoint {
            ckpt.store(path)?;
        }
        log::info!("grid search: {}/{total}", ckpt.completed.len());
    }

    let mut rows = ckpt.rows;
    rows.sort_by_key(|r| r.index);
    let best = best_row(&rows).ok_or_else(|| Error::InvalidArgument("no configuration evaluated".into()))?;
    Ok(GridResult {
        complete: rows.len() == total,
        rows,
        best,
        total,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}
