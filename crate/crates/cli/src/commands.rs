use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use affect_core::audio::{load_manifest, read_wav, DatasetManifest};
use affect_core::eval::{grid_search_rf, r2, rmse, run_matrix, train_test_split, GridOptions, Target};
use affect_core::features::FEATURE_SCHEMA_VERSION;
use affect_core::models::{fit_model, load_model, save_model, MODEL_SCHEMA_VERSION};
use affect_core::reduction::{write_scatter_csv, CorrelationReport};
use affect_core::{AffectLabel, Extractor, FeatureMatrix, FeatureSelection, RunConfig};
use serde::Serialize;

use crate::exit::{self, Context, Failure};
use crate::{Command, SelectionKind};

pub const RUN_RECORD_VERSION: u32 = 1;

/// Sidecar written next to every output that cannot carry the config itself.
#[derive(Serialize)]
struct RunRecord<'a, E: Serialize> {
    schema_version: u32,
    command: &'a str,
    feature_schema_version: u32,
    config: &'a RunConfig,
    outputs: E,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

fn write_record<E: Serialize>(path: &Path, command: &str, cfg: &RunConfig, outputs: E) -> Result<(), Failure> {
    let record = RunRecord {
        schema_version: RUN_RECORD_VERSION,
        command,
        feature_schema_version: FEATURE_SCHEMA_VERSION,
        config: cfg,
        outputs,
    };
    let mut text = serde_json::to_string_pretty(&record).map_err(|e| Failure::new(exit::IO, e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn make_parent(path: &Path) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::new(exit::IO, format!("{}: {e}", dir.display())))?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    make_parent(path)?;
    fs::write(path, bytes).map_err(|e| Failure::new(exit::IO, format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    make_parent(path)?;
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::new(exit::IO, format!("{}: {e}", path.display())))
}

fn read_features(path: &Path) -> Result<FeatureMatrix, Failure> {
    let file = File::open(path).map_err(|e| Failure::new(exit::IO, format!("{}: {e}", path.display())))?;
    FeatureMatrix::read_csv(std::io::BufReader::new(file)).with_code(exit::SCHEMA, path.display())
}

fn read_manifest(path: &Path, cfg: &RunConfig) -> Result<DatasetManifest, Failure> {
    load_manifest(path, cfg.label_range).with_code(exit::SCHEMA, path.display())
}

/// Labels for each feature row, matched by clip id.
fn labels_for(features: &FeatureMatrix, manifest: &DatasetManifest) -> Result<Vec<AffectLabel>, Failure> {
    let by_path: HashMap<&str, AffectLabel> =
        manifest.entries.iter().map(|e| (e.clip_path.as_str(), e.label)).collect();
    features
        .row_ids()
        .iter()
        .map(|id| {
            by_path.get(id.as_str()).copied().ok_or_else(|| {
                Failure::new(exit::SCHEMA, format!("feature row `{id}` has no label in manifest `{}`", manifest.name))
            })
        })
        .collect()
}

pub fn dispatch(command: &Command, cfg: &RunConfig, strict: bool) -> Result<(), Failure> {
    match command {
        Command::Extract { manifest, out } => extract(manifest, out, cfg, strict),
        Command::Train { features, manifest, target, family, selection, k, pca_target, out } => {
            let selection = match selection {
                SelectionKind::All => FeatureSelection::All,
                SelectionKind::Pca => FeatureSelection::Pca { variance_target: pca_target.unwrap_or(cfg.pca_target) },
                SelectionKind::Kbest => FeatureSelection::Kbest { k: k.unwrap_or(cfg.kbest_k) },
                SelectionKind::Custom if cfg.custom_features.is_empty() => {
                    return Err(Failure::new(exit::SCHEMA, "--selection custom needs `custom_features` in the config"));
                }
                SelectionKind::Custom => FeatureSelection::Custom { names: cfg.custom_features.clone() },
                SelectionKind::Variance => match cfg.variance_threshold {
                    Some(threshold) => FeatureSelection::Variance { threshold },
                    None => {
                        return Err(Failure::new(
                            exit::SCHEMA,
                            "--selection variance needs `variance_threshold` in the config",
                        ))
                    }
                },
            };
            train(features, manifest, *target, *family, &selection, out, cfg)
        }
        Command::Evaluate { features, manifest, out } => evaluate(features, manifest, out, cfg),
        Command::Tune { features, manifest, target, out, checkpoint, resume, max_configs } => {
            let options = GridOptions {
                checkpoint: Some(
                    resume.clone().or_else(|| checkpoint.clone()).unwrap_or_else(|| {
                        let mut s = out.as_os_str().to_owned();
                        s.push(".checkpoint.json");
                        PathBuf::from(s)
                    }),
                ),
                checkpoint_every: cfg.checkpoint_every,
                resume: resume.is_some(),
                limit: *max_configs,
            };
            tune(features, manifest, *target, out, &options, cfg)
        }
        Command::Predict { model, wav, features, row } => predict(model, wav.as_deref(), features.as_deref(), row.as_deref(), cfg),
        Command::Analyze { features, manifest, out_dir } => analyze(features, manifest, out_dir, cfg),
    }
}

fn extract(manifest_path: &Path, out: &Path, cfg: &RunConfig, strict: bool) -> Result<(), Failure> {
    let manifest = read_manifest(manifest_path, cfg)?;
    let extractor = Extractor::new(cfg.extractor.clone()).with_code(exit::SCHEMA, "extractor config")?;
    let paths: Vec<PathBuf> = manifest.entries.iter().map(|e| manifest.resolve(&e.clip_path)).collect();
    let results = extractor.extract_files(&paths);
    let total = results.len();
    let mut items = Vec::with_capacity(total);
    let mut failures = Vec::new();
    for (i, (entry, result)) in manifest.entries.iter().zip(results).enumerate() {
        match result {
            Ok(v) => {
                eprintln!("[{}/{total}] {}", i + 1, entry.clip_path);
                items.push((entry.clip_path.clone(), v));
            }
            Err(e) => {
                eprintln!("[{}/{total}] {} FAILED: {e}", i + 1, entry.clip_path);
                failures.push((entry.clip_path.clone(), e));
            }
        }
    }
    if strict {
        if let Some((path, e)) = failures.first() {
            return Err(Failure::new(exit::code_of(e), format!("{path}: {e}")));
        }
    }
    let matrix = FeatureMatrix::from_vectors(items).context("feature table")?;
    let mut w = create(out)?;
    matrix.write_csv(&mut w).context(out.display())?;
    w.flush().map_err(|e| Failure::new(exit::IO, e.to_string()))?;
    let failed: Vec<&str> = failures.iter().map(|(p, _)| p.as_str()).collect();
    write_record(&sidecar_path(out), "extract", cfg, serde_json::json!({ "rows": matrix.n_samples(), "failed": failed }))?;
    println!("extracted {} of {total} clips", matrix.n_samples());
    for (path, e) in &failures {
        log::warn!("skipped {path}: {e}");
    }
    if !failures.is_empty() {
        log::warn!("{} clip(s) failed", failures.len());
    }
    Ok(())
}

fn train(
    features_path: &Path,
    manifest_path: &Path,
    target: Target,
    family: affect_core::Family,
    selection: &FeatureSelection,
    out: &Path,
    cfg: &RunConfig,
) -> Result<(), Failure> {
    let features = read_features(features_path)?;
    let labels = labels_for(&features, &read_manifest(manifest_path, cfg)?)?;
    let y = target.values(&labels);
    let split = train_test_split(features.n_samples(), cfg.split.test_fraction, cfg.split.seed)
        .with_code(exit::FIT, "split")?;
    let xtr = features.select_rows(&split.train_idx);
    let xte = features.select_rows(&split.test_idx);
    let ytr: Vec<f64> = split.train_idx.iter().map(|&i| y[i]).collect();
    let yte: Vec<f64> = split.test_idx.iter().map(|&i| y[i]).collect();
    let spec = cfg.spec_for(family).with_code(exit::SCHEMA, "config")?;
    let (model, diag) = fit_model(&spec, selection, &xtr, features.names(), &ytr, target.name(), cfg.seed)
        .with_code(exit::FIT, format!("fitting {family}"))?;
    if !diag.converged {
        log::warn!("{family} stopped after {} iterations without converging", diag.iterations);
    }
    let ptr = model.predict(&xtr).with_code(exit::FIT, "predict")?;
    let pte = model.predict(&xte).with_code(exit::FIT, "predict")?;
    let metrics = [
        ("train_rmse", rmse(&ytr, &ptr)),
        ("test_rmse", rmse(&yte, &pte)),
        ("train_r2", r2(&ytr, &ptr)),
        ("test_r2", r2(&yte, &pte)),
    ];
    make_parent(out)?;
    save_model(&model, out).context(out.display())?;
    let mut summary = serde_json::Map::new();
    for (name, value) in metrics {
        let v = value.with_code(exit::FIT, name)?;
        println!("{name} {v:.6}");
        summary.insert(name.into(), v.into());
    }
    summary.insert("selection".into(), selection.label().into());
    summary.insert("converged".into(), diag.converged.into());
    write_record(&sidecar_path(out), "train", cfg, summary)?;
    Ok(())
}

fn evaluate(features_path: &Path, manifest_path: &Path, out: &Path, cfg: &RunConfig) -> Result<(), Failure> {
    let features = read_features(features_path)?;
    let labels = labels_for(&features, &read_manifest(manifest_path, cfg)?)?;
    let report = run_matrix(&features, &labels, cfg).with_code(exit::FIT, "evaluation")?;
    write_file(out, report.to_json().context("report")?.as_bytes())?;
    let csv_path = out.with_extension("csv");
    let mut w = create(&csv_path)?;
    report.write_csv(&mut w).context(csv_path.display())?;
    w.flush().map_err(|e| Failure::new(exit::IO, e.to_string()))?;
    write_record(&sidecar_path(&csv_path), "evaluate", cfg, serde_json::json!({ "report": out }))?;
    for cell in &report.cells {
        match (&cell.metrics, &cell.error) {
            (Some(m), _) => println!(
                "{:<8} {:<8} {:<14} test_rmse {:.4} test_r2 {:.4}",
                cell.target.name(),
                cell.feature_set,
                cell.family.name(),
                m.test_rmse,
                m.test_r2
            ),
            (None, e) => println!(
                "{:<8} {:<8} {:<14} FAILED {}",
                cell.target.name(),
                cell.feature_set,
                cell.family.name(),
                e.as_deref().unwrap_or("")
            ),
        }
    }
    let failed = report.n_failed();
    if failed == report.cells.len() {
        return Err(Failure::new(exit::FIT, "every evaluation cell failed"));
    }
    if failed > 0 {
        log::warn!("{failed} of {} cells failed", report.cells.len());
    }
    Ok(())
}

fn tune(
    features_path: &Path,
    manifest_path: &Path,
    target: Target,
    out: &Path,
    options: &GridOptions,
    cfg: &RunConfig,
) -> Result<(), Failure> {
    let features = read_features(features_path)?;
    let labels = labels_for(&features, &read_manifest(manifest_path, cfg)?)?;
    let y = target.values(&labels);
    let split = train_test_split(features.n_samples(), cfg.split.test_fraction, cfg.split.seed)
        .with_code(exit::FIT, "split")?;
    if !options.resume {
        if let Some(path) = options.checkpoint.as_ref().filter(|p| p.exists()) {
            log::warn!("starting a fresh search; {} will be overwritten", path.display());
        }
    }
    let result = grid_search_rf(features.rows(), &y, &split, &cfg.grid, cfg.seed, options).context("grid search")?;
    let mut w = create(out)?;
    result.write_csv(&mut w).context(out.display())?;
    w.flush().map_err(|e| Failure::new(exit::IO, e.to_string()))?;
    write_record(
        &sidecar_path(out),
        "tune",
        cfg,
        serde_json::json!({
            "target": target.name(),
            "total": result.total,
            "evaluated": result.rows.len(),
            "complete": result.complete,
            "best": result.best,
        }),
    )?;
    let b = result.best;
    println!(
        "best index {} k {} n_estimators {} max_depth {} min_samples_split {} min_samples_leaf {}",
        b.index, b.point.k, b.point.n_estimators, b.point.max_depth, b.point.min_samples_split, b.point.min_samples_leaf
    );
    println!("best test_rmse {:.6} test_r2 {:.6}", b.test_rmse, b.test_r2);
    println!(
        "{} of {} configurations in {:.1} s",
        result.rows.len(),
        result.total,
        result.wall_clock_secs
    );
    if !result.complete {
        log::warn!(
            "search incomplete; rerun with --resume {} to continue",
            options.checkpoint.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        );
    }
    Ok(())
}

fn predict(
    model_path: &Path,
    wav: Option<&Path>,
    features: Option<&Path>,
    row: Option<&str>,
    cfg: &RunConfig,
) -> Result<(), Failure> {
    let model = load_model(model_path).with_code(exit::MODEL, model_path.display())?;
    if model.schema_version != MODEL_SCHEMA_VERSION {
        return Err(Failure::new(exit::MODEL, format!("model schema_version {}", model.schema_version)));
    }
    let (ids, x) = match (wav, features) {
        (Some(path), _) => {
            let extractor = Extractor::new(cfg.extractor.clone()).with_code(exit::SCHEMA, "extractor config")?;
            let clip = read_wav(path).context(path.display())?;
            let v = extractor.summarize(&clip).context(path.display())?;
            let id = path.display().to_string();
            let fm = FeatureMatrix::from_vectors(vec![(id.clone(), v)]).context(path.display())?;
            (vec![id], fm.rows().clone())
        }
        (None, Some(path)) => {
            let fm = read_features(path)?;
            match row {
                Some(id) => {
                    let i = fm
                        .row_ids()
                        .iter()
                        .position(|r| r == id)
                        .ok_or_else(|| Failure::new(exit::SCHEMA, format!("no row `{id}` in {}", path.display())))?;
                    (vec![id.to_string()], fm.select_rows(&[i]))
                }
                None => (fm.row_ids().to_vec(), fm.rows().clone()),
            }
        }
        (None, None) => return Err(Failure::new(exit::SCHEMA, "pass --wav or --features")),
    };
    let raw = model.predict(&x).with_code(exit::MODEL, "prediction")?;
    let mut out = std::io::stdout().lock();
    for (id, v) in ids.iter().zip(raw) {
        let clamped = v.clamp(-1.0, 1.0);
        if clamped != v {
            log::warn!("{id}: raw {} {v} is outside [-1, 1], clamped", model.target_name);
        }
        writeln!(out, "{id}\t{clamped}").map_err(|e| Failure::new(exit::IO, e.to_string()))?;
    }
    Ok(())
}

fn analyze(features_path: &Path, manifest_path: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<(), Failure> {
    let features = read_features(features_path)?;
    let labels = labels_for(&features, &read_manifest(manifest_path, cfg)?)?;
    let a = Target::Arousal.values(&labels);
    let v = Target::Valence.values(&labels);
    let report = CorrelationReport::new(features.rows(), &a, &v).with_code(exit::SCHEMA, "correlation")?;

    let scatter = out_dir.join("av_scatter.csv");
    let mut w = create(&scatter)?;
    write_scatter_csv(features.row_ids(), &a, &v, &mut w).context(scatter.display())?;
    w.flush().map_err(|e| Failure::new(exit::IO, e.to_string()))?;

    let heatmap = out_dir.join("feature_corr.csv");
    let mut w = create(&heatmap)?;
    report.write_heatmap_csv(features.names(), &mut w).context(heatmap.display())?;
    w.flush().map_err(|e| Failure::new(exit::IO, e.to_string()))?;

    let text = format!(
        "n {}\nr {}\np_value {}\n",
        features.n_samples(),
        report.av_pearson_r,
        report.av_p_value
    );
    write_file(&out_dir.join("av_pearson.txt"), text.as_bytes())?;
    write_record(
        &out_dir.join("run.json"),
        "analyze",
        cfg,
        serde_json::json!({
            "files": ["av_scatter.csv", "feature_corr.csv", "av_pearson.txt"],
            "av_pearson_r": report.av_pearson_r,
            "av_p_value": report.av_p_value,
        }),
    )?;
    println!("arousal-valence r = {:.4} (p = {:.3e}, n = {})", report.av_pearson_r, report.av_p_value, features.n_samples());
    Ok(())
}
