//! Parallel drivers: jitter over a manifest and the 9×9 evaluation matrix.
//! Results never depend on the worker count.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use log::{debug, error, warn};
use ostf_core::dataset::{Manifest, Record, Session, TamperingMethod};
use ostf_core::eval::{aggregate_matrix, distort_record, evaluate, Distortion, EvalConfig, EvalMatrix};
use ostf_core::jitter::{jitter_image, JitterConfig, JitterEvent};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{read_image, read_predictions, write_jsonl, write_manifest, write_png, RecipeRecord};

/// Runs `f` on a pool of `threads` workers (0 = one per core).
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Output path of a jittered image: same relative path, `.png` extension.
pub fn output_name(image: &str) -> String {
    Path::new(image).with_extension("png").to_string_lossy().replace('\\', "/")
}

#[derive(Debug, Clone, Serialize)]
pub struct FailedImage {
    pub image: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct JitterSummary {
    pub images: usize,
    pub processed: usize,
    pub jittered: usize,
    pub skipped: usize,
    pub feather_clamped: usize,
    pub failed: Vec<FailedImage>,
}

struct Done {
    record: Record,
    recipes: Vec<RecipeRecord>,
    skipped: usize,
    clamped: usize,
}

fn jitter_one(record: &Record, images_dir: &Path, out_images: &Path, config: &JitterConfig) -> Result<Done> {
    let img = read_image(&images_dir.join(&record.image))?;
    if img.dimensions() != (record.width, record.height) {
        return Err(Error::Format {
            path: images_dir.join(&record.image),
            message: format!(
                "image is {}x{} but the manifest says {}x{}",
                img.width(),
                img.height(),
                record.width,
                record.height
            ),
        });
    }
    let out = jitter_image(&img, &record.instances, config, &record.image)?;
    let name = output_name(&record.image);
    write_png(&out_images.join(&name), &out.image)?;
    let mut clamped = 0;
    for e in &out.events {
        match e {
            JitterEvent::Skipped { instance, reason } => warn!("{}: instance {instance} skipped: {reason}", record.image),
            JitterEvent::FeatherClamped { .. } => clamped += 1,
        }
    }
    debug!("{}: {} recipes", record.image, out.recipes.len());
    Ok(Done {
        skipped: out.skipped(),
        clamped,
        recipes: out
            .recipes
            .into_iter()
            .map(|recipe| RecipeRecord {
                image: name.clone(),
                recipe,
            })
            .collect(),
        record: Record {
            image: name,
            width: record.width,
            height: record.height,
            instances: out.instances,
        },
    })
}

/// Jitters every record of `manifest`, writing `out/images/*.png`,
/// `out/manifest.jsonl` and `out/recipes.jsonl`. Failed images are reported
/// in the summary and left out of the output manifest.
pub fn run_jitter(
    manifest: &Manifest,
    images_dir: &Path,
    out_dir: &Path,
    config: &JitterConfig,
    threads: usize,
) -> Result<JitterSummary> {
    config.validate()?;
    let mut names = BTreeSet::new();
    for r in &manifest.records {
        if !names.insert(output_name(&r.image)) {
            return Err(Error::Usage(format!("two images map to output {}", output_name(&r.image))));
        }
    }
    let out_images = out_dir.join("images");
    let results: Vec<Result<Done>> = with_pool(threads, || {
        manifest
            .records
            .par_iter()
            .map(|r| jitter_one(r, images_dir, &out_images, config))
            .collect()
    })?;

    let mut summary = JitterSummary {
        images: manifest.records.len(),
        ..JitterSummary::default()
    };
    let mut records = Vec::with_capacity(results.len());
    let mut recipes = Vec::new();
    for (record, result) in manifest.records.iter().zip(results) {
        match result {
            Ok(done) => {
                summary.processed += 1;
                summary.jittered += done.recipes.len();
                summary.skipped += done.skipped;
                summary.feather_clamped += done.clamped;
                records.push(done.record);
                recipes.extend(done.recipes);
            }
            Err(e) => {
                error!("{}: {e}", record.image);
                summary.failed.push(FailedImage {
                    image: record.image.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    let mut out = Manifest::new(records);
    out.metadata = manifest.metadata.clone();
    out.metadata.insert("jitter.global_seed".into(), config.global_seed.to_string());
    out.metadata.insert("jitter.selection_prob".into(), config.selection_prob.to_string());
    write_manifest(&out_dir.join("manifest.jsonl"), &out)?;
    write_jsonl(&out_dir.join("recipes.jsonl"), &recipes)?;
    Ok(summary)
}

/// Prediction file for one matrix cell.
pub fn cell_file(preds_dir: &Path, train: TamperingMethod, test: TamperingMethod) -> PathBuf {
    preds_dir.join(format!("{}__{}.jsonl", train.name(), test.name()))
}

/// Scores all 81 (train, test) cells against the test manifests of
/// `sessions`. Every missing prediction file or session is reported at once.
pub fn run_matrix(
    sessions: &[Session],
    preds_dir: &Path,
    cfg: &EvalConfig,
    distortion: Option<Distortion>,
    threads: usize,
) -> Result<EvalMatrix> {
    let tests: BTreeMap<TamperingMethod, &Session> = sessions.iter().map(|s| (s.method, s)).collect();
    let pairs: Vec<(TamperingMethod, TamperingMethod)> = TamperingMethod::ALL
        .iter()
        .flat_map(|&tr| TamperingMethod::ALL.iter().map(move |&te| (tr, te)))
        .collect();
    let missing: Vec<(String, String)> = pairs
        .iter()
        .filter(|(tr, te)| !tests.contains_key(te) || !cell_file(preds_dir, *tr, *te).is_file())
        .map(|(tr, te)| (tr.name().to_string(), te.name().to_string()))
        .collect();
    if !missing.is_empty() {
        return Err(ostf_core::Error::IncompleteMatrix { missing }.into());
    }
    let scored: Vec<Result<_>> = with_pool(threads, || {
        pairs
            .par_iter()
            .map(|&(tr, te)| {
                let preds = read_predictions(&cell_file(preds_dir, tr, te))?;
                let records = ground_truth(&tests[&te].test.records, distortion)?;
                Ok(((tr, te), evaluate(&records, &preds, cfg)?))
            })
            .collect()
    })?;
    let cells = scored.into_iter().collect::<Result<BTreeMap<_, _>>>()?;
    Ok(aggregate_matrix(&cells)?)
}

/// Ground truth as seen by a detector run on distorted images.
pub fn ground_truth(records: &[Record], distortion: Option<Distortion>) -> Result<Vec<Record>> {
    match distortion {
        None => Ok(records.to_vec()),
        Some(kind) => Ok(records
            .iter()
            .map(|r| distort_record(r, kind))
            .collect::<ostf_core::Result<_>>()?),
    }
}

/// Writes one 9×9 F-score grid per class, rows = training session.
pub fn write_matrix_csv(path: &Path, m: &EvalMatrix) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["class".to_string(), "train".to_string()];
    header.extend(m.sessions.iter().cloned());
    w.write_record(&header)?;
    for label in ostf_core::dataset::Label::ALL {
        for (name, row) in m.sessions.iter().zip(&m.cells) {
            let mut line = vec![label.as_str().to_string(), name.clone()];
            line.extend(row.iter().map(|c| format!("{:.2}", c.get(label).f1)));
            w.write_record(&line)?;
        }
    }
    w.flush().map_err(Error::io(path))
}
