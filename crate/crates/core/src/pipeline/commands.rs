use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::evaluation::{evaluate_dataset, format_table, pair_by_basename, render_overlay, EvalOptions, MetricsReport};
use crate::imaging::io::{basename, list_images, list_pngs, read_image, read_label_map, write_image, write_label_map};
use crate::imaging::{
    extract_patch, plan_tiles, relabel_sequential, sample_patches_with_filter, stitch_tiles, PatchSpec, RasterImage,
};
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::manifest::{sha256_file, DatasetManifest, Domain, ManifestEntry, MANIFEST_FILE, MANIFEST_VERSION};
use crate::pipeline::record::{find_records, Link, RunRecord};
use crate::positivity::{instance_stats, submission_csv, Detection, InstanceStats, PositivityThresholds};
use crate::segmentation::{run_exchange, segment, Backend};
use crate::translation::{
    raster_to_tensor, train, translate, LossReport, Tensor, TranslationCheckpoint, GENERATOR_STRIDE, MIN_SIDE,
};

pub const PATCH_DIR: &str = "patches";
pub const FINAL_CHECKPOINT: &str = "final.safetensors";
pub const LOSS_HISTORY: &str = "loss_history.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const TABLE_FILE: &str = "table.txt";
pub const OVERLAY_DIR: &str = "overlays";
pub const SUBMISSION_FILE: &str = "submission.csv";
pub const DETECTION_REPORT: &str = "detections_report.json";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn nonempty_images(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::invalid(format!("{} is not a directory", dir.display())));
    }
    let images = list_images(dir)?;
    if images.is_empty() {
        return Err(Error::invalid(format!("no images in {}", dir.display())));
    }
    let names: BTreeSet<String> = images.iter().map(|p| basename(p)).collect();
    if names.len() != images.len() {
        return Err(Error::Data(format!("{} holds several images with the same basename", dir.display())));
    }
    Ok(images)
}

fn absolute(path: &Path) -> PathBuf {
    fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}

/// Samples (or copies) patches from every image in `input_dir`, writes them
/// under `out_dir/patches` and describes them in `out_dir/manifest.json`.
pub fn cmd_prepare(input_dir: &Path, domain: Domain, out_dir: &Path, config: &PipelineConfig) -> Result<DatasetManifest> {
    config.validate()?;
    let p = &config.prepare;
    let mut record = RunRecord::begin(
        "prepare",
        json!({ "input_dir": input_dir, "domain": domain, "out_dir": out_dir }),
        config,
    );
    let sources = nonempty_images(input_dir)?;
    let patch_dir = out_dir.join(PATCH_DIR);
    create_dir(&patch_dir)?;

    let per_image: Vec<Vec<ManifestEntry>> = sources
        .par_iter()
        .enumerate()
        .map(|(i, source)| {
            let image = read_image(source)?.to_rgb();
            let name = basename(source);
            let source_sha256 = sha256_file(source)?;
            let specs: Vec<Option<PatchSpec>> = if p.whole_image {
                vec![None]
            } else {
                sample_patches_with_filter(
                    &image,
                    p.patch_size,
                    p.count_per_image,
                    p.seed.wrapping_add(i as u64),
                    p.min_saturation,
                )
                .map_err(|e| Error::Data(format!("{}: {e}", source.display())))?
                .into_iter()
                .map(Some)
                .collect()
            };
            specs
                .into_iter()
                .enumerate()
                .map(|(k, spec)| {
                    let (file, patch) = match spec {
                        Some(s) => (format!("{name}_{k:04}.png"), extract_patch(&image, s)?),
                        None => (format!("{name}.png"), image.clone()),
                    };
                    let rel = Path::new(PATCH_DIR).join(&file);
                    write_image(&out_dir.join(&rel), &patch)?;
                    Ok(ManifestEntry {
                        source: absolute(source),
                        source_sha256: source_sha256.clone(),
                        slide_id: name.clone(),
                        patch: spec,
                        sha256: sha256_file(&out_dir.join(&rel))?,
                        file: rel,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        domain,
        patch_size: if p.whole_image { 0 } else { p.patch_size },
        seed: p.seed,
        entries: per_image.into_iter().flatten().collect(),
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    record.add_inputs(sources.iter().map(PathBuf::as_path))?;
    record.outputs = vec![out_dir.join(MANIFEST_FILE), patch_dir];
    record.finish(out_dir)?;
    Ok(manifest)
}

fn load_domain(path: &Path, want: Domain, size: usize) -> Result<(PathBuf, Vec<Tensor<f32>>)> {
    let manifest_file = crate::pipeline::manifest::manifest_path(path);
    let manifest = DatasetManifest::load(&manifest_file)?;
    if manifest.domain != want {
        return Err(Error::Config(format!(
            "{} is a {} manifest but a {want} manifest is required",
            manifest_file.display(),
            manifest.domain
        )));
    }
    let tensors = manifest
        .patch_files(&manifest_file)
        .par_iter()
        .map(|f| {
            let img = read_image(f)?.to_rgb();
            if img.height() != size || img.width() != size {
                return Err(Error::Config(format!(
                    "{} is {}x{} but translation.patch_size is {size}",
                    f.display(),
                    img.height(),
                    img.width()
                )));
            }
            Ok(raster_to_tensor(&img))
        })
        .collect::<Result<_>>()?;
    Ok((manifest_file, tensors))
}

/// Trains the translator on two prepared manifests. Writes periodic and final
/// checkpoints plus a per-epoch loss CSV; returns the final checkpoint path.
pub fn cmd_train_translation(ihc_manifest: &Path, he_manifest: &Path, out_dir: &Path, config: &PipelineConfig) -> Result<PathBuf> {
    config.validate()?;
    let mut record = RunRecord::begin(
        "train-translation",
        json!({ "ihc_manifest": ihc_manifest, "he_manifest": he_manifest, "out_dir": out_dir }),
        config,
    );
    let size = config.translation.patch_size;
    let (ihc_file, data_a) = load_domain(ihc_manifest, Domain::Ihc, size)?;
    let (he_file, data_b) = load_domain(he_manifest, Domain::He, size)?;
    create_dir(out_dir)?;

    let mut outputs = Vec::new();
    let checkpoint = train(config.translation.clone(), &data_a, &data_b, |ckpt| {
        let path = out_dir.join(format!("epoch_{:03}.safetensors", ckpt.epoch));
        ckpt.save(&path)?;
        outputs.push(path);
        Ok(())
    })?;
    let final_path = out_dir.join(FINAL_CHECKPOINT);
    checkpoint.save(&final_path)?;

    let mut csv = String::from(LossReport::CSV_HEADER);
    csv.push('\n');
    for e in &checkpoint.loss_history {
        csv.push_str(&e.losses.csv_row(e.epoch));
        csv.push('\n');
    }
    let csv_path = out_dir.join(LOSS_HISTORY);
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;

    outputs.push(final_path.clone());
    outputs.push(csv_path);
    record.add_inputs([ihc_file.as_path(), he_file.as_path()])?;
    record.outputs = outputs;
    record.finish(out_dir)?;
    Ok(final_path)
}

fn round_up(side: usize) -> usize {
    side.div_ceil(GENERATOR_STRIDE).max(MIN_SIDE / GENERATOR_STRIDE) * GENERATOR_STRIDE
}

/// Replicates the last row/column until the image is `height x width`.
fn pad_edge(image: &RasterImage, height: usize, width: usize) -> RasterImage {
    if image.height() == height && image.width() == width {
        return image.clone();
    }
    let ch = image.channels();
    let mut samples = Vec::with_capacity(height * width * ch);
    for r in 0..height {
        for c in 0..width {
            samples.extend_from_slice(image.pixel(r.min(image.height() - 1), c.min(image.width() - 1)));
        }
    }
    RasterImage::new(height, width, ch, samples).expect("consistent size")
}

fn crop(image: &RasterImage, height: usize, width: usize) -> RasterImage {
    if image.height() == height && image.width() == width {
        return image.clone();
    }
    let ch = image.channels();
    let mut samples = Vec::with_capacity(height * width * ch);
    for r in 0..height {
        for c in 0..width {
            samples.extend_from_slice(image.pixel(r, c));
        }
    }
    RasterImage::new(height, width, ch, samples).expect("consistent size")
}

/// Translates an image of any size: images no larger than a tile go through
/// the generator in one pass (edge-padded to a legal size), larger ones are
/// tiled with overlap and stitched. The output always has the input's size.
pub fn translate_image(checkpoint: &TranslationCheckpoint, image: &RasterImage, tile_size: usize, overlap: usize) -> Result<RasterImage> {
    let (h, w) = (image.height(), image.width());
    if h == 0 || w == 0 {
        return Err(Error::invalid("cannot translate an empty image"));
    }
    if h <= tile_size && w <= tile_size {
        let out = translate(checkpoint, &pad_edge(image, round_up(h), round_up(w)))?;
        return Ok(crop(&out, h, w));
    }
    let (ph, pw) = (h.max(tile_size), w.max(tile_size));
    let padded = pad_edge(image, ph, pw);
    let plan = plan_tiles(ph, pw, tile_size, overlap)?;
    let tiles: Vec<RasterImage> = plan
        .tiles
        .par_iter()
        .map(|&spec| translate(checkpoint, &extract_patch(&padded, spec)?))
        .collect::<Result<_>>()?;
    Ok(crop(&stitch_tiles(&plan, &tiles)?, h, w))
}

/// Virtual H&E for every image in `input_dir`, written as `<name>.png`.
pub fn cmd_translate(checkpoint_path: &Path, input_dir: &Path, out_dir: &Path, config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let t = &config.translate;
    let mut record = RunRecord::begin(
        "translate",
        json!({ "checkpoint": checkpoint_path, "input_dir": input_dir, "out_dir": out_dir,
                "tile_size": t.tile_size, "overlap": t.overlap }),
        config,
    );
    let checkpoint = TranslationCheckpoint::load(checkpoint_path)?;
    let inputs = nonempty_images(input_dir)?;
    create_dir(out_dir)?;
    let outputs: Vec<PathBuf> = inputs
        .par_iter()
        .map(|source| {
            let image = read_image(source)?;
            let out = translate_image(&checkpoint, &image, t.tile_size, t.overlap)?;
            let path = out_dir.join(format!("{}.png", basename(source)));
            write_image(&path, &out)?;
            Ok(path)
        })
        .collect::<Result<_>>()?;

    record.add_inputs(std::iter::once(checkpoint_path).chain(inputs.iter().map(PathBuf::as_path)))?;
    record.links = outputs
        .iter()
        .zip(&inputs)
        .map(|(o, s)| Link {
            output: o.clone(),
            source: absolute(s),
        })
        .collect();
    record.outputs = outputs.clone();
    record.finish(out_dir)?;
    Ok(outputs)
}

/// Original images behind the inputs of a stage: when `input_dir` was written
/// by `translate`, its links lead back to the IHC sources.
fn upstream_sources(input_dir: &Path) -> BTreeMap<String, PathBuf> {
    RunRecord::in_dir(input_dir)
        .filter(|r| r.command == "translate")
        .map(|r| {
            r.links
                .into_iter()
                .map(|l| (basename(&l.output), l.source))
                .collect()
        })
        .unwrap_or_default()
}

/// Segments every image in `input_dir` with the named backend, writing one
/// 16-bit label map per input under the same basename.
pub fn cmd_segment(backend: &str, input_dir: &Path, out_dir: &Path, config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let descriptor = config.segmentation.resolve(backend)?;
    let mut record = RunRecord::begin(
        "segment",
        json!({ "backend": backend, "descriptor": descriptor, "input_dir": input_dir, "out_dir": out_dir }),
        config,
    );
    let inputs = nonempty_images(input_dir)?;
    create_dir(out_dir)?;
    let outputs: Vec<PathBuf> = match &descriptor.backend {
        Backend::Classical(_) => inputs
            .par_iter()
            .map(|source| {
                let image = read_image(source)?.to_rgb();
                let labels = segment(&descriptor, &image)?;
                let path = out_dir.join(format!("{}.png", basename(source)));
                write_label_map(&path, &labels)?;
                Ok(path)
            })
            .collect::<Result<_>>()?,
        Backend::Exchange(contract) => {
            if list_pngs(input_dir)?.len() != inputs.len() {
                return Err(Error::invalid(format!(
                    "external backends exchange PNG files only; {} holds other formats",
                    input_dir.display()
                )));
            }
            let outputs = run_exchange(contract, input_dir, out_dir)?;
            for path in &outputs {
                write_label_map(path, &relabel_sequential(&read_label_map(path)?))?;
            }
            outputs
        }
    };

    let upstream = upstream_sources(input_dir);
    record.add_inputs(inputs.iter().map(PathBuf::as_path))?;
    record.links = outputs
        .iter()
        .zip(&inputs)
        .map(|(o, s)| Link {
            output: o.clone(),
            source: upstream.get(&basename(s)).cloned().unwrap_or_else(|| absolute(s)),
        })
        .collect();
    record.outputs = outputs.clone();
    record.finish(out_dir)?;
    Ok(outputs)
}

/// Scores `pred_dir` against `gt_dir`; writes the JSON report, the IoU sweep
/// as CSV, a one-row table and TP/FP/FN overlays.
pub fn cmd_evaluate(
    pred_dir: &Path,
    gt_dir: &Path,
    out_dir: &Path,
    method: Option<&str>,
    category: Option<&str>,
    config: &PipelineConfig,
) -> Result<MetricsReport> {
    config.validate()?;
    let options: &EvalOptions = &config.evaluation;
    let mut record = RunRecord::begin(
        "evaluate",
        json!({ "pred_dir": pred_dir, "gt_dir": gt_dir, "out_dir": out_dir,
                "method": method, "category": category }),
        config,
    );
    let pairs = pair_by_basename(pred_dir, gt_dir)?;
    let report = evaluate_dataset(pred_dir, gt_dir, options)?;
    create_dir(out_dir)?;

    let metrics_path = out_dir.join(METRICS_FILE);
    let json = serde_json::to_string_pretty(&report).expect("report is always serializable");
    fs::write(&metrics_path, json + "\n").map_err(|e| Error::io(&metrics_path, e))?;

    let mut csv = String::from("threshold,accuracy,accuracy_macro\n");
    for (m, a) in report.curve.iter().zip(&report.curve_macro) {
        let _ = writeln!(csv, "{},{},{}", m.threshold, m.accuracy, a.accuracy);
    }
    let curve_path = out_dir.join(CURVE_FILE);
    fs::write(&curve_path, csv).map_err(|e| Error::io(&curve_path, e))?;

    let label = method.unwrap_or("prediction").to_string();
    let table_path = out_dir.join(TABLE_FILE);
    fs::write(&table_path, format_table(&[(label, &report)])).map_err(|e| Error::io(&table_path, e))?;

    let overlay_dir = out_dir.join(OVERLAY_DIR);
    create_dir(&overlay_dir)?;
    pairs.par_iter().try_for_each(|(name, p, g)| {
        let overlay = render_overlay(&read_label_map(p)?.foreground(), &read_label_map(g)?.foreground())?;
        write_image(&overlay_dir.join(format!("{name}.png")), &overlay)
    })?;

    record.add_inputs(pairs.iter().flat_map(|(_, p, g)| [p.as_path(), g.as_path()]))?;
    record.outputs = vec![metrics_path, curve_path, table_path, overlay_dir];
    record.finish(out_dir)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDetections {
    pub image_id: String,
    pub instances: Vec<InstanceStats>,
}

/// Full positivity report: every instance, positive or not, with the
/// thresholds that were applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub thresholds: PositivityThresholds,
    pub images: Vec<ImageDetections>,
}

/// Calls positive cells on the IHC images using the masks of the same name;
/// writes the submission CSV and the full report.
pub fn cmd_detect_positive(ihc_dir: &Path, mask_dir: &Path, out_dir: &Path, config: &PipelineConfig) -> Result<Vec<Detection>> {
    config.validate()?;
    let thresholds = config.positivity;
    let mut record = RunRecord::begin(
        "detect-positive",
        json!({ "ihc_dir": ihc_dir, "mask_dir": mask_dir, "out_dir": out_dir, "thresholds": thresholds }),
        config,
    );
    let pairs = pair_by_basename(ihc_dir, mask_dir)?;
    let images: Vec<ImageDetections> = pairs
        .par_iter()
        .map(|(name, ihc, mask)| {
            let image = read_image(ihc)?.to_rgb();
            let labels = read_label_map(mask)?;
            let instances = instance_stats(&image, &labels, &thresholds)
                .map_err(|e| Error::Data(format!("{name}: {e}")))?;
            Ok(ImageDetections {
                image_id: name.clone(),
                instances,
            })
        })
        .collect::<Result<_>>()?;
    let detections: Vec<Detection> = images
        .iter()
        .flat_map(|img| {
            img.instances.iter().filter(|s| s.positive).map(|s| Detection {
                image_id: img.image_id.clone(),
                x: s.x,
                y: s.y,
                positive: true,
            })
        })
        .collect();

    create_dir(out_dir)?;
    let submission = out_dir.join(SUBMISSION_FILE);
    fs::write(&submission, submission_csv(&detections)).map_err(|e| Error::io(&submission, e))?;
    let report_path = out_dir.join(DETECTION_REPORT);
    let report = DetectionReport { thresholds, images };
    let json = serde_json::to_string_pretty(&report).expect("report is always serializable");
    fs::write(&report_path, json + "\n").map_err(|e| Error::io(&report_path, e))?;

    record.add_inputs(pairs.iter().flat_map(|(_, i, m)| [i.as_path(), m.as_path()]))?;
    record.outputs = vec![submission, report_path];
    record.finish(out_dir)?;
    Ok(detections)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportLayout {
    /// One row per run: Dice, Accuracy, Precision, Recall, F1.
    Overall,
    /// One row per method, one F1 column per category.
    PerCategory,
}

/// Consolidates evaluation runs found below `runs_root` into one table.
pub fn cmd_report(run_ids: &[String], runs_root: &Path, layout: ReportLayout) -> Result<String> {
    if run_ids.is_empty() {
        return Err(Error::invalid("no run ids given"));
    }
    let records = find_records(runs_root)?;
    let missing: Vec<&String> = run_ids
        .iter()
        .filter(|id| !records.iter().any(|(_, r)| &r.run_id == *id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "no run record under {} for: {}",
            runs_root.display(),
            missing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    let mut ids: Vec<&String> = run_ids.iter().collect();
    ids.sort();
    ids.dedup();
    let mut rows: Vec<(String, Option<String>, MetricsReport)> = Vec::new();
    for id in ids {
        let (dir, rec) = records.iter().find(|(_, r)| &r.run_id == id).expect("checked above");
        if rec.command != "evaluate" {
            return Err(Error::Data(format!("run {id} is a `{}` run, not an evaluation", rec.command)));
        }
        let path = dir.join(METRICS_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::Data(format!("run {id}: {}: {e}", path.display())))?;
        let report: MetricsReport =
            serde_json::from_str(&text).map_err(|e| Error::Data(format!("run {id}: malformed {}: {e}", path.display())))?;
        let text_param = |key: &str| rec.parameters.get(key).and_then(|v| v.as_str()).map(String::from);
        rows.push((text_param("method").unwrap_or_else(|| id.clone()), text_param("category"), report));
    }

    Ok(match layout {
        ReportLayout::Overall => {
            let labeled: Vec<(String, &MetricsReport)> = rows.iter().map(|(m, _, r)| (m.clone(), r)).collect();
            format_table(&labeled)
        }
        ReportLayout::PerCategory => {
            let mut methods: Vec<String> = Vec::new();
            let mut categories: Vec<String> = Vec::new();
            let mut cells: BTreeMap<(String, String), f64> = BTreeMap::new();
            for (method, category, report) in &rows {
                let category = category.clone().unwrap_or_else(|| "all".into());
                if !methods.contains(method) {
                    methods.push(method.clone());
                }
                if !categories.contains(&category) {
                    categories.push(category.clone());
                }
                cells.insert((method.clone(), category), report.f1);
            }
            let width = methods.iter().map(String::len).max().unwrap_or(0).max(6);
            let mut out = format!("{:<width$}", "Method");
            for c in &categories {
                let _ = write!(out, "  {:>w$}", c, w = c.len().max(4));
            }
            out.push('\n');
            for m in &methods {
                let _ = write!(out, "{m:<width$}");
                for c in &categories {
                    let w = c.len().max(4);
                    match cells.get(&(m.clone(), c.clone())) {
                        Some(v) => {
                            let _ = write!(out, "  {v:>w$.2}");
                        }
                        None => {
                            let _ = write!(out, "  {:>w$}", "-");
                        }
                    }
                }
                out.push('\n');
            }
            out
        }
    })
}
