//! Whole-dataset scoring over directories of label maps paired by basename.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::matching::OverlapTable;
use crate::evaluation::metrics::{
    dice_counts, dice_from_counts, iou_thresholds, sweep_counts, CurvePoint, InstanceMetrics,
};
use crate::imaging::io::{basename, list_images, read_label_map};
use crate::imaging::LabelMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    /// IoU threshold for the headline instance metrics.
    pub iou_threshold: f64,
    pub curve_start: f64,
    pub curve_stop: f64,
    pub curve_step: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            curve_start: 0.5,
            curve_stop: 1.0,
            curve_step: 0.05,
        }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "iou_threshold must be in (0, 1], got {}",
                self.iou_threshold
            )));
        }
        iou_thresholds(self.curve_start, self.curve_stop, self.curve_step)
            .map(|_| ())
            .map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl Counts {
    fn add(&mut self, tp: usize, fp: usize, fn_: usize) {
        self.true_positives += tp;
        self.false_positives += fp;
        self.false_negatives += fn_;
    }

    pub fn metrics(&self) -> InstanceMetrics {
        InstanceMetrics::from_counts(self.true_positives, self.false_positives, self.false_negatives)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub image_id: String,
    pub dice: f64,
    pub counts: Counts,
    pub metrics: InstanceMetrics,
}

/// Dataset scores. Headline instance metrics are micro-averaged (counts
/// summed over images); `dice` is the per-image mean. The alternative
/// aggregations are kept alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub images: usize,
    pub dice: f64,
    pub dice_pooled: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
    pub macro_metrics: InstanceMetrics,
    pub curve: Vec<CurvePoint>,
    pub curve_macro: Vec<CurvePoint>,
    pub per_image: Vec<ImageMetrics>,
}

struct Scored {
    id: String,
    dice_inter: usize,
    dice_total: usize,
    sweep: Vec<(f64, usize, usize, usize)>,
    head: (usize, usize, usize),
}

fn score(id: &str, pred: &LabelMap, gt: &LabelMap, threshold: f64, thresholds: &[f64]) -> Result<Scored> {
    let table = OverlapTable::new(pred, gt).map_err(|e| Error::Data(format!("{id}: {e}")))?;
    let (dice_inter, dice_total) = dice_counts(&pred.foreground(), &gt.foreground())?;
    let r = table.matching(threshold);
    Ok(Scored {
        id: id.to_string(),
        dice_inter,
        dice_total,
        sweep: sweep_counts(&table, thresholds),
        head: (r.true_positives, r.false_positives, r.false_negatives),
    })
}

/// Scores in-memory `(image id, prediction, ground truth)` triples.
pub fn evaluate_pairs(pairs: &[(String, LabelMap, LabelMap)], options: &EvalOptions) -> Result<MetricsReport> {
    options.validate()?;
    if pairs.is_empty() {
        return Err(Error::Data("nothing to evaluate".into()));
    }
    let thresholds = iou_thresholds(options.curve_start, options.curve_stop, options.curve_step)?;
    let scored: Vec<Scored> = pairs
        .par_iter()
        .map(|(id, p, g)| score(id, p, g, options.iou_threshold, &thresholds))
        .collect::<Result<_>>()?;
    Ok(aggregate(scored, options.iou_threshold, &thresholds))
}

fn aggregate(scored: Vec<Scored>, threshold: f64, thresholds: &[f64]) -> MetricsReport {
    let n = scored.len();
    let mut counts = Counts::default();
    let (mut inter, mut total) = (0usize, 0usize);
    let mut per_image = Vec::with_capacity(n);
    let mut sweep_micro = vec![Counts::default(); thresholds.len()];
    let mut sweep_macro = vec![0.0; thresholds.len()];
    for s in &scored {
        counts.add(s.head.0, s.head.1, s.head.2);
        inter += s.dice_inter;
        total += s.dice_total;
        for (k, &(_, tp, fp, fn_)) in s.sweep.iter().enumerate() {
            sweep_micro[k].add(tp, fp, fn_);
            sweep_macro[k] += InstanceMetrics::from_counts(tp, fp, fn_).accuracy / n as f64;
        }
        per_image.push(ImageMetrics {
            image_id: s.id.clone(),
            dice: dice_from_counts(s.dice_inter, s.dice_total),
            counts: Counts {
                true_positives: s.head.0,
                false_positives: s.head.1,
                false_negatives: s.head.2,
            },
            metrics: InstanceMetrics::from_counts(s.head.0, s.head.1, s.head.2),
        });
    }
    let micro = counts.metrics();
    let per_metrics: Vec<InstanceMetrics> = per_image.iter().map(|m| m.metrics).collect();
    MetricsReport {
        threshold,
        images: n,
        dice: per_image.iter().map(|m| m.dice).sum::<f64>() / n as f64,
        dice_pooled: dice_from_counts(inter, total),
        accuracy: micro.accuracy,
        precision: micro.precision,
        recall: micro.recall,
        f1: micro.f1,
        counts,
        macro_metrics: InstanceMetrics::mean(&per_metrics),
        curve: thresholds
            .iter()
            .zip(&sweep_micro)
            .map(|(&t, c)| CurvePoint {
                threshold: t,
                accuracy: c.metrics().accuracy,
            })
            .collect(),
        curve_macro: thresholds
            .iter()
            .zip(&sweep_macro)
            .map(|(&t, &a)| CurvePoint { threshold: t, accuracy: a })
            .collect(),
        per_image,
    }
}

/// Pairs image files in two directories by basename, failing with every
/// unmatched name listed.
pub fn pair_by_basename(a_dir: &Path, b_dir: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let mut a = list_images(a_dir)?;
    let mut b = list_images(b_dir)?;
    a.sort_by_key(|p| basename(p));
    b.sort_by_key(|p| basename(p));
    let a_names: BTreeSet<String> = a.iter().map(|p| basename(p)).collect();
    let b_names: BTreeSet<String> = b.iter().map(|p| basename(p)).collect();
    if a_names.len() != a.len() || b_names.len() != b.len() {
        return Err(Error::Data(format!(
            "duplicate basenames in {} or {}",
            a_dir.display(),
            b_dir.display()
        )));
    }
    let only_a: Vec<&String> = a_names.difference(&b_names).collect();
    let only_b: Vec<&String> = b_names.difference(&a_names).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        let mut msg = format!("{} and {} do not align", a_dir.display(), b_dir.display());
        if !only_a.is_empty() {
            let _ = write!(msg, "; only in {}: {}", a_dir.display(), join(&only_a));
        }
        if !only_b.is_empty() {
            let _ = write!(msg, "; only in {}: {}", b_dir.display(), join(&only_b));
        }
        return Err(Error::Data(msg));
    }
    if a.is_empty() {
        return Err(Error::Data(format!("no images in {}", a_dir.display())));
    }
    Ok(a.into_iter()
        .zip(b)
        .map(|(pa, pb)| (basename(&pa), pa, pb))
        .collect())
}

fn join(names: &[&String]) -> String {
    names.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
}

/// Scores every prediction in `pred_dir` against the same-named map in
/// `gt_dir`.
pub fn evaluate_dataset(pred_dir: &Path, gt_dir: &Path, options: &EvalOptions) -> Result<MetricsReport> {
    let pairs = pair_by_basename(pred_dir, gt_dir)?;
    let loaded: Vec<(String, LabelMap, LabelMap)> = pairs
        .par_iter()
        .map(|(name, p, g)| Ok((name.clone(), read_label_map(p)?, read_label_map(g)?)))
        .collect::<Result<_>>()?;
    evaluate_pairs(&loaded, options)
}

/// Fixed-width table with columns Dice, Accuracy, Precision, Recall, F1 at
/// two decimals, one row per labeled report.
pub fn format_table(rows: &[(String, &MetricsReport)]) -> String {
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(6);
    let mut out = format!(
        "{:<width$}  {:>6}  {:>8}  {:>9}  {:>6}  {:>6}\n",
        "Method", "Dice", "Accuracy", "Precision", "Recall", "F1"
    );
    for (label, r) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>6.2}  {:>8.2}  {:>9.2}  {:>6.2}  {:>6.2}",
            label, r.dice, r.accuracy, r.precision, r.recall, r.f1
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::io::write_label_map;

    fn map(labels: &[u32]) -> LabelMap {
        LabelMap::new(2, 3, labels.to_vec()).unwrap()
    }

    #[test]
    fn identity_dataset_is_perfect() {
        let m = map(&[1, 1, 0, 2, 0, 3]);
        let r = evaluate_pairs(&[("a".into(), m.clone(), m)], &EvalOptions::default()).unwrap();
        assert_eq!((r.dice, r.accuracy, r.precision, r.recall, r.f1), (1.0, 1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.curve.len(), 11);
        assert!(r.curve.iter().all(|p| p.accuracy == 1.0));
    }

    #[test]
    fn duplicate_pair_keeps_micro_metrics() {
        let p = map(&[1, 1, 0, 2, 2, 0]);
        let g = map(&[1, 0, 0, 2, 2, 3]);
        let one = evaluate_pairs(&[("a".into(), p.clone(), g.clone())], &EvalOptions::default()).unwrap();
        let two = evaluate_pairs(
            &[("a".into(), p.clone(), g.clone()), ("b".into(), p, g)],
            &EvalOptions::default(),
        )
        .unwrap();
        assert_eq!(one.accuracy, two.accuracy);
        assert_eq!(one.f1, two.f1);
        assert_eq!(one.dice, two.dice);
        assert_eq!(two.counts.true_positives, 2 * one.counts.true_positives);
    }

    #[test]
    fn two_image_hand_aggregation() {
        // image a: pred {1: px0,1}, gt {1: px0,1, 2: px5} -> TP1 FN1; dice 2*2/5
        // image b: pred {1: px0, 2: px3}, gt {} -> FP2; dice 0
        let a = ("a".to_string(), map(&[1, 1, 0, 0, 0, 0]), map(&[1, 1, 0, 0, 0, 2]));
        let b = ("b".to_string(), map(&[1, 0, 0, 2, 0, 0]), map(&[0; 6]));
        let r = evaluate_pairs(&[a, b], &EvalOptions::default()).unwrap();
        assert_eq!(
            r.counts,
            Counts {
                true_positives: 1,
                false_positives: 2,
                false_negatives: 1
            }
        );
        assert!((r.accuracy - 0.25).abs() < 1e-12);
        assert!((r.precision - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.recall - 0.5).abs() < 1e-12);
        assert!((r.dice - 0.4).abs() < 1e-12);
        assert!((r.dice_pooled - 4.0 / 7.0).abs() < 1e-12);
        assert!((r.macro_metrics.accuracy - 0.25).abs() < 1e-12);
    }

    #[test]
    fn directory_alignment_errors_list_names() {
        let dir = tempfile::tempdir().unwrap();
        let (p, g) = (dir.path().join("p"), dir.path().join("g"));
        std::fs::create_dir_all(&p).unwrap();
        std::fs::create_dir_all(&g).unwrap();
        let m = map(&[0; 6]);
        for (d, n) in [(&p, "x"), (&p, "y"), (&g, "x"), (&g, "z")] {
            write_label_map(&d.join(format!("{n}.png")), &m).unwrap();
        }
        match evaluate_dataset(&p, &g, &EvalOptions::default()) {
            Err(Error::Data(msg)) => assert!(msg.contains('y') && msg.contains('z'), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        std::fs::remove_file(p.join("y.png")).unwrap();
        std::fs::remove_file(g.join("z.png")).unwrap();
        assert_eq!(evaluate_dataset(&p, &g, &EvalOptions::default()).unwrap().images, 1);
    }

    #[test]
    fn table_has_column_order() {
        let m = map(&[1, 0, 0, 0, 0, 0]);
        let r = evaluate_pairs(&[("a".into(), m.clone(), m)], &EvalOptions::default()).unwrap();
        let t = format_table(&[("run".into(), &r)]);
        let header: Vec<&str> = t.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header, ["Method", "Dice", "Accuracy", "Precision", "Recall", "F1"]);
        assert!(t.contains("1.00"));
    }
}
