use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::matching::{MatchResult, OverlapTable};
use crate::imaging::{BinaryMask, LabelMap, RasterImage};

/// Intersection over union of two pixel-index sets.
pub fn iou(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("IoU of an empty pixel set"));
    }
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    a.dedup();
    b.sort_unstable();
    b.dedup();
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(inter as f64 / (a.len() + b.len() - inter) as f64)
}

fn check_same(pred: &BinaryMask, gt: &BinaryMask) -> Result<()> {
    if pred.height != gt.height || pred.width != gt.width {
        return Err(Error::invalid(format!(
            "masks differ in size: {}x{} vs {}x{}",
            pred.height, pred.width, gt.height, gt.width
        )));
    }
    Ok(())
}

/// Intersection and total foreground `(|P∩G|, |P|+|G|)`.
pub(crate) fn dice_counts(pred: &BinaryMask, gt: &BinaryMask) -> Result<(usize, usize)> {
    check_same(pred, gt)?;
    let inter = pred.data.iter().zip(&gt.data).filter(|(&p, &g)| p && g).count();
    Ok((inter, pred.count() + gt.count()))
}

pub(crate) fn dice_from_counts(inter: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    }
}

/// Dice coefficient; two empty masks agree perfectly.
pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    let (inter, total) = dice_counts(pred, gt)?;
    Ok(dice_from_counts(inter, total))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

impl InstanceMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        if tp + fp + fn_ == 0 {
            return Self {
                accuracy: 1.0,
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
            };
        }
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            accuracy: ratio(tp, tp + fp + fn_),
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }

    /// Unweighted mean over images.
    pub fn mean(items: &[InstanceMetrics]) -> Self {
        let n = items.len().max(1) as f64;
        let sum = |f: fn(&InstanceMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
        Self {
            accuracy: sum(|m| m.accuracy),
            precision: sum(|m| m.precision),
            recall: sum(|m| m.recall),
            f1: sum(|m| m.f1),
        }
    }
}

pub fn instance_metrics(result: &MatchResult) -> InstanceMetrics {
    InstanceMetrics::from_counts(result.true_positives, result.false_positives, result.false_negatives)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub accuracy: f64,
}

/// `start, start + step, ..., stop`, rounded to 1e-6 so that e.g. 0.55 is
/// exactly the literal 0.55.
pub fn iou_thresholds(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start > 0.0 && start <= stop && stop <= 1.0 && step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!(
            "invalid IoU sweep start={start} stop={stop} step={step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| ((start + i as f64 * step) * 1e6).round() / 1e6)
        .collect())
}

/// Per-threshold match counts `(threshold, tp, fp, fn)` for one image.
pub(crate) fn sweep_counts(table: &OverlapTable, thresholds: &[f64]) -> Vec<(f64, usize, usize, usize)> {
    thresholds
        .iter()
        .map(|&t| {
            let r = table.matching(t);
            (t, r.true_positives, r.false_positives, r.false_negatives)
        })
        .collect()
}

/// Instance accuracy as the IoU threshold sweeps from `start` to `stop`.
pub fn accuracy_curve(pred: &LabelMap, gt: &LabelMap, start: f64, stop: f64, step: f64) -> Result<Vec<CurvePoint>> {
    let thresholds = iou_thresholds(start, stop, step)?;
    let table = OverlapTable::new(pred, gt)?;
    Ok(sweep_counts(&table, &thresholds)
        .into_iter()
        .map(|(threshold, tp, fp, fn_)| CurvePoint {
            threshold,
            accuracy: InstanceMetrics::from_counts(tp, fp, fn_).accuracy,
        })
        .collect())
}

pub const OVERLAY_TP: [u8; 3] = [0, 0, 255];
pub const OVERLAY_FP: [u8; 3] = [255, 0, 0];
pub const OVERLAY_FN: [u8; 3] = [0, 255, 0];
pub const OVERLAY_NONE: [u8; 3] = [255, 255, 255];

/// Colors true positives blue, false positives red, false negatives green and
/// everything else white.
pub fn render_overlay(pred: &BinaryMask, gt: &BinaryMask) -> Result<RasterImage> {
    check_same(pred, gt)?;
    let mut samples = Vec::with_capacity(pred.data.len() * 3);
    for (&p, &g) in pred.data.iter().zip(&gt.data) {
        let color = match (p, g) {
            (true, true) => OVERLAY_TP,
            (true, false) => OVERLAY_FP,
            (false, true) => OVERLAY_FN,
            (false, false) => OVERLAY_NONE,
        };
        samples.extend_from_slice(&color);
    }
    RasterImage::new(pred.height, pred.width, 3, samples)
}
