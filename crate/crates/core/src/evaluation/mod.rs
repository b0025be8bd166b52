//! Pixel-level Dice, IoU-matched instance metrics, IoU sweeps and overlays.

mod dataset;
mod matching;
mod metrics;

pub use dataset::{
    evaluate_dataset, evaluate_pairs, format_table, pair_by_basename, Counts, EvalOptions, ImageMetrics,
    MetricsReport,
};
pub use matching::{match_instances, MatchResult, MatchedPair, OverlapTable};
pub use metrics::{
    accuracy_curve, dice, f1_score, instance_metrics, iou, iou_thresholds, render_overlay, CurvePoint,
    InstanceMetrics, OVERLAY_FN, OVERLAY_FP, OVERLAY_NONE, OVERLAY_TP,
};
