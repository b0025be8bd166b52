//! Label-free nuclei segmentation for immunohistochemistry (IHC) images.
//!
//! IHC patches are translated into virtual H&E with an unpaired cycle-consistent
//! GAN ([`translation`]), segmented with any H&E nuclei segmenter
//! ([`segmentation`]), and scored with pixel and instance metrics
//! ([`evaluation`]). Because translation preserves geometry, the resulting
//! masks apply directly to the original IHC pixels, which is what
//! [`positivity`] relies on when it calls DAB-positive cells.
//!
//! [`pipeline`] wires the stages together around dataset manifests and run
//! records; the `ihc2he` binary is a thin shell over it.

pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod pipeline;
pub mod positivity;
pub mod segmentation;
pub mod synthetic;
pub mod translation;

pub use error::{Error, Result};
pub use evaluation::{
    accuracy_curve, dice, instance_metrics, iou, match_instances, render_overlay, CurvePoint,
    InstanceMetrics, MatchResult, MetricsReport,
};
pub use imaging::{
    extract_patch, plan_tiles, relabel_sequential, rgb_to_hsi, sample_patches, stitch_tiles,
    BinaryMask, HsiPixel, LabelMap, PatchSpec, RasterImage, TilePlan,
};
pub use positivity::{
    centroids, classify_positive, detect_positive_cells, write_submission, Detection,
    PositivityThresholds,
};
pub use segmentation::{
    otsu_threshold, segment, segment_classical, watershed_split, ClassicalParams,
    ExchangeContract, SegmenterDescriptor,
};
pub use translation::{
    adversarial_loss, cycle_loss, translate, LossReport, TranslationCheckpoint, TranslationConfig,
};

/// Version string recorded in run records and checkpoints.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
