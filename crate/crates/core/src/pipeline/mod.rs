//! Command implementations behind the `ihc2he` binary: dataset manifests,
//! translation training and inference, segmentation, evaluation, positivity
//! detection and report consolidation. Every command writes a run record
//! into its output directory.

mod commands;
mod config;
mod manifest;
mod record;

use std::path::PathBuf;

pub use commands::{
    cmd_detect_positive, cmd_evaluate, cmd_prepare, cmd_report, cmd_segment, cmd_train_translation, cmd_translate,
    translate_image, DetectionReport, ImageDetections, ReportLayout, CURVE_FILE, DETECTION_REPORT, FINAL_CHECKPOINT,
    LOSS_HISTORY, METRICS_FILE, OVERLAY_DIR, PATCH_DIR, SUBMISSION_FILE, TABLE_FILE,
};
pub use config::{ExternalBackend, PipelineConfig, PrepareConfig, SegmentationConfig, TranslateConfig};
pub use manifest::{manifest_path, sha256_file, DatasetManifest, Domain, ManifestEntry, MANIFEST_FILE, MANIFEST_VERSION};
pub use record::{find_records, InputChecksum, Link, RunRecord, RECORD_FILE};

/// Default locations inside a run directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn manifests(&self, domain: Domain) -> PathBuf {
        self.root.join("manifests").join(domain.to_string().to_lowercase())
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn virtual_he(&self) -> PathBuf {
        self.root.join("virtual_he")
    }

    pub fn masks(&self, backend: &str) -> PathBuf {
        self.root.join("masks").join(backend)
    }

    pub fn metrics(&self, name: &str) -> PathBuf {
        self.root.join("metrics").join(name)
    }

    pub fn detections(&self) -> PathBuf {
        self.root.join("detections")
    }
}
