use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imaging::PatchSpec;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "IHC")]
    Ihc,
    #[serde(rename = "HE")]
    He,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Ihc => "IHC",
            Domain::He => "HE",
        })
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ihc" => Ok(Domain::Ihc),
            "he" | "h&e" => Ok(Domain::He),
            _ => Err(Error::Config(format!("unknown domain `{s}` (expected ihc or he)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source: PathBuf,
    pub source_sha256: String,
    /// Slide or image the patch came from, for slide-level splits.
    pub slide_id: String,
    /// `None` when the whole source image is used.
    pub patch: Option<PatchSpec>,
    /// Materialized patch, relative to the manifest's directory.
    pub file: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub domain: Domain,
    pub patch_size: usize,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher).map_err(|e| Error::io(path, e))?;
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Accepts either a manifest file or a directory holding `manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest is always serializable");
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    /// Loads a manifest and verifies that every referenced file exists and
    /// matches its checksum.
    pub fn load(path: &Path) -> Result<Self> {
        let path = manifest_path(path);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Data(format!("cannot read manifest {}: {e}", path.display())))?;
        let manifest: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("malformed manifest {}: {e}", path.display())))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Data(format!(
                "manifest {} has version {}, expected {MANIFEST_VERSION}",
                path.display(),
                manifest.version
            )));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let mut problems = Vec::new();
        for entry in &manifest.entries {
            for (file, want) in [(base.join(&entry.file), &entry.sha256), (entry.source.clone(), &entry.source_sha256)] {
                match sha256_file(&file) {
                    Ok(got) if &got == want => {}
                    Ok(_) => problems.push(format!("checksum mismatch: {}", file.display())),
                    Err(_) => problems.push(format!("missing: {}", file.display())),
                }
            }
        }
        if !problems.is_empty() {
            return Err(Error::Data(format!(
                "manifest {} does not match the files on disk: {}",
                path.display(),
                problems.join("; ")
            )));
        }
        Ok(manifest)
    }

    /// Absolute (or manifest-relative) paths of the materialized patches.
    pub fn patch_files(&self, manifest_file: &Path) -> Vec<PathBuf> {
        let base = manifest_path(manifest_file)
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        self.entries.iter().map(|e| base.join(&e.file)).collect()
    }
}
