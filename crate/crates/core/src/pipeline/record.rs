use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::manifest::sha256_file;

pub const RECORD_FILE: &str = "run_record.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputChecksum {
    pub path: PathBuf,
    pub sha256: String,
}

/// Output artifact derived from a source image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub output: PathBuf,
    pub source: PathBuf,
}

/// Everything needed to replay one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub command: String,
    /// Command-specific arguments.
    pub parameters: serde_json::Value,
    pub config: PipelineConfig,
    pub inputs: Vec<InputChecksum>,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<PathBuf>,
    #[serde(default)]
    pub links: Vec<Link>,
}

impl RunRecord {
    pub fn begin(command: &str, parameters: serde_json::Value, config: &PipelineConfig) -> Self {
        let now = chrono::Utc::now();
        Self {
            run_id: format!("{}-{}", now.format("%Y%m%dT%H%M%S%3fZ"), config.short_hash()),
            command: command.to_string(),
            parameters,
            config: config.clone(),
            inputs: Vec::new(),
            tool_version: crate::VERSION.to_string(),
            started_at: now.to_rfc3339(),
            finished_at: String::new(),
            outputs: Vec::new(),
            links: Vec::new(),
        }
    }

    pub fn add_inputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
        for path in paths {
            self.inputs.push(InputChecksum {
                path: path.to_path_buf(),
                sha256: sha256_file(path)?,
            });
        }
        Ok(())
    }

    /// Stamps the end time and writes `run_record.json` into `out_dir`,
    /// replacing any earlier record there.
    pub fn finish(mut self, out_dir: &Path) -> Result<Self> {
        self.finished_at = chrono::Utc::now().to_rfc3339();
        let path = out_dir.join(RECORD_FILE);
        let json = serde_json::to_string_pretty(&self).expect("record is always serializable");
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("malformed run record {}: {e}", path.display())))
    }

    /// The record in `dir`, if there is one.
    pub fn in_dir(dir: &Path) -> Option<Self> {
        let path = dir.join(RECORD_FILE);
        path.is_file().then(|| Self::load(&path).ok()).flatten()
    }
}

/// Every run record below `root`, keyed by the directory that holds it.
pub fn find_records(root: &Path) -> Result<Vec<(PathBuf, RunRecord)>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == RECORD_FILE) {
                out.push((dir.clone(), RunRecord::load(&path)?));
            }
        }
    }
    out.sort_by(|a, b| a.1.run_id.cmp(&b.1.run_id));
    Ok(out)
}
