//! File-exchange adapter for external segmentation models.
//!
//! The backend reads `<input>/<name>.png` (8-bit RGB) and must write
//! `<output>/<name>.png` (16-bit label map) for every input, then exit 0.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::imaging::io::{basename, list_pngs, write_label_map};
use crate::imaging::LabelMap;

/// Environment variable pointing at the directory holding backend wrapper
/// scripts; available to command templates as `{backend_dir}`.
pub const BACKEND_DIR_ENV: &str = "IHC2HE_BACKEND_DIR";

const DIAGNOSTICS_LIMIT: usize = 16 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeContract {
    /// Command line with `{input}`, `{output}` and `{backend_dir}`
    /// placeholders, split with shell quoting rules.
    pub command: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    600
}

impl ExchangeContract {
    pub fn new(command: impl Into<String>, timeout_secs: u64) -> Self {
        Self {
            command: command.into(),
            timeout_secs,
        }
    }

    /// Tokenized command with placeholders substituted.
    pub fn argv(&self, input_dir: &Path, output_dir: &Path) -> Result<Vec<String>> {
        let backend_dir = std::env::var(BACKEND_DIR_ENV).unwrap_or_else(|_| ".".into());
        let tokens = shell_words::split(&self.command)
            .map_err(|e| Error::Config(format!("cannot parse backend command `{}`: {e}", self.command)))?;
        if tokens.is_empty() {
            return Err(Error::Config("backend command is empty".into()));
        }
        Ok(tokens
            .into_iter()
            .map(|t| {
                t.replace("{input}", &input_dir.to_string_lossy())
                    .replace("{output}", &output_dir.to_string_lossy())
                    .replace("{backend_dir}", &backend_dir)
            })
            .collect())
    }
}

fn backend_error(message: impl Into<String>, diagnostics: String) -> Error {
    Error::Backend {
        message: message.into(),
        diagnostics,
    }
}

fn drain(mut stream: impl Read + Send + 'static) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stream.read_to_end(&mut buf);
        let start = buf.len().saturating_sub(DIAGNOSTICS_LIMIT);
        String::from_utf8_lossy(&buf[start..]).into_owned()
    })
}

fn remove_outputs(output_dir: &Path, names: &[String]) {
    for name in names {
        let _ = fs::remove_file(output_dir.join(format!("{name}.png")));
    }
}

/// Runs an external backend over every PNG in `input_dir` and checks that it
/// produced one label map per input, with matching dimensions, in
/// `output_dir`. Returns the label-map paths in input order. On any failure
/// the expected outputs are removed.
pub fn run_exchange(contract: &ExchangeContract, input_dir: &Path, output_dir: &Path) -> Result<Vec<PathBuf>> {
    let inputs = list_pngs(input_dir)?;
    if inputs.is_empty() {
        return Err(Error::invalid(format!("no PNG images in {}", input_dir.display())));
    }
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let names: Vec<String> = inputs.iter().map(|p| basename(p)).collect();
    let argv = contract.argv(input_dir, output_dir)?;

    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| backend_error(format!("cannot start `{}`: {e}", argv[0]), String::new()))?;
    let out = drain(child.stdout.take().expect("piped stdout"));
    let err = drain(child.stderr.take().expect("piped stderr"));

    let waited = child
        .wait_timeout(Duration::from_secs(contract.timeout_secs))
        .map_err(|e| backend_error(format!("waiting on backend failed: {e}"), String::new()))?;
    let status = match waited {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            let diagnostics = collect(out, err);
            remove_outputs(output_dir, &names);
            return Err(backend_error(
                format!("backend timed out after {} s", contract.timeout_secs),
                diagnostics,
            ));
        }
    };
    let diagnostics = collect(out, err);
    if !status.success() {
        remove_outputs(output_dir, &names);
        return Err(backend_error(format!("backend exited with {status}"), diagnostics));
    }

    let outputs: Vec<PathBuf> = names.iter().map(|n| output_dir.join(format!("{n}.png"))).collect();
    let missing: Vec<String> = names
        .iter()
        .zip(&outputs)
        .filter(|(_, p)| !p.is_file())
        .map(|(n, _)| n.clone())
        .collect();
    if !missing.is_empty() {
        remove_outputs(output_dir, &names);
        return Err(Error::ContractViolation { missing });
    }
    for (input, output) in inputs.iter().zip(&outputs) {
        let want = image::image_dimensions(input)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", input.display())))?;
        let got = image::image_dimensions(output);
        if got.as_ref().ok() != Some(&want) {
            remove_outputs(output_dir, &names);
            let detail = match got {
                Ok((w, h)) => format!("{w}x{h}"),
                Err(e) => e.to_string(),
            };
            return Err(backend_error(
                format!(
                    "label map for {} does not match input size {}x{}: {detail}",
                    basename(input),
                    want.0,
                    want.1
                ),
                diagnostics,
            ));
        }
    }
    Ok(outputs)
}

fn collect(out: thread::JoinHandle<String>, err: thread::JoinHandle<String>) -> String {
    let out = out.join().unwrap_or_default();
    let err = err.join().unwrap_or_default();
    match (out.is_empty(), err.is_empty()) {
        (_, true) => out,
        (true, false) => err,
        (false, false) => format!("{out}\n{err}"),
    }
}

/// Reference backend: writes an empty label map for every input PNG, except
/// for basenames listed in `omit`.
pub fn stub_backend(input_dir: &Path, output_dir: &Path, omit: &[String]) -> Result<()> {
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    for input in list_pngs(input_dir)? {
        let name = basename(&input);
        if omit.contains(&name) {
            continue;
        }
        let (w, h) = image::image_dimensions(&input)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", input.display())))?;
        write_label_map(
            &output_dir.join(format!("{name}.png")),
            &LabelMap::empty(h as usize, w as usize),
        )?;
    }
    Ok(())
}
