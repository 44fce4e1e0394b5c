use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::{OutputError, UsageError};

/// Written next to every result file as `<out>.manifest.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Arguments after the program name; `sanim replay` re-runs them.
    pub argv: Vec<String>,
    pub parameters: serde_json::Value,
    pub code_version: String,
    pub wall_time_seconds: f64,
    pub outputs: Vec<PathBuf>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    sibling(out, "manifest.json")
}

/// `<out>.<suffix>` in the same directory as `out`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".");
    name.push(suffix);
    out.with_file_name(name)
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").context(OutputError(path.to_path_buf()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("{}: not a run manifest: {e}", path.display())).into())
    }
}
