use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the resolved configuration (after a seed override).
    pub config_hash: String,
    pub code_version: String,
    pub started: String,
    pub finished: String,
    pub master_seed: u64,
    /// Worker threads requested through the environment, if any.
    pub threads: Option<usize>,
    /// The resolved configuration, relative to the manifest directory.
    pub config: PathBuf,
    pub experiments: Vec<ExperimentOutputs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutputs {
    pub name: String,
    pub kind: String,
    /// Output role (`report`, `summary`, `records`, …) to file name.
    pub outputs: BTreeMap<String, PathBuf>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Validation(format!("{}: {}: {}", path.display(), e.path(), e.inner())))
    }
}

impl ExperimentOutputs {
    /// Absolute path of an output, if the experiment produced it.
    pub fn path(&self, base: &Path, role: &str) -> Option<PathBuf> {
        self.outputs.get(role).map(|p| base.join(p))
    }
}
