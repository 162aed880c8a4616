use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{CliError, VERSION};

#[derive(Debug, Clone, Serialize)]
pub struct RngRecord {
    pub generator: &'static str,
    pub seed: u64,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    config_hash: &'a str,
    config: &'a serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    rng: Option<&'a RngRecord>,
    result: &'a T,
}

/// Metadata shared by every report of one run.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub config_hash: String,
    pub config: serde_json::Value,
    pub rng: Option<RngRecord>,
}

impl Provenance {
    /// Pretty JSON with a trailing newline. Field order is fixed by the
    /// structs, and floats print in shortest round-trip form.
    pub fn wrap<T: Serialize>(&self, command: &str, result: &T) -> String {
        let env = Envelope {
            command,
            version: VERSION,
            config_hash: &self.config_hash,
            config: &self.config,
            rng: self.rng.as_ref(),
            result,
        };
        let mut s = serde_json::to_string_pretty(&env).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub artifacts: Vec<Artifact>,
    /// Human-readable summary for stdout.
    pub summary: String,
}

impl CommandOutput {
    pub fn artifact(&self, suffix: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.file_name.ends_with(suffix))
    }

    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        self.artifacts
            .iter()
            .map(|a| {
                let p = dir.join(&a.file_name);
                std::fs::write(&p, &a.contents).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                Ok(p)
            })
            .collect()
    }
}
