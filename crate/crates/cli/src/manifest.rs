use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub duration_secs: f64,
    pub exit_status: u8,
}

impl RunManifest {
    pub fn new<A: Serialize>(
        command: String,
        args: &A,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
        duration_secs: f64,
        exit_status: u8,
    ) -> Self {
        let args = serde_json::to_value(args).unwrap_or(serde_json::Value::Null);
        RunManifest { command, args, inputs, outputs, duration_secs, exit_status }
    }

    /// Writes `<stem>.manifest.json`, creating the parent directory if needed.
    pub fn write(&self, stem: &Path) -> std::io::Result<()> {
        let mut name = stem.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let text = serde_json::to_string_pretty(self).expect("manifests serialise");
        std::fs::write(path, text + "\n")
    }
}

/// `dir/name.ext` -> `dir/name`.
pub fn stem_of(path: &Path) -> PathBuf {
    path.with_extension("")
}

/// Writes `contents` to `path`, creating its directory.
pub fn write_file(path: &Path, contents: &str) -> Result<(), crate::Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_failure(path, e))
}

pub fn read_file(path: &Path) -> Result<String, crate::Failure> {
    std::fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn io_failure(path: &Path, e: std::io::Error) -> crate::Failure {
    crate::Failure::Usage(format!("{}: {e}", path.display()))
}
