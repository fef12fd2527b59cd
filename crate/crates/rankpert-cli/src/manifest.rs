use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Record of one command run, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: &'static str,
    pub started: String,
    pub finished: String,
    pub runtime_secs: f64,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Output files relative to the output directory, including this manifest.
    pub files: Vec<String>,
}

/// Collects output files while a command runs.
pub struct Recorder {
    pub dir: PathBuf,
    command: String,
    config: serde_json::Value,
    seed: u64,
    started: String,
    clock: Instant,
    files: Vec<String>,
}

impl Recorder {
    pub fn new(dir: &Path, command: &str, config: serde_json::Value, seed: u64) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config,
            seed,
            started: now(),
            clock: Instant::now(),
            files: Vec::new(),
        })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        let path = self.path(name);
        fs::write(path, bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Drops any listed file that was never created.
    fn existing(&self) -> Vec<String> {
        self.files.iter().filter(|f| self.dir.join(f).exists()).cloned().collect()
    }

    pub fn finish(self, exit_code: i32, error: Option<String>) -> std::io::Result<()> {
        let mut files = self.existing();
        files.push(MANIFEST_NAME.to_string());
        let manifest = RunManifest {
            command: self.command,
            config: self.config,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
            started: self.started,
            finished: now(),
            runtime_secs: self.clock.elapsed().as_secs_f64(),
            exit_code,
            error,
            files,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST_NAME), text)
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}
