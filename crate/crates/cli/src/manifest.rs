//! `<output>.manifest.json`: what produced an output file.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    /// Wall-clock milliseconds per stage, in execution order. The only
    /// field that varies between identical runs.
    pub timings_ms: Vec<(String, f64)>,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_ms: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Writes the manifest next to `output`.
    pub fn write_for(&self, output: &Path) -> Result<PathBuf> {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Records the time spent in consecutive named stages.
pub struct StageClock {
    current: Option<(String, Instant)>,
    done: Vec<(String, f64)>,
}

impl StageClock {
    pub fn new() -> Self {
        StageClock {
            current: None,
            done: Vec::new(),
        }
    }

    pub fn start(&mut self, stage: impl Into<String>) {
        self.stop();
        self.current = Some((stage.into(), Instant::now()));
    }

    pub fn stop(&mut self) {
        if let Some((name, t0)) = self.current.take() {
            self.done.push((name, t0.elapsed().as_secs_f64() * 1e3));
        }
    }

    pub fn finish(mut self) -> Vec<(String, f64)> {
        self.stop();
        self.done
    }
}
