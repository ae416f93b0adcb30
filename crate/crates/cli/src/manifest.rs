//! Run manifests. Timestamps live here only, so every other output is
//! byte-identical across reruns.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: Option<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_unix: u64,
    pub wall_seconds: f64,
    pub stages: Vec<Stage>,
    pub complete: bool,
}

/// A manifest that is rewritten after each stage, so an interrupted run
/// leaves the unfinished stages marked.
pub struct ManifestWriter {
    path: PathBuf,
    start: Instant,
    pub manifest: RunManifest,
}

impl ManifestWriter {
    pub fn create(path: &Path, command: &str, config: serde_json::Value, stages: &[&str]) -> Result<Self> {
        let manifest = RunManifest {
            tool: "qbl".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args: std::env::args().skip(1).collect(),
            config,
            inputs: vec![],
            outputs: vec![],
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_seconds: 0.0,
            stages: stages.iter().map(|s| Stage { name: s.to_string(), seconds: None, ok: false }).collect(),
            complete: false,
        };
        let w = Self { path: path.to_path_buf(), start: Instant::now(), manifest };
        w.save()?;
        Ok(w)
    }

    pub fn save(&self) -> Result<()> {
        qbl_core::io::write_json(&self.path, &self.manifest)?;
        Ok(())
    }

    /// Runs `f` as stage `name`, recording its duration and outcome.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let out = f();
        let elapsed = t0.elapsed().as_secs_f64();
        if let Some(s) = self.manifest.stages.iter_mut().find(|s| s.name == name) {
            s.seconds = Some(elapsed);
            s.ok = out.is_ok();
        } else {
            self.manifest.stages.push(Stage { name: name.into(), seconds: Some(elapsed), ok: out.is_ok() });
        }
        self.manifest.wall_seconds = self.start.elapsed().as_secs_f64();
        self.save()?;
        out
    }

    pub fn finish(&mut self) -> Result<()> {
        self.manifest.complete = self.manifest.stages.iter().all(|s| s.ok);
        self.manifest.wall_seconds = self.start.elapsed().as_secs_f64();
        self.save()
    }
}
