//! Run summaries and artifact bookkeeping.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use gasket_core::export::{emit_plot_data, ManifestEntry, PlotSeries};
use gasket_core::suite::Check;
use serde::Serialize;
use serde_json::Value;

/// Bumped whenever a field of [`Summary`] changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct SpecSummary {
    pub dimension: usize,
    pub levels: Vec<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub kind: String,
    pub spec: SpecSummary,
    pub depth: usize,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub values: Value,
    pub artifacts: Vec<String>,
}

/// Collects checks, values and artifacts for one run.
pub struct Recorder {
    out: PathBuf,
    checks: Vec<Check>,
    artifacts: Vec<String>,
    plots: Vec<ManifestEntry>,
}

impl Recorder {
    pub fn new(out: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self {
            out: out.to_path_buf(),
            checks: Vec::new(),
            artifacts: Vec::new(),
            plots: Vec::new(),
        })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.out.join(name)
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn plots(&mut self, series: &[PlotSeries]) -> anyhow::Result<()> {
        let entries = emit_plot_data(&self.out, series)?;
        self.artifacts.extend(entries.iter().map(|e| e.file.clone()));
        self.plots.extend(entries);
        Ok(())
    }

    /// Writes `summary.json` (and `manifest.json` when plots were emitted).
    pub fn finish(mut self, kind: &str, config: &crate::config::ExperimentConfig, values: Value) -> anyhow::Result<Summary> {
        if !self.plots.is_empty() {
            let text = serde_json::to_string_pretty(&self.plots)?;
            fs::write(self.path("manifest.json"), text + "\n")?;
        }
        self.artifacts.push("summary.json".into());
        let summary = Summary {
            schema_version: SCHEMA_VERSION,
            kind: kind.into(),
            spec: SpecSummary {
                dimension: config.spec.dimension(),
                levels: config.spec.levels().to_vec(),
            },
            depth: config.depth,
            seed: config.seed,
            passed: self.checks.iter().all(|c| c.passed),
            checks: self.checks,
            values,
            artifacts: self.artifacts,
        };
        let text = serde_json::to_string_pretty(&summary)?;
        fs::write(self.out.join("summary.json"), text + "\n")?;
        Ok(summary)
    }
}
