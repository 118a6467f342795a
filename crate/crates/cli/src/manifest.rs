//! Run manifests: everything needed to reproduce a run bit-identically.
//!
//! Every command writes `manifest.json` into its output directory; the
//! `rerun` subcommand replays one into a fresh directory and the factor
//! files and reports come out byte-identical (wall-clock timings live in
//! a separate `timings.json` outside the guarantee).

use cyclerank_core::PipelineConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: CommandSpec,
    /// Files the run writes, relative to its output directory.
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum CommandSpec {
    ApproxCycle { input: PathBuf, config: PipelineConfig },
    ApproxCp { input: PathBuf, config: PipelineConfig },
    Gen { spec: GenSpec, output: PathBuf },
    Pcfg { grammar: PathBuf, sentence: Vec<String> },
    SketchBench { n: usize, sizes: Vec<usize>, seed: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: PlantKind,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub noise: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    Cycle,
    Cp,
}

impl RunManifest {
    pub fn new(command: CommandSpec, outputs: Vec<String>) -> Self {
        RunManifest { version: env!("CARGO_PKG_VERSION").to_string(), command, outputs }
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("manifest.json"), json + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
