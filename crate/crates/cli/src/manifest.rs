//! Run manifests: everything needed to reproduce an artifact directory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use riverkpp::classifier::SimOptions;
use riverkpp::network::RiverNetwork;
use riverkpp::phase_plane::{PsiGridOptions, TraceOptions, TrajectoryKind};
use riverkpp::simulator::FarBoundary;
use riverkpp::stationary::{ProfileOptions, ThresholdOptions, TypeSelector};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Fully resolved inputs of one subcommand: defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum ResolvedConfig {
    PhasePlane {
        mu: f64,
        kind: TrajectoryKind,
        trace: TraceOptions,
        grid: PsiGridOptions,
    },
    Stationary {
        network: RiverNetwork,
        thresholds: ThresholdOptions,
        alpha: Option<f64>,
        selector: TypeSelector,
        profile: ProfileOptions,
    },
    Simulate {
        network: RiverNetwork,
        init: String,
        length: f64,
        nodes: usize,
        dt: f64,
        t_final: f64,
        far_bc: FarBoundary,
        sample_every: f64,
        lyapunov: bool,
    },
    Classify {
        network: RiverNetwork,
    },
    Verify {
        network: RiverNetwork,
        sim: SimOptions,
    },
    Sweep {
        grid: String,
        simulate: bool,
        sim: SimOptions,
        workers: usize,
    },
}

impl ResolvedConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ResolvedConfig::PhasePlane { .. } => "phase-plane",
            ResolvedConfig::Stationary { .. } => "stationary",
            ResolvedConfig::Simulate { .. } => "simulate",
            ResolvedConfig::Classify { .. } => "classify",
            ResolvedConfig::Verify { .. } => "verify",
            ResolvedConfig::Sweep { .. } => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: ResolvedConfig,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
    /// Files written next to the manifest.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(config: ResolvedConfig) -> Self {
        Self {
            subcommand: config.name().to_string(),
            config,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: 0.0,
            artifacts: vec![],
        }
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::write(dir.join(MANIFEST_FILE), self.to_json()?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> anyhow::Result<Self> {
        Self::from_json(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)
    }
}
