//! Provenance attached to every emitted artifact.

use std::time::{SystemTime, UNIX_EPOCH};

use pollinglab_core::numerics::GridSpec;
use pollinglab_core::Tolerances;
use serde::{Deserialize, Serialize};

use crate::config::LoadedConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Identifies what produced an artifact. Without timestamps, two manifests
/// of the same command on the same config bytes are identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config_sha256: String,
    pub tolerances: Tolerances,
    /// Busy-period grid request; `null` fields mean the per-model default.
    pub busy_grid: GridSpec,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamps: Option<Timestamps>,
}

/// Wall-clock bounds of the run in seconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started: f64,
    pub finished: f64,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(command: &str, config: &LoadedConfig, seeds: Vec<u64>) -> Self {
        RunManifest {
            tool: "pollinglab".into(),
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            config_sha256: config.sha256(),
            tolerances: config.tolerances(),
            busy_grid: GridSpec::default(),
            seeds,
            timestamps: None,
        }
    }

    /// Records `started` and the current time as the end of the run.
    pub fn stamp(&mut self, started: Option<f64>) {
        if let Some(started) = started {
            self.timestamps = Some(Timestamps {
                started,
                finished: unix_now(),
            });
        }
    }
}

/// The JSON shape of every command result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub manifest: RunManifest,
    pub result: T,
}
