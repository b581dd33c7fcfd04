//! Model documents.
//!
//! A config is one UTF-8 JSON object:
//!
//! ```json
//! {
//!   "stations": [
//!     {
//!       "lambda": 0.3,
//!       "service": {"kind": "exponential", "rate": 1.0},
//!       "switchover": {"kind": "deterministic", "value": 0.5},
//!       "timer": 1.0
//!     },
//!     {
//!       "lambda": 0.2,
//!       "service": {"kind": "exponential", "rate": 1.0},
//!       "switchover": {"kind": "mixture", "points": [[0.0, 0.5], [1.0, 0.5]]}
//!     }
//!   ],
//!   "strategy": "II",
//!   "tolerances": {"sum": 1e-12}
//! }
//! ```
//!
//! Service kinds are `exponential {rate}`, `deterministic {value}` and
//! `gamma {shape, rate}`; switchovers add `mixture {points: [[value,
//! weight], ...]}`. `timer` defaults to 0. Strategies are `exhaustive`, `I`,
//! `II`, `III` and `IV`. Omitted tolerance fields keep their defaults.
//! Unknown fields are rejected.

use std::fs;
use std::io::Read;

use pollinglab_core::{PollingModel, StationSpec, Strategy, Tolerances};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub stations: Vec<StationSpec>,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

/// A parsed config together with the bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub bytes: Vec<u8>,
    pub file: ConfigFile,
}

impl LoadedConfig {
    pub fn parse(bytes: Vec<u8>) -> CliResult<Self> {
        let file = serde_json::from_slice(&bytes).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(LoadedConfig { bytes, file })
    }

    /// Reads `path`, or standard input when `path` is `-`.
    pub fn read(path: &str) -> CliResult<Self> {
        let bytes = if path == "-" {
            let mut buf = Vec::new();
            std::io::stdin()
                .read_to_end(&mut buf)
                .map_err(|e| CliError::io("<stdin>", e))?;
            buf
        } else {
            fs::read(path).map_err(|e| CliError::io(path, e))?
        };
        Self::parse(bytes)
    }

    pub fn model(&self) -> PollingModel {
        PollingModel::new(self.file.stations.clone(), self.file.strategy)
    }

    pub fn tolerances(&self) -> Tolerances {
        self.file.tolerances.unwrap_or_default()
    }

    /// Lower-case hex SHA-256 of the raw config bytes.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }
}
