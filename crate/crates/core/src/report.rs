//! Versioned JSON report envelope with an embedded run manifest.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "hdsel-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Every resolved parameter of the command, enough to rerun it.
    pub config: Value,
    pub seed: u64,
    pub tool_version: String,
    pub timestamps: Timestamps,
}

impl RunManifest {
    pub fn new(command: &str, config: Value, seed: u64, started_unix_ms: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            config,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamps: Timestamps {
                started_unix_ms,
                finished_unix_ms: started_unix_ms,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub manifest: RunManifest,
    pub result: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(manifest: RunManifest, result: Value, warnings: Vec<String>) -> Self {
        Report {
            schema: SCHEMA_VERSION.to_string(),
            manifest,
            result,
            warnings,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Report =
            serde_json::from_str(text).map_err(|e| Error::Data(format!("not a report: {e}")))?;
        if report.schema != SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "unsupported report schema `{}`, expected `{SCHEMA_VERSION}`",
                report.schema
            )));
        }
        Ok(report)
    }

    /// The report with timestamps zeroed, for reproducibility comparisons.
    pub fn without_timestamps(&self) -> Report {
        let mut r = self.clone();
        r.manifest.timestamps = Timestamps {
            started_unix_ms: 0,
            finished_unix_ms: 0,
        };
        r
    }
}

pub fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
