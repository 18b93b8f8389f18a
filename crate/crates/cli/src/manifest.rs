//! Run manifest: everything needed to audit or replay a run.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct VerdictSummary {
    pub completed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub monitor_violations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifespan: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_e_g: Option<f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub config: RunConfig,
    pub code_version: String,
    /// Pure function of the configuration fields.
    pub config_hash: String,
    /// Wall-clock duration; excluded from any determinism comparison.
    pub duration_seconds: f64,
    pub verdict: VerdictSummary,
}

impl RunManifest {
    pub fn new(config: &RunConfig) -> RunManifest {
        RunManifest {
            scenario: config.scenario.clone(),
            config: config.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.content_hash(),
            duration_seconds: 0.0,
            verdict: VerdictSummary::default(),
        }
    }

    pub fn write(&self, dir: &std::path::Path) -> prandtl_core::Result<()> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| prandtl_core::Error::Format(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(dir: &std::path::Path) -> prandtl_core::Result<RunManifest> {
        let text = std::fs::read_to_string(dir.join("manifest.json"))?;
        serde_json::from_str(&text).map_err(|e| prandtl_core::Error::Format(e.to_string()))
    }
}
