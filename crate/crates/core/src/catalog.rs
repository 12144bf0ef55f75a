//! The catalog of deployable in-network compute programs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataplane::ExternSpec;
use crate::time::ns_from_ms;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("catalog read error: {0}")]
    Io(#[from] std::io::Error),
    #[error("duplicate program {0}")]
    DuplicateProgram(String),
    #[error("program {name}: {reason}")]
    InvalidProgram { name: String, reason: String },
    #[error("unknown program {0:?}")]
    UnknownProgram(String),
}

/// On-disk catalog format (JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub programs: Vec<ProgramConfig>,
}

fn default_schema_version() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProgramConfig {
    pub name: String,
    pub ratio: f64,
    pub per_packet_delay_ms: f64,
    pub cpu_cost: f64,
}

/// Loaded catalog with unique program names.
#[derive(Debug, Clone)]
pub struct Catalog {
    entries: BTreeMap<String, ExternSpec>,
}

impl Catalog {
    pub fn from_config(config: &CatalogConfig) -> Result<Self, CatalogError> {
        let mut entries = BTreeMap::new();
        for p in &config.programs {
            if !(p.ratio > 0.0 && p.ratio <= 1.0) {
                return Err(CatalogError::InvalidProgram {
                    name: p.name.clone(),
                    reason: format!("ratio {} outside (0, 1]", p.ratio),
                });
            }
            if p.per_packet_delay_ms < 0.0 || p.cpu_cost < 0.0 {
                return Err(CatalogError::InvalidProgram {
                    name: p.name.clone(),
                    reason: "negative delay or cpu cost".into(),
                });
            }
            let spec = ExternSpec {
                name: p.name.clone(),
                ratio: p.ratio,
                per_packet_delay: ns_from_ms(p.per_packet_delay_ms),
                cpu_cost: p.cpu_cost,
            };
            if entries.insert(p.name.clone(), spec).is_some() {
                return Err(CatalogError::DuplicateProgram(p.name.clone()));
            }
        }
        Ok(Catalog { entries })
    }

    pub fn from_json_str(text: &str) -> Result<Self, CatalogError> {
        let config: CatalogConfig = serde_json::from_str(text)?;
        Self::from_config(&config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// The catalog shipped in-repo; contains the transcoder.
    pub fn builtin() -> Self {
        Self::from_json_str(include_str!("../data/catalog.json")).expect("bundled catalog is valid")
    }

    /// Exact-name selection of a program.
    pub fn select(&self, name: &str) -> Result<&ExternSpec, CatalogError> {
        self.entries
            .get(name)
            .ok_or_else(|| CatalogError::UnknownProgram(name.to_owned()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
