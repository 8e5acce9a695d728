//! Fitted LOCART models on disk.
//!
//! Pretty-printed JSON with a `format_version` header. The bytes depend only on
//! the model, so refitting with the same inputs reproduces the file exactly.

use std::fs;
use std::path::Path;

use lucca_core::locart::LocartModel;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format_version: u32,
    pub environment: String,
    /// Transition tuples used for the fit (partition and scale sets together).
    pub n_tuples: usize,
    pub model: LocartModel,
}

impl SavedModel {
    pub fn new(environment: &str, n_tuples: usize, model: LocartModel) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            environment: environment.to_string(),
            n_tuples,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(src: &str, origin: &str) -> Result<Self> {
        let saved: SavedModel = serde_json::from_str(src).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if saved.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Invalid {
                path: origin.to_string(),
                field: "format_version".into(),
                reason: format!("unsupported version {}", saved.format_version),
            });
        }
        Ok(saved)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&src, &path.display().to_string())
    }
}
