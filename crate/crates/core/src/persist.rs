//! Versioned JSON persistence for scalers, imputers and network weights.
//!
//! Every artifact carries a schema version and a conventions tag so files
//! are self-describing; the network's under-documented conventions make
//! silent mismatches the main reproducibility risk.

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::network::NetworkWeights;
use crate::preprocess::{ImputationModel, ScalerParams};

pub const SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("serialization error on {path}: {source}")]
    Serde {
        path: String,
        source: serde_json::Error,
    },
    #[error("unsupported schema version `{got}` in {path}, expected `{expected}`")]
    SchemaVersion {
        path: String,
        got: String,
        expected: String,
    },
}

/// Identifies the exact formula conventions the weights were trained under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConventionsTag {
    pub gru_blend: String,
    pub candidate_activation: String,
    pub reset_gate: String,
    pub standard_scaler_ddof: u8,
    pub zscore_scaler_ddof: u8,
}

impl Default for ConventionsTag {
    fn default() -> Self {
        Self {
            gru_blend: "h = (1-z)*n + z*h_prev".to_string(),
            candidate_activation: "relu".to_string(),
            reset_gate: "applied after recurrent matmul".to_string(),
            standard_scaler_ddof: 0,
            zscore_scaler_ddof: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Envelope<T> {
    schema_version: String,
    conventions: ConventionsTag,
    payload: T,
}

fn save<T: Serialize>(path: &Path, payload: &T) -> Result<(), PersistError> {
    let doc = Envelope {
        schema_version: SCHEMA_VERSION.to_string(),
        conventions: ConventionsTag::default(),
        payload,
    };
    let text = serde_json::to_string(&doc).map_err(|source| PersistError::Serde {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(path, text).map_err(|source| PersistError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T, PersistError> {
    let text = fs::read_to_string(path).map_err(|source| PersistError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let doc: Envelope<T> = serde_json::from_str(&text).map_err(|source| PersistError::Serde {
        path: path.display().to_string(),
        source,
    })?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(PersistError::SchemaVersion {
            path: path.display().to_string(),
            got: doc.schema_version,
            expected: SCHEMA_VERSION.to_string(),
        });
    }
    Ok(doc.payload)
}

pub fn save_scaler(path: impl AsRef<Path>, params: &ScalerParams) -> Result<(), PersistError> {
    save(path.as_ref(), params)
}

pub fn load_scaler(path: impl AsRef<Path>) -> Result<ScalerParams, PersistError> {
    load(path.as_ref())
}

pub fn save_imputer(path: impl AsRef<Path>, model: &ImputationModel) -> Result<(), PersistError> {
    save(path.as_ref(), model)
}

pub fn load_imputer(path: impl AsRef<Path>) -> Result<ImputationModel, PersistError> {
    load(path.as_ref())
}

pub fn save_weights(path: impl AsRef<Path>, weights: &NetworkWeights) -> Result<(), PersistError> {
    save(path.as_ref(), weights)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<NetworkWeights, PersistError> {
    load(path.as_ref())
}
