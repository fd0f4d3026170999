use std::path::Path;

use qps_core::bath::{BathConfig, BathFile, FieldParams, NV_A_JSON, NV_B_JSON};
use sha2::{Digest, Sha256};

use crate::CliError;

/// A bath configuration together with the exact bytes it was read from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    /// Preset name or file path.
    pub source: String,
    pub text: String,
    pub bath: BathConfig,
    pub field: FieldParams,
}

impl LoadedConfig {
    /// `nv_a` / `nv_b` select a bundled configuration, anything else is a path.
    pub fn load(spec: &str) -> Result<Self, CliError> {
        let text = match spec {
            "nv_a" => NV_A_JSON.to_string(),
            "nv_b" => NV_B_JSON.to_string(),
            path => std::fs::read_to_string(Path::new(path))
                .map_err(|e| CliError::Input(format!("cannot read config {path}: {e}")))?,
        };
        Self::from_text(spec, text)
    }

    pub fn from_text(source: &str, text: String) -> Result<Self, CliError> {
        let file = BathFile::from_json(&text).map_err(|e| CliError::Input(format!("{source}: {e}")))?;
        let (bath, field) = file.build().map_err(|e| CliError::Input(format!("{source}: {e}")))?;
        Ok(Self {
            source: source.to_string(),
            text,
            bath,
            field,
        })
    }

    pub fn sha256(&self) -> String {
        Sha256::digest(self.text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
