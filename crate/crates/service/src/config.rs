use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xclick_core::evaluation::{load_manifest, DatasetManifest};
use xclick_core::grabcut::EnergyConfig;
use xclick_core::protocol::{ProtocolConfig, ServiceSetup};

use crate::ServiceError;

/// Server configuration, read from one JSON file. Relative paths are taken
/// relative to the working directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    /// Holds `events.jsonl`, ingested images and segmentation masks.
    pub data_dir: PathBuf,
    /// Manifest of qualification images (masks required).
    pub qualification: Option<PathBuf>,
    /// Manifest of images to annotate.
    pub tasks: Option<PathBuf>,
    /// Manifest of hidden evaluation images (masks required).
    pub golden: Option<PathBuf>,
    pub protocol: ProtocolConfig,
    /// Defaults for `/api/segment`; requests may override fields.
    pub energy: EnergyConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("xclick-data"),
            qualification: None,
            tasks: None,
            golden: None,
            protocol: ProtocolConfig::default(),
            energy: EnergyConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|source| ServiceError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))
    }

    /// Loads the three manifests and their images.
    pub fn setup(&self) -> Result<ServiceSetup, ServiceError> {
        let load = |p: &Option<PathBuf>| -> Result<DatasetManifest, ServiceError> {
            Ok(match p {
                Some(p) => load_manifest(p)?,
                None => DatasetManifest::default(),
            })
        };
        Ok(ServiceSetup::from_manifests(
            self.protocol.clone(),
            &load(&self.qualification)?,
            &load(&self.tasks)?,
            &load(&self.golden)?,
        )?)
    }

    pub fn log_path(&self) -> PathBuf {
        self.data_dir.join("events.jsonl")
    }

    pub fn images_dir(&self) -> PathBuf {
        self.data_dir.join("images")
    }

    pub fn masks_dir(&self) -> PathBuf {
        self.data_dir.join("masks")
    }
}
