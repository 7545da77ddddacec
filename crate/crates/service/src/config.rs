use crate::error::ConfigError;
use serde::de::DeserializeOwned;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
/// Proof trees with more nodes than this are returned by reference.
pub const DEFAULT_PROOF_CAP: usize = 64;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub store: PathBuf,
    pub engine: Option<PathBuf>,
    pub learner: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub proof_cap: usize,
}

impl ServiceConfig {
    pub fn new(store: impl Into<PathBuf>) -> Self {
        Self {
            listen: DEFAULT_LISTEN.parse().expect("valid default address"),
            store: store.into(),
            engine: None,
            learner: None,
            index: None,
            proof_cap: DEFAULT_PROOF_CAP,
        }
    }
}

/// Reads a settings file: JSON when the extension is `.json`, TOML
/// otherwise. Missing keys take their defaults.
pub fn load_settings<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = read(path)?;
    let format = |reason: String| ConfigError::Format { path: path.display().to_string(), reason };
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| format(e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| format(e.to_string()))
    }
}

pub(crate) fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })
}
