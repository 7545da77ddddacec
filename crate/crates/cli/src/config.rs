use anyhow::{bail, Context, Result};
use fuzzdx_core::extraction::{LexiconExtractor, RemoteConfig, RemoteExtractor, TermTable};
use fuzzdx_core::learning::LearnerConfig;
use fuzzdx_core::ranking::{Engine, EngineConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Contents of the `--config` TOML file. Section keys are the field names
/// of the engine and learner settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub engine: EngineConfig,
    pub learner: LearnerConfig,
    pub extractor: ExtractorConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorConfig {
    /// Term table TSV replacing the built-in one.
    pub terms: Option<PathBuf>,
    /// Remote extraction model; takes precedence over `terms`.
    pub remote: Option<RemoteConfig>,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let value: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let known = toml::Table::try_from(Self::default())?;
        for (section, body) in &value {
            let Some(defaults) = known.get(section).and_then(toml::Value::as_table) else { continue };
            if let Some(table) = body.as_table() {
                if let Some(key) = table.keys().find(|k| !defaults.contains_key(*k) && section != "extractor") {
                    bail!("{}: unknown key `{key}` in [{section}]", path.display());
                }
            }
        }
        value.try_into().with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn engine(&self, config: EngineConfig) -> Result<Engine> {
        let engine = Engine::new(config);
        Ok(match (&self.extractor.remote, &self.extractor.terms) {
            (Some(remote), _) => engine.with_extractor(Arc::new(RemoteExtractor::new(remote.clone()))),
            (None, Some(terms)) => {
                let text = std::fs::read_to_string(terms).with_context(|| format!("reading {}", terms.display()))?;
                let terms = TermTable::parse(&text)?;
                engine.with_extractor(Arc::new(LexiconExtractor { terms }))
            }
            (None, None) => engine,
        })
    }
}
