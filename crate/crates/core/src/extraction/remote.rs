use super::{ExtractionError, Extractor, Segment, Triple, TripleValue};
use crate::dsl::{Lexicon, Span};
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    #[serde(default)]
    pub token: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    10_000
}

#[derive(Serialize)]
struct WireRequest<'a> {
    note: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    triples: Vec<WireTriple>,
}

#[derive(Deserialize)]
struct WireTriple {
    entity: String,
    relation: String,
    value: serde_json::Value,
    hedge_weight: f64,
    span: [usize; 2],
    #[serde(default)]
    text: Option<String>,
}

/// Client for an extraction model served over HTTP. The request body is
/// `{"note": ...}` and the response `{"triples": [...]}`. The agent is
/// shareable across threads.
#[derive(Debug, Clone)]
pub struct RemoteExtractor {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteExtractor {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        Self { config, agent }
    }
}

impl Extractor for RemoteExtractor {
    fn extract(&self, note: &str, _segments: &[Segment], _lexicon: &Lexicon) -> Result<Vec<Triple>, ExtractionError> {
        let remote = |e: &dyn std::fmt::Display| ExtractionError::Remote(e.to_string());
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.config.token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request.send_json(WireRequest { note }).map_err(|e| remote(&e))?;
        let body: WireResponse = response.body_mut().read_json().map_err(|e| remote(&e))?;
        body.triples
            .into_iter()
            .map(|w| {
                let sym = |s: &str| Symbol::normalize(s).ok_or_else(|| ExtractionError::Remote(format!("bad atom `{s}`")));
                let value = match &w.value {
                    serde_json::Value::Number(n) => TripleValue::Number(n.as_f64().unwrap_or(0.0)),
                    serde_json::Value::String(s) => TripleValue::Atom(sym(s)?),
                    other => return Err(ExtractionError::Remote(format!("bad value {other}"))),
                };
                Ok(Triple {
                    entity: sym(&w.entity)?,
                    relation: sym(&w.relation)?,
                    value,
                    hedge_weight: w.hedge_weight,
                    span: Span::new(w.span[0], w.span[1]),
                    evidence: w.text,
                })
            })
            .collect()
    }
}
