//! Case retrieval, hybrid symptom weighting and prior fusion.

mod blend;
mod embed;
mod index;
mod priors;

pub use blend::{blend_weights, rescale_for_inference, RescaleMode};
pub use embed::{embed_case, CaseVector, Embedder, HashingEmbedder, DEFAULT_DIM};
pub use index::{
    gini, neighbour_prior, retrieve_neighbours, CaseIndex, IndexEntry, Neighbour, DEFAULT_GINI_THRESHOLD,
    DEFAULT_K_MAX,
};
pub use priors::{age_band, fuse_priors, lookup_prior, Demographics, Stratum, DEFAULT_PRIOR_FLOOR};

use crate::dsl::{FuzzyFact, Literal};
use crate::extraction::{extract_facts, ExtractionError, ExtractionReport, Extractor, LexiconExtractor};
use crate::inference::{derive_candidates, DiagnosisCandidate, InferenceConfig, TNorm};
use crate::kb::KnowledgeSnapshot;
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum RankingError {
    #[error("case has no usable content")]
    EmptyCase,
    #[error("empty label set")]
    EmptySet,
    #[error("case index is empty")]
    EmptyIndex,
    #[error("no symptoms to weight")]
    EmptySymptomSet,
    #[error("length mismatch: {text} text weights, {retrieved} retrieval weights")]
    LengthMismatch { text: usize, retrieved: usize },
    #[error("no prior for disease {0} and no fallback configured")]
    MissingPrior(Symbol),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("index line {line}: {reason}")]
    Index { line: usize, reason: String },
    #[error("vector dimension {found}, index expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("duplicate case id {0}")]
    DuplicateCase(String),
    #[error(transparent)]
    Extraction(ExtractionError),
}

impl From<ExtractionError> for RankingError {
    fn from(e: ExtractionError) -> Self {
        match e {
            ExtractionError::EmptyNote => RankingError::EmptyCase,
            other => RankingError::Extraction(other),
        }
    }
}

/// Pipeline settings. Every field has a default, so partial TOML or JSON
/// documents are accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    #[serde(flatten)]
    pub inference: InferenceConfig,
    pub alpha: f64,
    pub beta: f64,
    pub rescale: RescaleMode,
    pub k_max: usize,
    pub gini_threshold: f64,
    /// Prior for diseases with no matching stratum; `None` makes a missing
    /// prior an error.
    pub prior_floor: Option<f64>,
    pub dim: usize,
    /// Treat every present fact as fully true (weight 1).
    pub crisp: bool,
    pub use_priors: bool,
    pub use_retrieval: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            inference: InferenceConfig::default(),
            alpha: 3.0,
            beta: 3.0,
            rescale: RescaleMode::default(),
            k_max: DEFAULT_K_MAX,
            gini_threshold: DEFAULT_GINI_THRESHOLD,
            prior_floor: Some(DEFAULT_PRIOR_FLOOR),
            dim: DEFAULT_DIM,
            crisp: false,
            use_priors: true,
            use_retrieval: true,
        }
    }
}

/// Per-request adjustments. They produce a modified copy of the engine
/// configuration and never touch the snapshot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub tnorm: Option<TNorm>,
    pub rescale: Option<RescaleMode>,
    /// Replaces the text weight of a symptom already present in the case.
    pub symptom_weights: BTreeMap<Symbol, f64>,
}

impl Overrides {
    pub fn apply(&self, base: &EngineConfig) -> EngineConfig {
        let mut c = base.clone();
        if let Some(a) = self.alpha {
            c.alpha = a;
        }
        if let Some(b) = self.beta {
            c.beta = b;
        }
        if let Some(g) = self.gamma {
            c.inference.gamma = g;
        }
        if let Some(t) = self.tnorm {
            c.inference.tnorm = t;
        }
        if let Some(r) = self.rescale {
            c.rescale = r;
        }
        c
    }

    pub fn validate(&self) -> Result<(), RankingError> {
        for (s, w) in &self.symptom_weights {
            if !(0.0..=1.0).contains(w) {
                return Err(RankingError::InvalidInput(format!("weight {w} for {s} outside [0,1]")));
            }
        }
        if let Some(g) = self.gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(RankingError::InvalidInput(format!("gamma {g} outside [0,1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSymptom {
    pub name: Symbol,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

/// One case: either a free-text note or a pre-extracted symptom list.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    #[serde(default)]
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symptoms: Option<Vec<WeightedSymptom>>,
    #[serde(default)]
    pub labels: Vec<Symbol>,
    #[serde(default)]
    pub demographics: Demographics,
}

impl CaseRecord {
    pub fn from_text(id: &str, text: &str) -> Self {
        Self { id: id.into(), text: Some(text.into()), ..Default::default() }
    }

    pub fn from_symptoms(id: &str, symptoms: &[(&str, f64)]) -> Self {
        let symptoms = symptoms
            .iter()
            .map(|(n, w)| WeightedSymptom { name: Symbol::new(n).expect("valid symptom atom"), weight: *w })
            .collect();
        Self { id: id.into(), symptoms: Some(symptoms), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), RankingError> {
        match (&self.text, &self.symptoms) {
            (Some(_), Some(_)) => Err(RankingError::InvalidInput("case has both text and symptoms".into())),
            (None, None) => Err(RankingError::InvalidInput("case needs text or symptoms".into())),
            (None, Some(s)) if s.is_empty() => Err(RankingError::EmptyCase),
            (None, Some(s)) => match s.iter().find(|s| !(0.0..=1.0).contains(&s.weight)) {
                Some(bad) => Err(RankingError::InvalidInput(format!("weight {} for {}", bad.weight, bad.name))),
                None => Ok(()),
            },
            (Some(_), None) => Ok(()),
        }
    }
}

/// Per-symptom breakdown of the hybrid weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymptomWeight {
    pub symptom: Symbol,
    pub w_text: f64,
    pub w_retr: f64,
    pub blended: f64,
    /// Truth degree handed to the solver.
    pub activation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub snapshot_version: u64,
    pub content_hash: String,
    pub candidates: Vec<DiagnosisCandidate>,
    pub weights: Vec<SymptomWeight>,
    pub facts: Vec<FuzzyFact>,
    pub neighbours: Vec<Neighbour>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction: Option<ExtractionReport>,
}

/// The diagnostic pipeline with its pluggable parts.
#[derive(Clone)]
pub struct Engine {
    pub config: EngineConfig,
    pub extractor: Arc<dyn Extractor>,
    pub embedder: Arc<dyn Embedder>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Default for Engine {
    fn default() -> Self {
        Self::new(EngineConfig::default())
    }
}

impl Engine {
    pub fn new(config: EngineConfig) -> Self {
        let embedder = Arc::new(HashingEmbedder { dim: config.dim });
        Self { config, extractor: Arc::new(LexiconExtractor::default()), embedder }
    }

    pub fn with_extractor(mut self, extractor: Arc<dyn Extractor>) -> Self {
        self.extractor = extractor;
        self
    }

    pub fn with_embedder(mut self, embedder: Arc<dyn Embedder>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn diagnose(
        &self,
        case: &CaseRecord,
        snapshot: &KnowledgeSnapshot,
        index: Option<&CaseIndex>,
        overrides: &Overrides,
    ) -> Result<Diagnosis, RankingError> {
        let (facts, report) = self.case_facts(case, snapshot)?;
        let mut d = self.diagnose_facts(&facts, &case.demographics, snapshot, index, overrides)?;
        d.extraction = report;
        Ok(d)
    }

    /// Facts for a case: extracted from its note, or one symptom fact per
    /// listed symptom (duplicates keep the larger weight).
    pub fn case_facts(
        &self,
        case: &CaseRecord,
        snapshot: &KnowledgeSnapshot,
    ) -> Result<(Vec<FuzzyFact>, Option<ExtractionReport>), RankingError> {
        case.validate()?;
        match (&case.text, &case.symptoms) {
            (Some(text), _) => {
                let report = extract_facts(text, snapshot.lexicon(), self.extractor.as_ref())?;
                Ok((report.facts.clone(), Some(report)))
            }
            (None, Some(symptoms)) => {
                let mut facts: Vec<FuzzyFact> = Vec::new();
                for s in symptoms {
                    match facts.iter_mut().find(|f| f.literal.symptom_name() == Some(&s.name)) {
                        Some(f) => f.weight = f.weight.max(s.weight),
                        None => facts.push(FuzzyFact::new(Literal::symptom(&s.name), s.weight)),
                    }
                }
                Ok((facts, None))
            }
            (None, None) => Err(RankingError::InvalidInput("case needs text or symptoms".into())),
        }
    }

    /// Runs the pipeline from already-extracted facts.
    pub fn diagnose_facts(
        &self,
        facts: &[FuzzyFact],
        demographics: &Demographics,
        snapshot: &KnowledgeSnapshot,
        index: Option<&CaseIndex>,
        overrides: &Overrides,
    ) -> Result<Diagnosis, RankingError> {
        overrides.validate()?;
        let config = overrides.apply(&self.config);
        let mut facts: Vec<FuzzyFact> = facts.to_vec();
        if config.crisp {
            facts.iter_mut().for_each(|f| f.weight = 1.0);
        }
        for f in &mut facts {
            if let Some(w) = f.literal.symptom_name().and_then(|s| overrides.symptom_weights.get(s)) {
                f.weight = *w;
            }
        }

        let symptom_idx: Vec<usize> =
            (0..facts.len()).filter(|&i| facts[i].literal.symptom_name().is_some()).collect();
        let symptoms: Vec<Symbol> =
            symptom_idx.iter().map(|&i| facts[i].literal.symptom_name().cloned().expect("symptom")).collect();
        let w_text: Vec<f64> = symptom_idx.iter().map(|&i| facts[i].weight).collect();

        let mut neighbours = Vec::new();
        let mut weights: Vec<SymptomWeight> = symptoms
            .iter()
            .zip(&w_text)
            .map(|(s, &w)| SymptomWeight { symptom: s.clone(), w_text: w, w_retr: 0.0, blended: w, activation: w })
            .collect();
        if let (true, Some(index), false) = (config.use_retrieval, index, symptoms.is_empty()) {
            let items: Vec<&str> = symptoms.iter().map(Symbol::as_str).collect();
            let v = embed_case(&items, self.embedder.as_ref())?;
            neighbours = retrieve_neighbours(index, &v, config.k_max, config.gini_threshold)?;
            let w_retr: Vec<f64> = symptoms.iter().map(|s| neighbour_prior(s, &neighbours, index)).collect();
            let blended = blend_weights(&w_text, &w_retr, config.alpha, config.beta)?;
            let activations = rescale_for_inference(&blended, config.rescale);
            for (i, w) in weights.iter_mut().enumerate() {
                w.w_retr = w_retr[i];
                w.blended = blended[i];
                w.activation = activations[i];
            }
            for (k, &i) in symptom_idx.iter().enumerate() {
                facts[i].weight = activations[k];
            }
        }

        let mut candidates = derive_candidates(snapshot.rules(), &facts, &config.inference);
        if config.use_priors && !candidates.is_empty() {
            candidates = fuse_priors(candidates, snapshot.priors(), &demographics.stratum(), config.prior_floor)?;
        }
        Ok(Diagnosis {
            snapshot_version: snapshot.version(),
            content_hash: snapshot.content_hash().to_string(),
            candidates,
            weights,
            facts,
            neighbours,
            extraction: None,
        })
    }
}

/// Runs the default engine with `config`.
pub fn diagnose(
    case: &CaseRecord,
    snapshot: &KnowledgeSnapshot,
    index: Option<&CaseIndex>,
    config: &EngineConfig,
) -> Result<Diagnosis, RankingError> {
    Engine::new(config.clone()).diagnose(case, snapshot, index, &Overrides::default())
}
