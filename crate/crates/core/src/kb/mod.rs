//! Versioned knowledge base: immutable snapshots, edits, diffs, the
//! append-only snapshot store and counterfactual replay.

mod audit;
mod diff;
mod edit;
mod store;

pub use audit::{counterfactual_audit, AuditReport, RankChange};
pub use diff::{apply_diff, diff, LexiconDelta, PriorDelta, SnapshotDiff, WeightDelta};
pub use edit::{apply_edits, Author, EditKind, EditRequest};
pub use store::{Commit, Manifest, RuleMeta, SnapshotStore};

use crate::dsl::{
    parse_program, print_lexicon, print_program, Lexicon, PriorEntry, Program, Rule, RuleId,
};
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

/// Predicates allowed in rule bodies.
pub const BODY_VOCABULARY: &[&str] = &["symptom", "trigger", "risk", "lab", "test", "finding", "duration"];

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("consistency violation: {reason}")]
    ConsistencyViolation { reason: String },
    #[error("unknown rule id {0}")]
    UnknownRuleId(RuleId),
    #[error("stale version: edits were built against v{base}, head is v{head}")]
    StaleVersion { base: u64, head: u64 },
    #[error("version order: v{older} is newer than v{newer}")]
    VersionOrder { older: u64, newer: u64 },
    #[error("snapshot v{0} is not in the store")]
    MissingSnapshot(u64),
    #[error("diff base mismatch: expected content {expected}, found {found}")]
    DiffBase { expected: String, found: String },
    #[error("store corrupted: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Parse(#[from] crate::dsl::ParseError),
    #[error(transparent)]
    Lexicon(#[from] crate::dsl::LexiconError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Learning(#[from] crate::learning::LearningError),
    #[error(transparent)]
    Ranking(#[from] crate::ranking::RankingError),
}

pub(crate) fn violation(reason: impl Into<String>) -> KbError {
    KbError::ConsistencyViolation { reason: reason.into() }
}

pub(crate) fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// An immutable, versioned bundle of rules, hedge lexicon and priors.
///
/// Rules are kept sorted by (disease, id) and priors by stratum so the
/// canonical text, and therefore `content_hash`, does not depend on edit
/// order. Version and timestamp are not hashed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeSnapshot {
    version: u64,
    timestamp: u64,
    rules: Vec<Rule>,
    lexicon: Lexicon,
    priors: Vec<PriorEntry>,
    content_hash: String,
}

impl KnowledgeSnapshot {
    pub fn new(
        version: u64,
        timestamp: u64,
        mut rules: Vec<Rule>,
        lexicon: Lexicon,
        mut priors: Vec<PriorEntry>,
    ) -> Result<Self, KbError> {
        rules.sort_by(|a, b| a.disease().cmp(b.disease()).then_with(|| a.id.cmp(&b.id)));
        priors.sort_by_key(|a| a.key());
        verify_consistency(&rules, &lexicon, &priors)?;
        let mut snap = Self { version, timestamp, rules, lexicon, priors, content_hash: String::new() };
        snap.content_hash = hash_text(&snap.canonical_text());
        Ok(snap)
    }

    /// Builds a snapshot from a parsed program; facts are not part of a
    /// knowledge base and are dropped.
    pub fn from_program(program: Program, lexicon: Lexicon, version: u64) -> Result<Self, KbError> {
        Self::new(version, now_millis(), program.rules, lexicon, program.priors)
    }

    pub fn from_kb_text(text: &str, lexicon: Lexicon, version: u64) -> Result<Self, KbError> {
        Self::from_program(parse_program(text)?, lexicon, version)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn priors(&self) -> &[PriorEntry] {
        &self.priors
    }

    pub fn content_hash(&self) -> &str {
        &self.content_hash
    }

    pub fn rule(&self, id: &RuleId) -> Option<&Rule> {
        self.rules.iter().find(|r| &r.id == id)
    }

    /// Sorted, de-duplicated diseases that head at least one rule.
    pub fn diseases(&self) -> Vec<Symbol> {
        let mut out: Vec<Symbol> = self.rules.iter().map(|r| r.disease().clone()).collect();
        out.dedup();
        out
    }

    /// `.kb` text of rules and priors.
    pub fn kb_text(&self) -> String {
        print_program(&self.rules, &[], &self.priors)
    }

    /// The hashed serialization: `.kb` text followed by the lexicon TSV.
    pub fn canonical_text(&self) -> String {
        format!("{}%% lexicon\n{}", self.kb_text(), print_lexicon(&self.lexicon))
    }

    /// Mutable copy for building the next version.
    pub fn draft(&self) -> SnapshotDraft {
        SnapshotDraft {
            rules: self.rules.clone(),
            lexicon: self.lexicon.clone(),
            priors: self.priors.clone(),
        }
    }

    /// Same content under a new version stamp.
    pub fn restamp(&self, version: u64, timestamp: u64) -> Self {
        Self { version, timestamp, ..self.clone() }
    }

    pub(crate) fn with_provenance(mut self, meta: &BTreeMap<RuleId, RuleMeta>) -> Self {
        for r in &mut self.rules {
            if let Some(m) = meta.get(&r.id) {
                r.provenance = m.provenance;
                r.created_at = m.created_at;
            }
        }
        self
    }

    /// Recomputes the hash from content; false on tampered deserialized data.
    pub fn verify_hash(&self) -> bool {
        hash_text(&self.canonical_text()) == self.content_hash
    }
}

/// Working copy of snapshot content.
#[derive(Debug, Clone, Default)]
pub struct SnapshotDraft {
    pub rules: Vec<Rule>,
    pub lexicon: Lexicon,
    pub priors: Vec<PriorEntry>,
}

impl SnapshotDraft {
    pub fn build(self, version: u64, timestamp: u64) -> Result<KnowledgeSnapshot, KbError> {
        KnowledgeSnapshot::new(version, timestamp, self.rules, self.lexicon, self.priors)
    }
}

pub type SharedSnapshot = Arc<KnowledgeSnapshot>;

fn hash_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Structural checks only: rule shape, weight bounds, duplicate rules and
/// prior strata, and the body predicate vocabulary.
pub fn verify_consistency(rules: &[Rule], lexicon: &Lexicon, priors: &[PriorEntry]) -> Result<(), KbError> {
    let mut ids = HashSet::new();
    for r in rules {
        r.validate().map_err(|e| violation(format!("rule {}: {e}", r.id)))?;
        if r.id != RuleId::compute(&r.head, &r.body) {
            return Err(violation(format!("rule {} has a stale id", r.id)));
        }
        if !ids.insert(&r.id) {
            return Err(violation(format!("duplicate rule {} for {}", r.id, r.head)));
        }
        for b in &r.body {
            if !BODY_VOCABULARY.contains(&b.literal.predicate.as_str()) {
                return Err(violation(format!(
                    "rule {}: unknown body predicate `{}`",
                    r.id, b.literal.predicate
                )));
            }
        }
    }
    for (term, w) in lexicon.iter() {
        if !(0.0..=1.0).contains(&w) {
            return Err(violation(format!("lexicon weight {w} for `{term}` outside [0, 1]")));
        }
    }
    let mut strata = HashSet::new();
    for p in priors {
        if !(p.prevalence > 0.0 && p.prevalence <= 1.0) {
            return Err(violation(format!("prior {} outside (0, 1]", p.prevalence)));
        }
        if !strata.insert(p.key()) {
            return Err(violation(format!("duplicate prior stratum for {}", p.disease)));
        }
    }
    Ok(())
}

/// Disease–symptom edge weights implied by the rules: positive
/// `symptom(s)` body literals, max over rules of the same disease.
pub fn edge_view(rules: &[Rule]) -> BTreeMap<(Symbol, Symbol), f64> {
    let mut out: BTreeMap<(Symbol, Symbol), f64> = BTreeMap::new();
    for r in rules {
        for b in &r.body {
            if let Some(s) = b.literal.symptom_name() {
                let e = out.entry((r.disease().clone(), s.clone())).or_insert(b.weight);
                *e = e.max(b.weight);
            }
        }
    }
    out
}
