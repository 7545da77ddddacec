//! Free-text note → verified fuzzy facts: segmentation, dictionary triple
//! extraction with hedges, temporal normalisation, verification against the
//! note and mapping to DSL facts.

mod remote;
mod segment;
mod temporal;
mod terms;
mod tokens;
mod verify;

pub use remote::{RemoteConfig, RemoteExtractor};
pub use segment::segment_note;
pub use temporal::{normalize_temporal, tag_for, TemporalMention, ACUTE_CUTOFF_DAYS};
pub use terms::{LexiconExtractor, TermEntry, TermTable, HEDGE_WINDOW};
pub use verify::{verify_facts, RejectReason, Rejection, Verified, NEGATION_CUES, NEGATION_WINDOW};

use crate::dsl::{FuzzyFact, Lexicon, Literal, Span, Temporal};
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum ExtractionError {
    #[error("note is empty")]
    EmptyNote,
    #[error("term table line {line}: {reason}")]
    TermTable { line: usize, reason: String },
    #[error("remote extractor: {0}")]
    Remote(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    ChiefComplaint,
    History,
    Vitals,
    Labs,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub text: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TripleValue {
    Number(f64),
    Atom(Symbol),
}

impl std::fmt::Display for TripleValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TripleValue::Number(v) => write!(f, "{v}"),
            TripleValue::Atom(s) => write!(f, "{s}"),
        }
    }
}

/// An (entity, relation, value) reading of a note span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub entity: Symbol,
    pub relation: Symbol,
    pub value: TripleValue,
    pub hedge_weight: f64,
    pub span: Span,
    /// Text the extractor claims to have read at `span`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<String>,
}

/// Produces triples from a note. Implementations must be deterministic
/// for identical inputs and configuration.
pub trait Extractor: Send + Sync {
    fn extract(&self, note: &str, segments: &[Segment], lexicon: &Lexicon) -> Result<Vec<Triple>, ExtractionError>;
}

/// Maps verified triples to facts. `severity`/`presence` give
/// `symptom(entity)`, `level` gives `lab(entity_value)`, `risk` and
/// `trigger` give `risk(entity)` / `trigger(entity)`, `finding` gives
/// `test(entity_value)`. Duplicate literals keep the maximum weight.
/// Triples with other relations are returned as unmappable.
pub fn to_fuzzy_facts(triples: &[Triple], tags: &BTreeMap<Symbol, Temporal>) -> (Vec<FuzzyFact>, Vec<Triple>) {
    let mut merged: BTreeMap<String, FuzzyFact> = BTreeMap::new();
    let mut unmappable = Vec::new();
    for t in triples {
        let Some(literal) = map_triple(t) else {
            unmappable.push(t.clone());
            continue;
        };
        let weight = t.hedge_weight.clamp(0.0, 1.0);
        let fact = FuzzyFact {
            literal,
            weight,
            temporal: tags.get(&t.entity).copied().unwrap_or_default(),
            span: Some(t.span),
        };
        match merged.get_mut(&fact.literal.to_string()) {
            Some(existing) if existing.weight >= weight => {}
            Some(existing) => *existing = fact,
            None => {
                merged.insert(fact.literal.to_string(), fact);
            }
        }
    }
    let mut facts: Vec<FuzzyFact> = merged.into_values().collect();
    facts.sort_by_key(|f| f.span);
    (facts, unmappable)
}

fn map_triple(t: &Triple) -> Option<Literal> {
    let joined = || match &t.value {
        TripleValue::Atom(v) => Some(format!("{}_{}", t.entity, v)),
        TripleValue::Number(_) => None,
    };
    let (predicate, arg) = match t.relation.as_str() {
        "severity" | "presence" => ("symptom", t.entity.to_string()),
        "level" => ("lab", joined()?),
        "risk" => ("risk", t.entity.to_string()),
        "trigger" => ("trigger", t.entity.to_string()),
        "finding" => ("test", joined()?),
        _ => return None,
    };
    Some(Literal::new(Symbol::new(predicate).ok()?, vec![crate::dsl::Term::Atom(Symbol::new(&arg).ok()?)]))
}

/// Everything the pipeline saw and decided for one note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub segments: Vec<Segment>,
    pub accepted: Vec<Triple>,
    pub rejected: Vec<Rejection>,
    pub unmappable: Vec<Triple>,
    pub temporal: Vec<TemporalMention>,
    pub facts: Vec<FuzzyFact>,
}

/// Runs segmentation, extraction, verification, temporal tagging and fact
/// mapping over `note`.
pub fn extract_facts(note: &str, lexicon: &Lexicon, extractor: &dyn Extractor) -> Result<ExtractionReport, ExtractionError> {
    if note.trim().is_empty() {
        return Err(ExtractionError::EmptyNote);
    }
    let segments = segment_note(note);
    let triples = extractor.extract(note, &segments, lexicon)?;

    let (inside, crossing): (Vec<Triple>, Vec<Triple>) =
        triples.into_iter().partition(|t| segments.iter().any(|s| s.span.contains(&t.span)));
    let mut verified = verify_facts(&inside, note);
    verified
        .rejected
        .extend(crossing.into_iter().map(|triple| Rejection { triple, reason: RejectReason::CrossesSegment }));

    let mut temporal = Vec::new();
    let mut tags = BTreeMap::new();
    for seg in &segments {
        for m in normalize_temporal(&seg.text, seg.span.start) {
            let owner = verified
                .accepted
                .iter()
                .filter(|t| seg.span.contains(&t.span) && t.span.start < m.span.start)
                .max_by_key(|t| t.span.start);
            if let Some(t) = owner {
                tags.insert(t.entity.clone(), m.tag());
            }
            temporal.push(m);
        }
    }
    let (facts, unmappable) = to_fuzzy_facts(&verified.accepted, &tags);
    Ok(ExtractionReport {
        segments,
        accepted: verified.accepted,
        rejected: verified.rejected,
        unmappable,
        temporal,
        facts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(entity: &str, relation: &str, value: &str, w: f64) -> Triple {
        Triple {
            entity: Symbol::new(entity).unwrap(),
            relation: Symbol::new(relation).unwrap(),
            value: TripleValue::Atom(Symbol::new(value).unwrap()),
            hedge_weight: w,
            span: Span::new(0, 1),
            evidence: None,
        }
    }

    #[test]
    fn mapping_table() {
        let (facts, bad) = to_fuzzy_facts(
            &[
                t("chest_pain", "severity", "intermittent", 0.8),
                t("troponin", "level", "normal", 1.0),
                t("smoking", "risk", "present", 1.0),
                t("ecg", "finding", "nonspecific", 1.0),
                t("chest_pain", "duration", "days", 1.0),
            ],
            &BTreeMap::new(),
        );
        let lits: Vec<String> = facts.iter().map(|f| format!("{}@{}", f.literal, f.weight)).collect();
        assert!(lits.contains(&"symptom(chest_pain)@0.8".to_string()));
        assert!(lits.contains(&"lab(troponin_normal)@1".to_string()));
        assert!(lits.contains(&"risk(smoking)@1".to_string()));
        assert!(lits.contains(&"test(ecg_nonspecific)@1".to_string()));
        assert_eq!(bad.len(), 1);
    }

    #[test]
    fn max_merge() {
        let (facts, _) =
            to_fuzzy_facts(&[t("chest_pain", "severity", "a", 0.5), t("chest_pain", "presence", "b", 0.8)], &BTreeMap::new());
        assert_eq!(facts.len(), 1);
        assert_eq!(facts[0].weight, 0.8);
    }

    #[test]
    fn pipeline_tags_and_rejects() {
        let note = "On-and-off chest heaviness for the past ten days. Denies nausea.\nLabs: troponin is normal";
        let r = extract_facts(note, &Lexicon::default_hedges(), &LexiconExtractor::default()).unwrap();
        assert_eq!(r.segments.len(), 2);
        let chest = r.facts.iter().find(|f| f.literal.to_string() == "symptom(chest_pain)").unwrap();
        assert_eq!(chest.weight, 0.5);
        assert_eq!(chest.temporal, Temporal::Acute);
        assert_eq!(chest.span.unwrap().slice(note), Some("chest heaviness"));
        assert!(r.facts.iter().any(|f| f.literal.to_string() == "lab(troponin_normal)"));
        assert!(r.facts.iter().all(|f| f.literal.to_string() != "symptom(nausea)"));
        assert_eq!(r.rejected.len(), 1);
        assert!(matches!(extract_facts("  \n", &Lexicon::default(), &LexiconExtractor::default()), Err(ExtractionError::EmptyNote)));
    }
}
