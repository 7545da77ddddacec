//! Online rule-base learning: passive-aggressive edge updates, structural
//! add/prune from co-occurrence counts, and the rule-induction gate.

mod induction;
mod pa;
mod session;
mod structure;
pub mod synthetic;

pub use induction::{candidate_templates, induce_rules, sigmoid, template_score, LogOddsScorer, Template, TemplateScorer};
pub use pa::{pa_update, pa_update_rules, score_disease, top_k};
pub use session::{ranking_violations, replay, replay_rules, Learner, PassSummary};
pub use structure::{specificity, structure_update, structure_update_rules, update_counts, EdgeStats};

use crate::dsl::{BodyLiteral, Literal, Provenance, Rule, RuleId};
use crate::ranking::WeightedSymptom;
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, thiserror::Error)]
pub enum LearningError {
    #[error("case has no symptoms")]
    EmptyCase,
    #[error("case has no ground-truth labels")]
    EmptyTruth,
    #[error("invalid learner config: {0}")]
    InvalidConfig(String),
    #[error("stream line {line}: {reason}")]
    Stream { line: usize, reason: String },
    #[error("replay: {0}")]
    Replay(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Learner hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    /// Desired ranking margin m.
    pub margin: f64,
    /// Aggressiveness cap C on the per-case step.
    pub cap: f64,
    /// Number of top-scoring diseases searched for negatives.
    pub top_k: usize,
    /// Minimum positive co-occurrences before an edge may be added.
    pub m_pos: u64,
    /// Specificity needed to add an edge.
    pub rho_add: f64,
    /// Specificity below which a zero edge is pruned.
    pub rho_prune: f64,
    /// Weight of a structurally added edge.
    pub w_init: f64,
    /// Acceptance threshold for induced templates.
    pub tau_induct: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self { margin: 0.5, cap: 0.1, top_k: 5, m_pos: 5, rho_add: 1.5, rho_prune: 0.5, w_init: 0.3, tau_induct: 0.6 }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearningError> {
        let bad = |m: &str| Err(LearningError::InvalidConfig(m.to_string()));
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin must be > 0");
        }
        if !(self.cap > 0.0 && self.cap.is_finite()) {
            return bad("cap must be > 0");
        }
        if self.top_k == 0 {
            return bad("top_k must be >= 1");
        }
        if self.m_pos == 0 {
            return bad("m_pos must be >= 1");
        }
        if !(self.rho_add > 0.0 && self.rho_prune > 0.0) {
            return bad("specificity thresholds must be > 0");
        }
        if self.rho_prune > self.rho_add {
            return bad("rho_prune must not exceed rho_add");
        }
        if !(self.w_init > 0.0 && self.w_init <= 1.0) {
            return bad("w_init must be in (0, 1]");
        }
        if !(self.tau_induct > 0.0 && self.tau_induct < 1.0) {
            return bad("tau_induct must be in (0, 1)");
        }
        Ok(())
    }
}

/// A training case: observed symptoms `x` and true diseases `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCase {
    pub id: String,
    pub symptoms: Vec<Symbol>,
    pub labels: Vec<Symbol>,
}

impl LabeledCase {
    pub fn new(id: &str, symptoms: &[&str], labels: &[&str]) -> Self {
        let sym = |s: &&str| Symbol::new(s).expect("valid atom");
        Self { id: id.into(), symptoms: symptoms.iter().map(sym).collect(), labels: labels.iter().map(sym).collect() }
    }

    /// Distinct symptoms in sorted order.
    pub fn symptom_set(&self) -> Vec<Symbol> {
        self.symptoms.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn label_set(&self) -> BTreeSet<Symbol> {
        self.labels.iter().cloned().collect()
    }

    pub fn check(&self) -> Result<(), LearningError> {
        if self.symptoms.is_empty() {
            return Err(LearningError::EmptyCase);
        }
        if self.labels.is_empty() {
            return Err(LearningError::EmptyTruth);
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct StreamLine {
    #[serde(default)]
    id: Option<String>,
    symptoms: Vec<WeightedSymptom>,
    labels: Vec<Symbol>,
}

/// Parses a JSONL case stream `{id, symptoms:[{name, weight}], labels}`.
/// Symptoms with weight 0 are treated as absent.
pub fn parse_stream(text: &str) -> Result<Vec<LabeledCase>, LearningError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| LearningError::Stream { line: n + 1, reason };
        let raw: StreamLine = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let case = LabeledCase {
            id: raw.id.unwrap_or_else(|| format!("line{}", n + 1)),
            symptoms: raw.symptoms.into_iter().filter(|s| s.weight > 0.0).map(|s| s.name).collect(),
            labels: raw.labels,
        };
        case.check().map_err(|e| err(e.to_string()))?;
        out.push(case);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchedEdge {
    pub disease: Symbol,
    pub symptom: Symbol,
    /// Rule whose literal changed; `None` when the edge was added to the
    /// disease's support rule.
    pub rule_id: Option<RuleId>,
    pub old: f64,
    pub new: f64,
}

/// One entry of the learner's audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum UpdateEvent {
    PaUpdate { case_id: String, d_plus: Symbol, d_minus: Symbol, loss: f64, tau: f64, touched: Vec<TouchedEdge> },
    EdgeAdded { disease: Symbol, symptom: Symbol, ratio: f64, weight: f64 },
    EdgePruned { disease: Symbol, symptom: Symbol, ratio: f64 },
    RuleRemoved { rule_id: RuleId },
    ZeroFlagged { disease: Symbol, symptom: Symbol },
    RuleInduced { rule: Rule, score: f64 },
}

pub fn write_log(events: &[UpdateEvent]) -> String {
    events.iter().map(|e| serde_json::to_string(e).expect("event serializes") + "\n").collect()
}

pub fn read_log(text: &str) -> Result<Vec<UpdateEvent>, LearningError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| LearningError::Stream { line: n + 1, reason: e.to_string() }))
        .collect()
}

/// Adds `symptom(s)@w` to the disease's learner-owned rule, creating it when
/// absent. Returns `None` when the resulting rule id already exists.
pub(crate) fn add_to_support(rules: &mut Vec<Rule>, disease: &Symbol, symptom: &Symbol, w: f64, version: u64) -> Option<RuleId> {
    let lit = Literal::symptom(symptom);
    match rules.iter().position(|r| r.disease() == disease && r.provenance == Provenance::Learner) {
        Some(i) => {
            if rules[i].body.iter().any(|b| b.literal == lit) {
                return None;
            }
            let mut r = rules[i].clone();
            r.body.push(BodyLiteral::new(lit, w));
            r.rehash();
            if rules.iter().any(|o| o.id == r.id) {
                return None;
            }
            let id = r.id.clone();
            rules[i] = r;
            Some(id)
        }
        None => {
            let r = Rule::new(Literal::diagnosis(disease), vec![BodyLiteral::new(lit, w)], Provenance::Learner, version)
                .ok()?;
            if rules.iter().any(|o| o.id == r.id) {
                return None;
            }
            let id = r.id.clone();
            rules.push(r);
            Some(id)
        }
    }
}

/// Removes zero-weight `symptom(s)` literals from the disease's
/// non-clinician rules. Rules left with an empty body, or whose new id
/// collides with another rule, are dropped; their ids are returned.
/// The flag is false when nothing changed.
pub(crate) fn prune_edge(rules: &mut Vec<Rule>, disease: &Symbol, symptom: &Symbol) -> (bool, Vec<RuleId>) {
    let lit = Literal::symptom(symptom);
    let mut changed = false;
    let mut removed = Vec::new();
    let mut i = 0;
    while i < rules.len() {
        let r = &rules[i];
        let hit = r.disease() == disease
            && r.provenance != Provenance::Clinician
            && r.body.iter().any(|b| b.literal == lit && b.weight == 0.0);
        if !hit {
            i += 1;
            continue;
        }
        changed = true;
        let mut r = rules[i].clone();
        let old_id = r.id.clone();
        r.body.retain(|b| !(b.literal == lit && b.weight == 0.0));
        let collides = if r.body.is_empty() {
            true
        } else {
            r.rehash();
            rules.iter().enumerate().any(|(j, o)| j != i && o.id == r.id)
        };
        if collides {
            rules.remove(i);
            removed.push(old_id);
        } else {
            rules[i] = r;
            i += 1;
        }
    }
    (changed, removed)
}

/// Applies a logged event to a rule set. Informational events are no-ops.
pub fn apply_event(rules: &mut Vec<Rule>, event: &UpdateEvent, version: u64) -> Result<(), LearningError> {
    match event {
        UpdateEvent::PaUpdate { touched, .. } => {
            for t in touched {
                match &t.rule_id {
                    Some(id) => {
                        let rule = rules
                            .iter_mut()
                            .find(|r| &r.id == id)
                            .ok_or_else(|| LearningError::Replay(format!("rule {id} not found")))?;
                        let lit = Literal::symptom(&t.symptom);
                        let b = rule
                            .body
                            .iter_mut()
                            .find(|b| b.literal == lit)
                            .ok_or_else(|| LearningError::Replay(format!("{lit} not in rule {id}")))?;
                        b.weight = t.new;
                    }
                    None => {
                        add_to_support(rules, &t.disease, &t.symptom, t.new, version)
                            .ok_or_else(|| LearningError::Replay(format!("cannot add {} to {}", t.symptom, t.disease)))?;
                    }
                }
            }
        }
        UpdateEvent::EdgeAdded { disease, symptom, weight, .. } => {
            add_to_support(rules, disease, symptom, *weight, version)
                .ok_or_else(|| LearningError::Replay(format!("cannot add {symptom} to {disease}")))?;
        }
        UpdateEvent::EdgePruned { disease, symptom, .. } => {
            prune_edge(rules, disease, symptom);
        }
        UpdateEvent::RuleRemoved { rule_id } => rules.retain(|r| &r.id != rule_id),
        UpdateEvent::RuleInduced { rule, .. } => {
            if !rules.iter().any(|r| r.id == rule.id) {
                rules.push(rule.clone());
            }
        }
        UpdateEvent::ZeroFlagged { .. } => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_bounds() {
        assert!(LearnerConfig::default().validate().is_ok());
        let c = LearnerConfig { rho_prune: 2.0, ..Default::default() };
        assert!(matches!(c.validate(), Err(LearningError::InvalidConfig(_))));
        let c = LearnerConfig { tau_induct: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn stream_parsing() {
        let text = "{\"id\":\"a\",\"symptoms\":[{\"name\":\"fever\",\"weight\":1.0},{\"name\":\"cough\",\"weight\":0}],\"labels\":[\"flu\"]}\n\n{\"symptoms\":[],\"labels\":[\"flu\"]}";
        match parse_stream(text) {
            Err(LearningError::Stream { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        let cases = parse_stream(text.lines().next().unwrap()).unwrap();
        assert_eq!(cases[0].symptoms, vec![Symbol::new("fever").unwrap()]);
    }

    #[test]
    fn log_round_trip() {
        let events = vec![
            UpdateEvent::ZeroFlagged { disease: Symbol::new("d").unwrap(), symptom: Symbol::new("s").unwrap() },
            UpdateEvent::RuleRemoved { rule_id: RuleId("r1".into()) },
        ];
        let text = write_log(&events);
        assert!(text.starts_with("{\"event\":\"zero_flagged\""));
        assert_eq!(read_log(&text).unwrap(), events);
    }
}
