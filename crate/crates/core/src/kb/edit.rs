use super::{violation, KbError, KnowledgeSnapshot};
use crate::dsl::{literal_text, parse_program, Literal, PriorEntry, Provenance, RuleId};
use crate::learning::{pa_update_rules, LabeledCase, LearnerConfig, UpdateEvent};
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Author {
    #[default]
    Clinician,
    Learner,
}

/// One requested change to the knowledge base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditKind {
    /// `rule` is one DSL rule clause. When `weight` is set it replaces every
    /// body edge weight of the new rule.
    AddRule {
        rule: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<f64>,
    },
    RemoveRule { id: RuleId },
    AdjustWeight {
        rule_id: RuleId,
        #[serde(with = "literal_text")]
        literal: Literal,
        new_weight: f64,
    },
    LexiconSet { term: String, weight: f64 },
    PriorSet { entry: PriorEntry },
    /// A labelled case routed through the passive-aggressive update.
    CounterExample {
        #[serde(default)]
        case_id: String,
        symptoms: Vec<Symbol>,
        labels: Vec<Symbol>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRequest {
    #[serde(flatten)]
    pub kind: EditKind,
    #[serde(default)]
    pub author: Author,
    #[serde(default)]
    pub note: String,
}

impl EditRequest {
    pub fn clinician(kind: EditKind) -> Self {
        Self { kind, author: Author::Clinician, note: String::new() }
    }
}

/// Applies edits in order to a copy of `base` and re-verifies consistency.
/// Any failing edit rejects the whole batch. Returns the new snapshot
/// stamped `version` plus learner events from counter-examples.
pub fn apply_edits(
    base: &KnowledgeSnapshot,
    edits: &[EditRequest],
    learner: &LearnerConfig,
    version: u64,
    timestamp: u64,
) -> Result<(KnowledgeSnapshot, Vec<UpdateEvent>), KbError> {
    let mut draft = base.draft();
    let mut events = Vec::new();
    for edit in edits {
        match &edit.kind {
            EditKind::AddRule { rule, weight } => {
                let program = parse_program(rule)?;
                if program.rules.len() != 1 || !program.facts.is_empty() || !program.priors.is_empty() {
                    return Err(violation("AddRule expects exactly one rule clause"));
                }
                let mut new_rule = program.rules.into_iter().next().expect("one rule");
                if let Some(w) = *weight {
                    if !(w > 0.0 && w <= 1.0) {
                        return Err(violation(format!("AddRule weight {w} outside (0, 1]")));
                    }
                    new_rule.body.iter_mut().for_each(|b| b.weight = w);
                }
                new_rule.provenance = match edit.author {
                    Author::Clinician => Provenance::Clinician,
                    Author::Learner => Provenance::Induced,
                };
                new_rule.created_at = version;
                if draft.rules.iter().any(|r| r.id == new_rule.id) {
                    return Err(violation(format!("duplicate rule {}: {}", new_rule.id, rule.trim())));
                }
                draft.rules.push(new_rule);
            }
            EditKind::RemoveRule { id } => {
                let before = draft.rules.len();
                draft.rules.retain(|r| &r.id != id);
                if draft.rules.len() == before {
                    return Err(KbError::UnknownRuleId(id.clone()));
                }
            }
            EditKind::AdjustWeight { rule_id, literal, new_weight } => {
                if !(0.0..=1.0).contains(new_weight) {
                    return Err(violation(format!("weight {new_weight} outside [0, 1]")));
                }
                let rule = draft
                    .rules
                    .iter_mut()
                    .find(|r| &r.id == rule_id)
                    .ok_or_else(|| KbError::UnknownRuleId(rule_id.clone()))?;
                let body = rule
                    .body
                    .iter_mut()
                    .find(|b| &b.literal == literal)
                    .ok_or_else(|| violation(format!("rule {rule_id} has no body literal {literal}")))?;
                body.weight = *new_weight;
            }
            EditKind::LexiconSet { term, weight } => {
                if !(0.0..=1.0).contains(weight) {
                    return Err(violation(format!("lexicon weight {weight} outside [0, 1]")));
                }
                draft.lexicon.insert(term, *weight);
            }
            EditKind::PriorSet { entry } => {
                let key = entry.key();
                draft.priors.retain(|p| p.key() != key);
                draft.priors.push(entry.clone());
            }
            EditKind::CounterExample { case_id, symptoms, labels } => {
                let case = LabeledCase {
                    id: case_id.clone(),
                    symptoms: symptoms.clone(),
                    labels: labels.clone(),
                };
                events.extend(pa_update_rules(&mut draft.rules, &case, learner, version)?);
            }
        }
    }
    Ok((draft.build(version, timestamp)?, events))
}
