use super::{KbError, KnowledgeSnapshot};
use crate::dsl::{literal_text, Literal, PriorEntry, PriorKey, Rule, RuleId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDelta {
    pub rule_id: RuleId,
    #[serde(with = "literal_text")]
    pub literal: Literal,
    pub old: f64,
    pub new: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconDelta {
    pub term: String,
    pub old: Option<f64>,
    pub new: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorDelta {
    pub key: PriorKey,
    pub old: Option<PriorEntry>,
    pub new: Option<PriorEntry>,
}

/// Changes that turn one snapshot into another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDiff {
    pub from_version: u64,
    pub to_version: u64,
    pub from_hash: String,
    pub to_hash: String,
    pub added_rules: Vec<Rule>,
    pub removed_rules: Vec<RuleId>,
    pub weight_deltas: Vec<WeightDelta>,
    pub lexicon_deltas: Vec<LexiconDelta>,
    pub prior_deltas: Vec<PriorDelta>,
}

impl SnapshotDiff {
    pub fn is_empty(&self) -> bool {
        self.added_rules.is_empty()
            && self.removed_rules.is_empty()
            && self.weight_deltas.is_empty()
            && self.lexicon_deltas.is_empty()
            && self.prior_deltas.is_empty()
    }
}

pub fn diff(older: &KnowledgeSnapshot, newer: &KnowledgeSnapshot) -> Result<SnapshotDiff, KbError> {
    if older.version() > newer.version() {
        return Err(KbError::VersionOrder { older: older.version(), newer: newer.version() });
    }
    let old_rules: BTreeMap<&RuleId, &Rule> = older.rules().iter().map(|r| (&r.id, r)).collect();
    let new_rules: BTreeMap<&RuleId, &Rule> = newer.rules().iter().map(|r| (&r.id, r)).collect();

    let mut added_rules = Vec::new();
    let mut removed_rules = Vec::new();
    let mut weight_deltas = Vec::new();
    for (id, rule) in &new_rules {
        match old_rules.get(id) {
            None => added_rules.push((*rule).clone()),
            // Same literal set in a new body order: the id is unchanged but
            // the printed rule is not, so it travels as remove + add.
            Some(old) if !same_literal_order(old, rule) => {
                removed_rules.push((*id).clone());
                added_rules.push((*rule).clone());
            }
            Some(old) => {
                for b in &rule.body {
                    let before = old.body_weight(&b.literal).expect("same id implies same body");
                    if before != b.weight {
                        weight_deltas.push(WeightDelta {
                            rule_id: (*id).clone(),
                            literal: b.literal.clone(),
                            old: before,
                            new: b.weight,
                        });
                    }
                }
            }
        }
    }
    removed_rules.extend(old_rules.keys().filter(|id| !new_rules.contains_key(*id)).map(|id| (*id).clone()));
    removed_rules.sort();

    let terms: BTreeSet<&str> = older.lexicon().iter().chain(newer.lexicon().iter()).map(|(t, _)| t).collect();
    let lexicon_deltas = terms
        .into_iter()
        .filter_map(|t| {
            let (old, new) = (older.lexicon().get(t), newer.lexicon().get(t));
            (old != new).then(|| LexiconDelta { term: t.to_string(), old, new })
        })
        .collect();

    let old_priors: BTreeMap<PriorKey, &PriorEntry> = older.priors().iter().map(|p| (p.key(), p)).collect();
    let new_priors: BTreeMap<PriorKey, &PriorEntry> = newer.priors().iter().map(|p| (p.key(), p)).collect();
    let keys: BTreeSet<&PriorKey> = old_priors.keys().chain(new_priors.keys()).collect();
    let prior_deltas = keys
        .into_iter()
        .filter_map(|k| {
            let (old, new) = (old_priors.get(k).copied(), new_priors.get(k).copied());
            (old != new).then(|| PriorDelta { key: k.clone(), old: old.cloned(), new: new.cloned() })
        })
        .collect();

    Ok(SnapshotDiff {
        from_version: older.version(),
        to_version: newer.version(),
        from_hash: older.content_hash().to_string(),
        to_hash: newer.content_hash().to_string(),
        added_rules,
        removed_rules,
        weight_deltas,
        lexicon_deltas,
        prior_deltas,
    })
}

fn same_literal_order(a: &Rule, b: &Rule) -> bool {
    a.body.len() == b.body.len() && a.body.iter().zip(&b.body).all(|(x, y)| x.literal == y.literal)
}

/// Replays `diff` on `base`. The result carries `diff.to_version`; its hash
/// is checked against `diff.to_hash`.
pub fn apply_diff(base: &KnowledgeSnapshot, diff: &SnapshotDiff, timestamp: u64) -> Result<KnowledgeSnapshot, KbError> {
    if base.content_hash() != diff.from_hash {
        return Err(KbError::DiffBase { expected: diff.from_hash.clone(), found: base.content_hash().to_string() });
    }
    let mut draft = base.draft();
    for id in &diff.removed_rules {
        let before = draft.rules.len();
        draft.rules.retain(|r| &r.id != id);
        if draft.rules.len() == before {
            return Err(KbError::UnknownRuleId(id.clone()));
        }
    }
    for d in &diff.weight_deltas {
        let rule =
            draft.rules.iter_mut().find(|r| r.id == d.rule_id).ok_or_else(|| KbError::UnknownRuleId(d.rule_id.clone()))?;
        let body = rule
            .body
            .iter_mut()
            .find(|b| b.literal == d.literal)
            .ok_or_else(|| super::violation(format!("rule {} has no body literal {}", d.rule_id, d.literal)))?;
        body.weight = d.new;
    }
    draft.rules.extend(diff.added_rules.iter().cloned());
    for d in &diff.lexicon_deltas {
        match d.new {
            Some(w) => draft.lexicon.insert(&d.term, w),
            None => {
                draft.lexicon.remove(&d.term);
            }
        }
    }
    for d in &diff.prior_deltas {
        draft.priors.retain(|p| p.key() != d.key);
        if let Some(p) = &d.new {
            draft.priors.push(p.clone());
        }
    }
    let out = draft.build(diff.to_version, timestamp)?;
    if out.content_hash() != diff.to_hash {
        return Err(KbError::Corrupt(format!(
            "diff v{}→v{} produced content {}, expected {}",
            diff.from_version,
            diff.to_version,
            out.content_hash(),
            diff.to_hash
        )));
    }
    Ok(out)
}
