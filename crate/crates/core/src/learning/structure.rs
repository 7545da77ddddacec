use super::{add_to_support, LabeledCase, LearnerConfig, UpdateEvent};
use crate::dsl::Rule;
use crate::kb::{edge_view, KbError, KnowledgeSnapshot};
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Co-occurrence counts per (disease, symptom): `c⁺` cases with both,
/// `c⁻` cases with the symptom but without the disease.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeStats {
    counts: BTreeMap<(Symbol, Symbol), (u64, u64)>,
}

impl EdgeStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn c_plus(&self, d: &Symbol, s: &Symbol) -> u64 {
        self.counts.get(&(d.clone(), s.clone())).map_or(0, |c| c.0)
    }

    pub fn c_minus(&self, d: &Symbol, s: &Symbol) -> u64 {
        self.counts.get(&(d.clone(), s.clone())).map_or(0, |c| c.1)
    }

    pub fn set(&mut self, d: &Symbol, s: &Symbol, c_plus: u64, c_minus: u64) {
        self.counts.insert((d.clone(), s.clone()), (c_plus, c_minus));
    }

    pub fn pairs(&self) -> impl Iterator<Item = &(Symbol, Symbol)> {
        self.counts.keys()
    }
}

/// Increments `c⁺` for every true disease and `c⁻` for every other catalog
/// disease, once per distinct symptom of the case.
pub fn update_counts(stats: &mut EdgeStats, case: &LabeledCase, catalog: &BTreeSet<Symbol>) {
    let truth = case.label_set();
    for s in case.symptom_set() {
        for d in &truth {
            stats.counts.entry((d.clone(), s.clone())).or_default().0 += 1;
        }
        for d in catalog.iter().filter(|d| !truth.contains(*d)) {
            stats.counts.entry((d.clone(), s.clone())).or_default().1 += 1;
        }
    }
}

/// Smoothed specificity `(c⁺+1)/(c⁻+1)`.
pub fn specificity(stats: &EdgeStats, d: &Symbol, s: &Symbol) -> f64 {
    (stats.c_plus(d, s) as f64 + 1.0) / (stats.c_minus(d, s) as f64 + 1.0)
}

/// Adds well-supported specific edges at `w_init` and prunes zero-weight
/// unspecific ones, visiting pairs in (disease, symptom) order.
pub fn structure_update_rules(rules: &mut Vec<Rule>, stats: &EdgeStats, config: &LearnerConfig, version: u64) -> Vec<UpdateEvent> {
    let mut events = Vec::new();
    let pairs: BTreeSet<(Symbol, Symbol)> = stats.pairs().cloned().chain(edge_view(rules).into_keys()).collect();
    for (d, s) in pairs {
        let ratio = specificity(stats, &d, &s);
        let edge = edge_view(rules).get(&(d.clone(), s.clone())).copied();
        match edge {
            None if stats.c_plus(&d, &s) >= config.m_pos && ratio >= config.rho_add => {
                if add_to_support(rules, &d, &s, config.w_init, version).is_some() {
                    events.push(UpdateEvent::EdgeAdded { disease: d, symptom: s, ratio, weight: config.w_init });
                }
            }
            Some(w) if w == 0.0 && ratio < config.rho_prune => {
                let (changed, removed) = super::prune_edge(rules, &d, &s);
                if changed {
                    events.push(UpdateEvent::EdgePruned { disease: d, symptom: s, ratio });
                    events.extend(removed.into_iter().map(|rule_id| UpdateEvent::RuleRemoved { rule_id }));
                }
            }
            _ => {}
        }
    }
    events
}

pub fn structure_update(
    snapshot: &KnowledgeSnapshot,
    stats: &EdgeStats,
    config: &LearnerConfig,
    version: u64,
) -> Result<(KnowledgeSnapshot, Vec<UpdateEvent>), KbError> {
    let mut draft = snapshot.draft();
    let events = structure_update_rules(&mut draft.rules, stats, config, version);
    if events.is_empty() {
        return Ok((snapshot.clone(), events));
    }
    Ok((draft.build(version, crate::kb::now_millis())?, events))
}
