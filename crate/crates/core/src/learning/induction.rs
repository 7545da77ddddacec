use super::{LabeledCase, LearnerConfig, UpdateEvent};
use crate::dsl::{BodyLiteral, Literal, Provenance, Rule, RuleId};
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

const MAX_TEMPLATE_BODY: usize = 3;

/// A candidate rule shape: `diagnosis(disease) :- symptom(s)...`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Template {
    pub disease: Symbol,
    pub body: Vec<Symbol>,
}

impl Template {
    fn matches(&self, case: &LabeledCase) -> bool {
        self.body.iter().all(|s| case.symptoms.contains(s))
    }
}

/// Scores a template against a batch, one raw (pre-sigmoid) output per case.
pub trait TemplateScorer {
    fn score(&self, batch: &[LabeledCase], template: &Template) -> Vec<f64>;
}

/// `ln((c⁺+1)/(c⁻+1))` where `c⁺` counts batch cases with the disease that
/// express the whole body and `c⁻` those without the disease. The same
/// value is returned for every case.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogOddsScorer;

impl TemplateScorer for LogOddsScorer {
    fn score(&self, batch: &[LabeledCase], template: &Template) -> Vec<f64> {
        let (mut pos, mut neg) = (0u64, 0u64);
        for case in batch.iter().filter(|c| template.matches(c)) {
            if case.labels.contains(&template.disease) {
                pos += 1;
            } else {
                neg += 1;
            }
        }
        let value = ((pos as f64 + 1.0) / (neg as f64 + 1.0)).ln();
        vec![value; batch.len()]
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean of `σ(output)` over the batch; 0 for an empty batch.
pub fn template_score(batch: &[LabeledCase], template: &Template, scorer: &dyn TemplateScorer) -> f64 {
    let outputs = scorer.score(batch, template);
    if outputs.is_empty() {
        return 0.0;
    }
    outputs.iter().map(|&o| sigmoid(o)).sum::<f64>() / outputs.len() as f64
}

fn subsets(items: &[Symbol], max: usize, out: &mut Vec<Vec<Symbol>>) {
    fn go(items: &[Symbol], start: usize, max: usize, cur: &mut Vec<Symbol>, out: &mut Vec<Vec<Symbol>>) {
        for i in start..items.len() {
            cur.push(items[i].clone());
            out.push(cur.clone());
            if cur.len() < max {
                go(items, i + 1, max, cur, out);
            }
            cur.pop();
        }
    }
    go(items, 0, max, &mut Vec::new(), out);
}

/// Symptom subsets of size ≤ 3 that co-occur with a disease in at least
/// `min_support` cases, in sorted order.
pub fn candidate_templates(batch: &[LabeledCase], min_support: u64) -> Vec<Template> {
    let mut support: BTreeMap<Template, u64> = BTreeMap::new();
    for case in batch {
        let mut sets = Vec::new();
        subsets(&case.symptom_set(), MAX_TEMPLATE_BODY, &mut sets);
        for d in case.label_set() {
            for body in &sets {
                *support.entry(Template { disease: d.clone(), body: body.clone() }).or_default() += 1;
            }
        }
    }
    support.into_iter().filter(|(_, n)| *n >= min_support).map(|(t, _)| t).collect()
}

/// Accepts templates whose score exceeds `τ_induct` and whose rule is not
/// already present. Body weights are `score^(1/n)`, so the new rule's
/// product activation on fully present symptoms equals its score.
pub fn induce_rules(
    batch: &[LabeledCase],
    existing: &[Rule],
    scorer: &dyn TemplateScorer,
    config: &LearnerConfig,
    version: u64,
) -> Vec<UpdateEvent> {
    let mut seen: BTreeSet<RuleId> = existing.iter().map(|r| r.id.clone()).collect();
    let mut events = Vec::new();
    for template in candidate_templates(batch, config.m_pos) {
        let score = template_score(batch, &template, scorer);
        if score <= config.tau_induct {
            continue;
        }
        let w = score.powf(1.0 / template.body.len() as f64);
        let body = template.body.iter().map(|s| BodyLiteral::new(Literal::symptom(s), w)).collect();
        let Ok(rule) = Rule::new(Literal::diagnosis(&template.disease), body, Provenance::Induced, version) else {
            continue;
        };
        if seen.insert(rule.id.clone()) {
            events.push(UpdateEvent::RuleInduced { rule, score });
        }
    }
    events
}
