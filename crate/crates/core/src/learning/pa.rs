use super::{add_to_support, LabeledCase, LearnerConfig, LearningError, TouchedEdge, UpdateEvent};
use crate::dsl::{Literal, Rule};
use crate::kb::{edge_view, KbError, KnowledgeSnapshot};
use crate::symbol::Symbol;
use std::collections::{BTreeMap, BTreeSet};

/// `score(d|x) = Σ_{s∈x} w_{d,s}` over the edge view; missing edges add 0.
pub fn score_disease(disease: &Symbol, x: &[Symbol], edges: &BTreeMap<(Symbol, Symbol), f64>) -> f64 {
    x.iter().map(|s| edges.get(&(disease.clone(), s.clone())).copied().unwrap_or(0.0)).sum()
}

/// The `k` highest-scoring diseases, ties by name.
pub fn top_k(scores: &BTreeMap<Symbol, f64>, k: usize) -> Vec<Symbol> {
    let mut ranked: Vec<(&Symbol, f64)> = scores.iter().map(|(d, s)| (d, *s)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().take(k).map(|(d, _)| d.clone()).collect()
}

pub(crate) fn catalog(rules: &[Rule], case: &LabeledCase) -> BTreeSet<Symbol> {
    rules.iter().map(|r| r.disease().clone()).chain(case.labels.iter().cloned()).collect()
}

/// One passive-aggressive step on the single most violating
/// (true, false) pair among the top-K. Returns the logged events, which
/// are empty when every margin is already met.
pub fn pa_update_rules(
    rules: &mut Vec<Rule>,
    case: &LabeledCase,
    config: &LearnerConfig,
    version: u64,
) -> Result<Vec<UpdateEvent>, LearningError> {
    case.check()?;
    let x = case.symptom_set();
    let truth = case.label_set();
    let edges = edge_view(rules);
    let scores: BTreeMap<Symbol, f64> =
        catalog(rules, case).into_iter().map(|d| (d.clone(), score_disease(&d, &x, &edges))).collect();
    let negatives: Vec<Symbol> = top_k(&scores, config.top_k).into_iter().filter(|d| !truth.contains(d)).collect();

    let mut best: Option<(f64, &Symbol, &Symbol)> = None;
    for dp in &truth {
        for dm in &negatives {
            let loss = (config.margin - (scores[dp] - scores[dm])).max(0.0);
            if loss > 0.0 && best.is_none_or(|(l, _, _)| loss > l) {
                best = Some((loss, dp, dm));
            }
        }
    }
    let Some((loss, d_plus, d_minus)) = best else { return Ok(Vec::new()) };
    let (d_plus, d_minus) = (d_plus.clone(), d_minus.clone());
    let tau = config.cap.min(loss / (2.0 * x.len() as f64));

    let mut touched = Vec::new();
    let mut flagged = Vec::new();
    let mut missing = Vec::new();
    for s in &x {
        let lit = Literal::symptom(s);
        let mut present = false;
        for r in rules.iter_mut().filter(|r| r.disease() == &d_plus) {
            for b in r.body.iter_mut().filter(|b| b.literal == lit) {
                present = true;
                let old = b.weight;
                b.weight = (old + tau).clamp(0.0, 1.0);
                touched.push(TouchedEdge { disease: d_plus.clone(), symptom: s.clone(), rule_id: Some(r.id.clone()), old, new: b.weight });
            }
        }
        if !present {
            missing.push(s);
        }
        for r in rules.iter_mut().filter(|r| r.disease() == &d_minus) {
            for b in r.body.iter_mut().filter(|b| b.literal == lit) {
                let old = b.weight;
                b.weight = (old - tau).clamp(0.0, 1.0);
                touched.push(TouchedEdge { disease: d_minus.clone(), symptom: s.clone(), rule_id: Some(r.id.clone()), old, new: b.weight });
                if b.weight == 0.0 && old > 0.0 {
                    flagged.push(s.clone());
                }
            }
        }
    }
    // Additions rehash the support rule, so they come after every
    // id-addressed edit.
    let w = tau.min(1.0);
    for s in missing {
        if add_to_support(rules, &d_plus, s, w, version).is_some() {
            touched.push(TouchedEdge { disease: d_plus.clone(), symptom: s.clone(), rule_id: None, old: 0.0, new: w });
        }
    }
    let mut events = vec![UpdateEvent::PaUpdate { case_id: case.id.clone(), d_plus, d_minus: d_minus.clone(), loss, tau, touched }];
    flagged.dedup();
    events.extend(flagged.into_iter().map(|s| UpdateEvent::ZeroFlagged { disease: d_minus.clone(), symptom: s }));
    Ok(events)
}

/// Snapshot-level wrapper: the updated content is stamped with `version`.
pub fn pa_update(
    snapshot: &KnowledgeSnapshot,
    case: &LabeledCase,
    config: &LearnerConfig,
    version: u64,
) -> Result<(KnowledgeSnapshot, Vec<UpdateEvent>), KbError> {
    let mut draft = snapshot.draft();
    let events = pa_update_rules(&mut draft.rules, case, config, version)?;
    if events.is_empty() {
        return Ok((snapshot.clone(), events));
    }
    Ok((draft.build(version, crate::kb::now_millis())?, events))
}
