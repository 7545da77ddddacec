use super::{KbError, KnowledgeSnapshot, SnapshotStore};
use crate::ranking::{CaseIndex, CaseRecord, Diagnosis, Engine, Overrides};
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// How one disease moved between two snapshots. Ranks are 1-based; a
/// disease absent from a ranking has no rank and counts as 0 in `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankChange {
    pub disease: Symbol,
    pub posterior_t1: Option<f64>,
    pub posterior_t2: Option<f64>,
    pub activation_t1: Option<f64>,
    pub activation_t2: Option<f64>,
    /// Posterior change when priors are fused, activation change otherwise.
    pub delta: f64,
    pub rank_t1: Option<usize>,
    pub rank_t2: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub result_t1: Diagnosis,
    pub result_t2: Diagnosis,
    pub changes: Vec<RankChange>,
}

fn lookup(d: &Diagnosis, disease: &Symbol) -> (Option<f64>, Option<f64>, Option<usize>) {
    d.candidates
        .iter()
        .enumerate()
        .find(|(_, c)| &c.disease == disease)
        .map_or((None, None, None), |(i, c)| (c.posterior, Some(c.activation), Some(i + 1)))
}

/// Runs the same case and engine under two snapshots and compares the
/// rankings disease by disease, in name order.
pub fn counterfactual_audit(
    case: &CaseRecord,
    s1: &KnowledgeSnapshot,
    s2: &KnowledgeSnapshot,
    index: Option<&CaseIndex>,
    engine: &Engine,
) -> Result<AuditReport, KbError> {
    let result_t1 = engine.diagnose(case, s1, index, &Overrides::default())?;
    let result_t2 = engine.diagnose(case, s2, index, &Overrides::default())?;
    let diseases: BTreeSet<Symbol> =
        result_t1.candidates.iter().chain(&result_t2.candidates).map(|c| c.disease.clone()).collect();
    let changes = diseases
        .into_iter()
        .map(|disease| {
            let (p1, a1, r1) = lookup(&result_t1, &disease);
            let (p2, a2, r2) = lookup(&result_t2, &disease);
            let value = |p: Option<f64>, a: Option<f64>| p.or(a).unwrap_or(0.0);
            RankChange {
                delta: value(p2, a2) - value(p1, a1),
                disease,
                posterior_t1: p1,
                posterior_t2: p2,
                activation_t1: a1,
                activation_t2: a2,
                rank_t1: r1,
                rank_t2: r2,
            }
        })
        .collect();
    Ok(AuditReport { result_t1, result_t2, changes })
}

impl SnapshotStore {
    /// Audit between two stored versions.
    pub fn audit(
        &self,
        case: &CaseRecord,
        t1: u64,
        t2: u64,
        index: Option<&CaseIndex>,
        engine: &Engine,
    ) -> Result<AuditReport, KbError> {
        let s1 = self.get(t1)?;
        let s2 = self.get(t2)?;
        counterfactual_audit(case, &s1, &s2, index, engine)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::Lexicon;

    #[test]
    fn same_snapshot_has_zero_deltas() {
        let s = KnowledgeSnapshot::from_kb_text(
            "diagnosis(flu) :- symptom(fever)@0.9.\ndiagnosis(cold) :- symptom(fever)@0.6.",
            Lexicon::default(),
            1,
        )
        .unwrap();
        let case = CaseRecord::from_symptoms("c", &[("fever", 1.0)]);
        let r = counterfactual_audit(&case, &s, &s, None, &Engine::default()).unwrap();
        assert_eq!(r.changes.len(), 2);
        assert!(r.changes.iter().all(|c| c.delta == 0.0 && c.rank_t1 == c.rank_t2));
    }
}
