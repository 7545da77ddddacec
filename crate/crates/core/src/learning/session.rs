use super::pa::{catalog, score_disease};
use super::{
    apply_event, induce_rules, pa_update_rules, structure_update_rules, update_counts, EdgeStats, LabeledCase,
    LearnerConfig, LearningError, TemplateScorer, UpdateEvent,
};
use crate::dsl::Rule;
use crate::kb::{edge_view, KbError, KnowledgeSnapshot, SnapshotDraft};
use serde::{Deserialize, Serialize};

/// Cases where some true disease scores no higher than some false one.
pub fn ranking_violations(rules: &[Rule], cases: &[LabeledCase]) -> usize {
    let edges = edge_view(rules);
    cases
        .iter()
        .filter(|case| {
            let x = case.symptom_set();
            let truth = case.label_set();
            let diseases = catalog(rules, case);
            let worst_true = truth.iter().map(|d| score_disease(d, &x, &edges)).fold(f64::INFINITY, f64::min);
            diseases.iter().filter(|d| !truth.contains(*d)).any(|d| score_disease(d, &x, &edges) >= worst_true)
        })
        .count()
}

pub fn replay_rules(rules: &mut Vec<Rule>, events: &[UpdateEvent], version: u64) -> Result<(), LearningError> {
    events.iter().try_for_each(|e| apply_event(rules, e, version))
}

/// Re-applies a log to its starting snapshot.
pub fn replay(start: &KnowledgeSnapshot, events: &[UpdateEvent], version: u64) -> Result<KnowledgeSnapshot, KbError> {
    let mut draft = start.draft();
    replay_rules(&mut draft.rules, events, version)?;
    draft.build(version, crate::kb::now_millis())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassSummary {
    pub pass: usize,
    pub events: usize,
    /// Violations over the whole stream after the pass.
    pub violations: usize,
}

/// Sequential online learner over a working copy of a snapshot.
#[derive(Debug, Clone)]
pub struct Learner {
    draft: SnapshotDraft,
    stats: EdgeStats,
    config: LearnerConfig,
    log: Vec<UpdateEvent>,
    version: u64,
}

impl Learner {
    /// Changes are stamped with the version after `start`.
    pub fn new(start: &KnowledgeSnapshot, config: LearnerConfig) -> Result<Self, LearningError> {
        config.validate()?;
        Ok(Self { draft: start.draft(), stats: EdgeStats::new(), config, log: Vec::new(), version: start.version() + 1 })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.draft.rules
    }

    pub fn stats(&self) -> &EdgeStats {
        &self.stats
    }

    pub fn log(&self) -> &[UpdateEvent] {
        &self.log
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    /// Counts the case, then applies one PA step.
    pub fn observe(&mut self, case: &LabeledCase) -> Result<Vec<UpdateEvent>, LearningError> {
        case.check()?;
        update_counts(&mut self.stats, case, &catalog(&self.draft.rules, case));
        let events = pa_update_rules(&mut self.draft.rules, case, &self.config, self.version)?;
        self.log.extend(events.iter().cloned());
        Ok(events)
    }

    /// Structural add/prune from the accumulated counts.
    pub fn end_pass(&mut self) -> Vec<UpdateEvent> {
        let events = structure_update_rules(&mut self.draft.rules, &self.stats, &self.config, self.version);
        self.log.extend(events.iter().cloned());
        events
    }

    pub fn induce(&mut self, batch: &[LabeledCase], scorer: &dyn TemplateScorer) -> Vec<UpdateEvent> {
        let events = induce_rules(batch, &self.draft.rules, scorer, &self.config, self.version);
        for e in &events {
            apply_event(&mut self.draft.rules, e, self.version).expect("induced rule applies");
        }
        self.log.extend(events.iter().cloned());
        events
    }

    /// Runs passes until the stream has no ranking violations or
    /// `max_passes` is reached.
    pub fn train(&mut self, cases: &[LabeledCase], max_passes: usize) -> Result<Vec<PassSummary>, LearningError> {
        let mut out = Vec::new();
        for pass in 1..=max_passes {
            let mut events = 0;
            for case in cases {
                events += self.observe(case)?.len();
            }
            events += self.end_pass().len();
            let violations = ranking_violations(&self.draft.rules, cases);
            out.push(PassSummary { pass, events, violations });
            if violations == 0 {
                break;
            }
        }
        Ok(out)
    }

    pub fn snapshot(&self) -> Result<KnowledgeSnapshot, KbError> {
        self.draft.clone().build(self.version, crate::kb::now_millis())
    }
}
