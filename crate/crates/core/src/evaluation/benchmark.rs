use super::{topk_metrics, EvalError, MetricsReport, DEFAULT_KS};
use crate::kb::{edge_view, KnowledgeSnapshot};
use crate::ranking::{CaseIndex, CaseRecord, Engine, EngineConfig, Overrides};
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    /// Crisp facts, no priors, no retrieval.
    SymbolicOnly,
    /// Crisp facts with prior fusion.
    SymProb,
    /// Fuzzy facts, no priors, no retrieval.
    SymFuzzy,
    /// Fuzzy facts, retrieval blend and priors.
    FullHybrid,
    /// The disease with the strongest edge to the first symptom.
    SimpleBaseline,
}

impl AblationMode {
    pub const ALL: [AblationMode; 5] = [
        AblationMode::SimpleBaseline,
        AblationMode::SymbolicOnly,
        AblationMode::SymProb,
        AblationMode::SymFuzzy,
        AblationMode::FullHybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationMode::SymbolicOnly => "symbolic_only",
            AblationMode::SymProb => "sym_prob",
            AblationMode::SymFuzzy => "sym_fuzzy",
            AblationMode::FullHybrid => "full_hybrid",
            AblationMode::SimpleBaseline => "simple_baseline",
        }
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Self::ALL.into_iter().find(|m| m.name() == key).ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

/// Engine settings for a mode, starting from `base`.
pub fn mode_config(mode: AblationMode, base: &EngineConfig) -> EngineConfig {
    let (crisp, use_priors, use_retrieval) = match mode {
        AblationMode::SymbolicOnly | AblationMode::SimpleBaseline => (true, false, false),
        AblationMode::SymProb => (true, true, false),
        AblationMode::SymFuzzy => (false, false, false),
        AblationMode::FullHybrid => (false, true, true),
    };
    EngineConfig { crisp, use_priors, use_retrieval, ..base.clone() }
}

/// Deterministic verifier counts over note-based cases. This is a proxy
/// for extraction quality, not a judged error rate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifierStats {
    pub notes: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rejection_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseTrace {
    pub id: String,
    pub labels: Vec<Symbol>,
    pub ranked: Vec<Symbol>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub mode: AblationMode,
    pub metrics: MetricsReport,
    pub traces: Vec<CaseTrace>,
    pub verifier: VerifierStats,
}

/// Strongest-edge disease of the first symptom fact, ties by name.
pub fn simple_baseline(engine: &Engine, case: &CaseRecord, snapshot: &KnowledgeSnapshot) -> Result<Vec<Symbol>, EvalError> {
    let (facts, _) = engine.case_facts(case, snapshot)?;
    let Some(first) = facts.iter().find_map(|f| f.literal.symptom_name()) else { return Ok(Vec::new()) };
    let best = edge_view(snapshot.rules())
        .into_iter()
        .filter(|((_, s), w)| s == first && *w > 0.0)
        .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0 .0.cmp(&a.0 .0)))
        .map(|((d, _), _)| d);
    Ok(best.into_iter().collect())
}

struct Outcome {
    ranked: Vec<Symbol>,
    accepted: usize,
    rejected: usize,
    note: bool,
}

fn evaluate_case(
    engine: &Engine,
    mode: AblationMode,
    case: &CaseRecord,
    snapshot: &KnowledgeSnapshot,
    index: Option<&CaseIndex>,
) -> Result<Outcome, EvalError> {
    if mode == AblationMode::SimpleBaseline {
        let ranked = simple_baseline(engine, case, snapshot)?;
        return Ok(Outcome { ranked, accepted: 0, rejected: 0, note: false });
    }
    let d = engine.diagnose(case, snapshot, index, &Overrides::default())?;
    let (accepted, rejected) = d.extraction.as_ref().map_or((0, 0), |r| (r.accepted.len(), r.rejected.len()));
    Ok(Outcome {
        ranked: d.candidates.into_iter().map(|c| c.disease).collect(),
        accepted,
        rejected,
        note: case.text.is_some(),
    })
}

/// Runs every case under `mode` and scores the rankings at k = 1, 3, 5.
/// Cases are split across threads; results keep dataset order.
pub fn run_benchmark(
    snapshot: &KnowledgeSnapshot,
    cases: &[CaseRecord],
    index: Option<&CaseIndex>,
    mode: AblationMode,
    base: &Engine,
) -> Result<BenchmarkReport, EvalError> {
    if cases.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let engine = Engine { config: mode_config(mode, &base.config), ..base.clone() };
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cases.len());
    let chunk = cases.len().div_ceil(threads);
    let outcomes: Vec<Outcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = cases
            .chunks(chunk)
            .map(|part| {
                let engine = &engine;
                scope.spawn(move || {
                    part.iter().map(|c| evaluate_case(engine, mode, c, snapshot, index)).collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("benchmark worker")).collect::<Result<Vec<Vec<_>>, _>>()
    })?
    .into_iter()
    .flatten()
    .collect();

    let predictions: Vec<Vec<Symbol>> = outcomes.iter().map(|o| o.ranked.clone()).collect();
    let truths: Vec<Vec<Symbol>> = cases.iter().map(|c| c.labels.clone()).collect();
    let metrics = topk_metrics(&predictions, &truths, &DEFAULT_KS)?;
    let notes = outcomes.iter().filter(|o| o.note).count();
    let accepted: usize = outcomes.iter().map(|o| o.accepted).sum();
    let rejected: usize = outcomes.iter().map(|o| o.rejected).sum();
    let total = accepted + rejected;
    let verifier = VerifierStats {
        notes,
        accepted,
        rejected,
        rejection_rate: (total > 0).then(|| rejected as f64 / total as f64),
    };
    let traces = cases
        .iter()
        .zip(outcomes)
        .map(|(c, o)| CaseTrace { id: c.id.clone(), labels: c.labels.clone(), ranked: o.ranked })
        .collect();
    Ok(BenchmarkReport { mode, metrics, traces, verifier })
}
