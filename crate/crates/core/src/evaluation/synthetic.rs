//! Seeded ablation benchmark generated from a hidden rule set.
//!
//! Diseases come in pairs sharing a two-symptom signature: a common variant
//! (prior 0.08, edges 0.9) and a rare one (prior 0.02, edges 0.95), with
//! truth drawn 4:1 in favour of the common variant. Half of the cases also
//! carry another pair's signature at a mild hedge (0.3), listed first.

use crate::dsl::{BodyLiteral, Lexicon, Literal, PriorEntry, Provenance, Rule, Term};
use crate::kb::KnowledgeSnapshot;
use crate::ranking::{CaseIndex, CaseRecord, Embedder, RankingError, WeightedSymptom};
use crate::symbol::Symbol;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 2024;
pub const DEFAULT_CASES: usize = 200;
const GROUPS: usize = 5;
const NOISE_HEDGE: f64 = 0.3;
const TRUE_HEDGES: [f64; 3] = [1.0, 0.9, 0.7];

#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub snapshot: KnowledgeSnapshot,
    pub index: CaseIndex,
    pub cases: Vec<CaseRecord>,
}

fn sym(s: String) -> Symbol {
    Symbol::new(&s).expect("valid atom")
}

fn signature(g: usize) -> [Symbol; 2] {
    [sym(format!("sign_{g}_a")), sym(format!("sign_{g}_b"))]
}

fn variant(g: usize, rare: bool) -> Symbol {
    sym(format!("cond_{g}_{}", if rare { "rare" } else { "common" }))
}

fn hidden_snapshot() -> KnowledgeSnapshot {
    let mut rules = Vec::new();
    let mut priors = Vec::new();
    for g in 0..GROUPS {
        for (rare, edge, prior) in [(false, 0.9, 0.08), (true, 0.95, 0.02)] {
            let body = signature(g).iter().map(|s| BodyLiteral::new(Literal::symptom(s), edge)).collect();
            rules.push(Rule::new(Literal::diagnosis(&variant(g, rare)), body, Provenance::Curated, 0).expect("valid rule"));
            priors.push(PriorEntry {
                disease: variant(g, rare),
                age_band: Term::Wildcard,
                sex: Term::Wildcard,
                region: Term::Wildcard,
                prevalence: prior,
            });
        }
    }
    KnowledgeSnapshot::new(0, 0, rules, Lexicon::default_hedges(), priors).expect("consistent benchmark kb")
}

fn draw_case(rng: &mut ChaCha8Rng, id: String) -> (CaseRecord, Vec<Symbol>) {
    let g = rng.gen_range(0..GROUPS);
    let label = variant(g, rng.gen_bool(0.2));
    let mut symptoms = Vec::new();
    if rng.gen_bool(0.5) {
        let other = (g + rng.gen_range(1..GROUPS)) % GROUPS;
        for s in signature(other) {
            symptoms.push(WeightedSymptom { name: s, weight: NOISE_HEDGE });
        }
    }
    let moderate = rng.gen_range(0..2);
    for (i, s) in signature(g).into_iter().enumerate() {
        let w = if i == moderate { TRUE_HEDGES[rng.gen_range(0..TRUE_HEDGES.len())] } else { 1.0 };
        symptoms.push(WeightedSymptom { name: s, weight: w });
    }
    let record = CaseRecord { id, symptoms: Some(symptoms), labels: vec![label], ..Default::default() };
    (record, signature(g).to_vec())
}

/// Builds the benchmark: `n_cases` evaluation cases plus an index of
/// `n_cases` separately drawn reference cases that store only their
/// signature symptoms.
pub fn synthetic_benchmark(seed: u64, n_cases: usize, embedder: &dyn Embedder) -> Result<SyntheticBenchmark, RankingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut index = CaseIndex::new(embedder.dim());
    for i in 0..n_cases {
        let (case, confirmed) = draw_case(&mut rng, format!("ref{i:04}"));
        index.insert_case(&case.id, &confirmed, &case.labels, embedder)?;
    }
    let cases = (0..n_cases).map(|i| draw_case(&mut rng, format!("eval{i:04}")).0).collect();
    Ok(SyntheticBenchmark { snapshot: hidden_snapshot(), index, cases })
}
