//! Seeded synthetic case streams with a known separating weight matrix.

use super::pa::score_disease;
use super::LabeledCase;
use crate::dsl::{BodyLiteral, Lexicon, Literal, Provenance, Rule};
use crate::kb::KnowledgeSnapshot;
use crate::symbol::Symbol;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct SyntheticStream {
    /// Starting knowledge base with random, misleading rules.
    pub start: KnowledgeSnapshot,
    pub cases: Vec<LabeledCase>,
    /// Hidden edge weights that separate every case.
    pub hidden: BTreeMap<(Symbol, Symbol), f64>,
}

impl SyntheticStream {
    /// Smallest gap between the true disease and the best false disease
    /// under the hidden weights.
    pub fn hidden_margin(&self) -> f64 {
        let diseases: Vec<Symbol> = self.hidden.keys().map(|(d, _)| d.clone()).collect();
        self.cases
            .iter()
            .map(|c| {
                let x = c.symptom_set();
                let truth = score_disease(&c.labels[0], &x, &self.hidden);
                let best_false = diseases
                    .iter()
                    .filter(|d| !c.labels.contains(d))
                    .map(|d| score_disease(d, &x, &self.hidden))
                    .fold(0.0, f64::max);
                truth - best_false
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn atom(prefix: &str, i: usize) -> Symbol {
    Symbol::new(&format!("{prefix}{i:02}")).expect("valid atom")
}

/// Disease `i` owns symptoms `2i` and `2i+1` with hidden weight 0.5 each;
/// the remaining symptoms are shared noise. Every case shows both signature
/// symptoms plus one noise symptom, giving a hidden margin of 1.0.
///
/// Panics if `n_symptoms < 2 * n_diseases + 1`.
pub fn separable_stream(seed: u64, n_diseases: usize, n_symptoms: usize, cases_per_disease: usize) -> SyntheticStream {
    assert!(n_symptoms > 2 * n_diseases, "need at least one noise symptom");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<usize> = (2 * n_diseases..n_symptoms).collect();

    let mut hidden = BTreeMap::new();
    for d in 0..n_diseases {
        for s in [2 * d, 2 * d + 1] {
            hidden.insert((atom("d", d), atom("s", s)), 0.5);
        }
    }

    let mut rules = Vec::new();
    for d in 0..n_diseases {
        let body = sample(&mut rng, n_symptoms, 3)
            .into_iter()
            .map(|s| BodyLiteral::new(Literal::symptom(&atom("s", s)), (rng.gen_range(10..=90) as f64) / 100.0))
            .collect();
        rules.push(Rule::new(Literal::diagnosis(&atom("d", d)), body, Provenance::Curated, 0).expect("valid rule"));
    }
    let start = KnowledgeSnapshot::new(0, 0, rules, Lexicon::default(), Vec::new()).expect("consistent start");

    let mut cases = Vec::new();
    for round in 0..cases_per_disease {
        for d in 0..n_diseases {
            let n = noise[rng.gen_range(0..noise.len())];
            cases.push(LabeledCase {
                id: format!("syn{round:03}_{d:02}"),
                symptoms: vec![atom("s", 2 * d), atom("s", 2 * d + 1), atom("s", n)],
                labels: vec![atom("d", d)],
            });
        }
    }
    SyntheticStream { start, cases, hidden }
}
