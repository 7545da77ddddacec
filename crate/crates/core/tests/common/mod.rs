//! Independent oracles, generators and fixture loaders shared by the
//! integration tests and the acceptance harness.

#![allow(dead_code)]

use fuzzdx_core::dsl::{parse_lexicon, BodyLiteral, FuzzyFact, Literal, PriorEntry, Provenance, Rule, Term};
use fuzzdx_core::inference::TNorm;
use fuzzdx_core::kb::{EditKind, EditRequest, KnowledgeSnapshot};
use fuzzdx_core::ranking::{CaseIndex, CaseRecord, Embedder};
use fuzzdx_core::Symbol;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeMap;
use std::path::PathBuf;

pub fn sym(s: &str) -> Symbol {
    Symbol::new(s).unwrap()
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub struct Angina {
    pub snapshot: KnowledgeSnapshot,
    pub index: CaseIndex,
    pub case: CaseRecord,
}

pub fn angina(embedder: &dyn Embedder) -> Angina {
    let lexicon = parse_lexicon(&fixture("angina.lexicon.tsv")).unwrap();
    let snapshot = KnowledgeSnapshot::from_kb_text(&fixture("angina.kb"), lexicon, 1).unwrap();
    let mut index = CaseIndex::new(embedder.dim());
    for line in fixture("angina_cases.jsonl").lines().filter(|l| !l.trim().is_empty()) {
        let c: CaseRecord = serde_json::from_str(line).unwrap();
        let symptoms: Vec<Symbol> = c.symptoms.unwrap().into_iter().map(|s| s.name).collect();
        index.insert_case(&c.id, &symptoms, &c.labels, embedder).unwrap();
    }
    let case: CaseRecord = serde_json::from_str(&fixture("angina_case.json")).unwrap();
    Angina { snapshot, index, case }
}

// ---------------------------------------------------------------------------
// Solver oracle
// ---------------------------------------------------------------------------

fn tnorm(t: TNorm, a: f64, b: f64) -> f64 {
    match t {
        TNorm::Product => a * b,
        TNorm::Minimum => {
            if a < b {
                a
            } else {
                b
            }
        }
        TNorm::Lukasiewicz => {
            let v = a - (1.0 - b);
            if v > 0.0 {
                v
            } else {
                0.0
            }
        }
    }
}

fn term_matches(pattern: &Term, ground: &Term) -> bool {
    pattern.is_wildcard() || pattern == ground
}

fn unifies(pattern: &Literal, fact: &Literal) -> bool {
    pattern.predicate == fact.predicate
        && pattern.args.len() == fact.args.len()
        && pattern.args.iter().zip(&fact.args).all(|(p, g)| term_matches(p, g))
}

/// Truth options for one body literal: every matching fact weight, plus
/// 0 for "no match". Negated literals have the single crisp option.
fn options(b: &BodyLiteral, facts: &[FuzzyFact]) -> Vec<f64> {
    if b.literal.is_negated() {
        let pos = b.literal.positive();
        let blocked = facts.iter().any(|f| unifies(&pos, &f.literal) && f.weight > 0.0);
        return vec![if blocked { 0.0 } else { 1.0 }];
    }
    let mut out = vec![0.0];
    out.extend(facts.iter().filter(|f| unifies(&b.literal, &f.literal)).map(|f| f.weight));
    out
}

/// Maximum rule activation over every assignment of facts to body
/// literals, and the per-leaf best activations.
pub fn brute_rule(rule: &Rule, facts: &[FuzzyFact], t: TNorm) -> (f64, Vec<f64>) {
    let opts: Vec<Vec<f64>> = rule.body.iter().map(|b| options(b, facts)).collect();
    let mut best = 0.0f64;
    let mut choice = vec![0usize; opts.len()];
    loop {
        let mut acc = 1.0;
        for (i, b) in rule.body.iter().enumerate() {
            acc = tnorm(t, acc, tnorm(t, b.weight, opts[i][choice[i]]));
        }
        if acc > best {
            best = acc;
        }
        let mut pos = 0;
        loop {
            if pos == opts.len() {
                let leaves = rule
                    .body
                    .iter()
                    .zip(&opts)
                    .map(|(b, o)| o.iter().map(|&w| tnorm(t, b.weight, w)).fold(0.0, f64::max))
                    .collect();
                return (best, leaves);
            }
            choice[pos] += 1;
            if choice[pos] < opts[pos].len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCandidate {
    pub disease: Symbol,
    pub activation: f64,
    pub confidence: f64,
}

/// Brute-force differential: firing rules grouped by disease, activation
/// is the max, confidence the sum of all root-to-leaf path products taken
/// in (activation desc, rule id) order.
pub fn brute_candidates(rules: &[Rule], facts: &[FuzzyFact], t: TNorm, gamma: f64) -> Vec<OracleCandidate> {
    let mut groups: BTreeMap<Symbol, Vec<(f64, String, Vec<f64>)>> = BTreeMap::new();
    for r in rules {
        let (a, leaves) = brute_rule(r, facts, t);
        if a > gamma {
            let d = r.head.args[0].as_atom().unwrap().clone();
            groups.entry(d).or_default().push((a, r.id.0.clone(), leaves));
        }
    }
    let mut out: Vec<OracleCandidate> = groups
        .into_iter()
        .map(|(disease, mut rs)| {
            rs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
            let mut confidence = 0.0;
            for (_, _, leaves) in &rs {
                for l in leaves {
                    confidence += l;
                }
            }
            OracleCandidate { disease, activation: rs[0].0, confidence }
        })
        .collect();
    out.sort_by(|x, y| y.activation.partial_cmp(&x.activation).unwrap().then(x.disease.cmp(&y.disease)));
    out
}

const PREDICATES: [&str; 3] = ["symptom", "risk", "lab"];
const ATOMS: [&str; 3] = ["a", "b", "c"];
const DISEASES: [&str; 3] = ["d0", "d1", "d2"];

fn random_weight(rng: &mut impl Rng) -> f64 {
    if rng.gen_bool(0.5) {
        *[0.0, 0.25, 0.4, 0.5, 0.8, 0.9, 1.0].choose(rng).unwrap()
    } else {
        rng.gen_range(0.0..=1.0)
    }
}

/// A random KB of at most 6 rules and a fact set of at most 8 facts.
pub fn random_kb(rng: &mut impl Rng) -> (Vec<Rule>, Vec<FuzzyFact>) {
    let mut rules = Vec::new();
    for _ in 0..rng.gen_range(1..=6) {
        let mut body: Vec<BodyLiteral> = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let pred = *PREDICATES.choose(rng).unwrap();
            let arg = if rng.gen_bool(0.2) { Term::Wildcard } else { Term::atom(ATOMS.choose(rng).unwrap()) };
            let mut lit = Literal::new(sym(pred), vec![arg]);
            if rng.gen_bool(0.2) {
                lit = lit.negated();
            }
            if body.iter().all(|b| b.literal.positive() != lit.positive()) {
                body.push(BodyLiteral::new(lit, random_weight(rng)));
            }
        }
        let head = Literal::diagnosis(&sym(DISEASES.choose(rng).unwrap()));
        rules.push(Rule::new(head, body, Provenance::Curated, 0).unwrap());
    }
    let mut facts: Vec<FuzzyFact> = Vec::new();
    for _ in 0..rng.gen_range(0..=8) {
        let lit = Literal::unary(PREDICATES.choose(rng).unwrap(), ATOMS.choose(rng).unwrap());
        if facts.iter().all(|f| f.literal != lit) {
            facts.push(FuzzyFact::new(lit, random_weight(rng)));
        }
    }
    (rules, facts)
}

// ---------------------------------------------------------------------------
// Ranking oracles
// ---------------------------------------------------------------------------

/// The unshifted softmax blend, evaluated directly.
pub fn naive_blend(t: &[f64], r: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    let raw: Vec<f64> = t.iter().zip(r).map(|(t, r)| (alpha * t).exp() + (beta * r).exp()).collect();
    let z: f64 = raw.iter().sum();
    raw.iter().map(|v| v / z).collect()
}

pub fn naive_gini(labels: &[Symbol]) -> f64 {
    let n = labels.len() as f64;
    let mut seen: Vec<&Symbol> = Vec::new();
    let mut sum = 0.0;
    for l in labels {
        if !seen.contains(&l) {
            seen.push(l);
            let c = labels.iter().filter(|x| *x == l).count() as f64;
            sum += (c / n) * (c / n);
        }
    }
    1.0 - sum
}

// ---------------------------------------------------------------------------
// Metric oracle
// ---------------------------------------------------------------------------

/// Single-label closed forms at k: (acc, prec, rec, f1) from accuracy.
pub fn single_label_identities(acc: f64, k: usize) -> (f64, f64, f64, f64) {
    let k = k as f64;
    (acc, acc / k, acc, 2.0 * acc / (k + 1.0))
}

// ---------------------------------------------------------------------------
// Snapshot edit generator
// ---------------------------------------------------------------------------

const EDIT_SYMPTOMS: [&str; 5] = ["fever", "cough", "rash", "fatigue", "headache"];
const EDIT_DISEASES: [&str; 3] = ["flu", "cold", "measles"];

pub fn base_snapshot() -> KnowledgeSnapshot {
    KnowledgeSnapshot::from_kb_text(
        "diagnosis(flu) :- symptom(fever)@0.9, symptom(cough)@0.6.\n\
         diagnosis(cold) :- symptom(cough)@0.8.\n\
         prior(flu, _, _, _, 0.1).\n",
        fuzzdx_core::dsl::Lexicon::default_hedges(),
        1,
    )
    .unwrap()
}

/// One random edit against `snapshot`. Some are invalid on purpose
/// (duplicate rules); callers skip those.
pub fn random_edit(rng: &mut impl Rng, snapshot: &KnowledgeSnapshot) -> EditRequest {
    let rules = snapshot.rules();
    let kind = match rng.gen_range(0..5) {
        0 if !rules.is_empty() => {
            let r = rules.choose(rng).unwrap();
            let b = r.body.choose(rng).unwrap();
            EditKind::AdjustWeight { rule_id: r.id.clone(), literal: b.literal.clone(), new_weight: random_weight(rng) }
        }
        1 if rules.len() > 1 => EditKind::RemoveRule { id: rules.choose(rng).unwrap().id.clone() },
        2 => EditKind::LexiconSet { term: format!("hedge{}", rng.gen_range(0..4)), weight: random_weight(rng) },
        3 => EditKind::PriorSet {
            entry: PriorEntry {
                disease: sym(EDIT_DISEASES.choose(rng).unwrap()),
                age_band: Term::Wildcard,
                sex: if rng.gen_bool(0.5) { Term::Wildcard } else { Term::atom("female") },
                region: Term::Wildcard,
                prevalence: rng.gen_range(0.001..0.5),
            },
        },
        _ => {
            let n = rng.gen_range(1..=3);
            let body: Vec<String> = EDIT_SYMPTOMS
                .choose_multiple(rng, n)
                .map(|s| format!("symptom({s})@{:.2}", rng.gen_range(0.05..=1.0)))
                .collect();
            let rule = format!("diagnosis({}) :- {}.", EDIT_DISEASES.choose(rng).unwrap(), body.join(", "));
            EditKind::AddRule { rule, weight: None }
        }
    };
    EditRequest::clinician(kind)
}
