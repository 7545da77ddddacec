//! Fuzzy Horn-clause solver.
//!
//! A body literal's activation is the t-norm of its edge weight and the
//! truth degree of the best matching fact. A rule's activation is the
//! t-norm over its body; it fires when the activation strictly exceeds γ.

mod explain;
mod proof;
mod tnorm;

pub use explain::explain;
pub use proof::{confidence, ProofLeaf, ProofTree, RuleNode};
pub use tnorm::TNorm;

use crate::dsl::{FuzzyFact, Literal, Rule};
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    pub tnorm: TNorm,
    /// Firing threshold; a rule fires iff its activation is `> gamma`.
    pub gamma: f64,
    /// A negated literal holds iff no matching fact has weight `> gamma_neg`.
    pub gamma_neg: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self { tnorm: TNorm::Product, gamma: 0.4, gamma_neg: 0.0 }
    }
}

/// A disease supported by at least one firing rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisCandidate {
    pub disease: Symbol,
    /// Maximum activation over the disease's firing rules.
    pub activation: f64,
    /// Raw path-sum confidence; may exceed 1.
    pub confidence: f64,
    pub proof: ProofTree,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posterior: Option<f64>,
}

impl DiagnosisCandidate {
    /// `min(1, confidence)` for display.
    pub fn display_confidence(&self) -> f64 {
        self.confidence.min(1.0)
    }
}

/// Best fact matching a positive pattern: highest weight, ties broken by the
/// smaller literal.
pub fn best_match<'a>(pattern: &Literal, facts: &'a [FuzzyFact]) -> Option<&'a FuzzyFact> {
    facts
        .iter()
        .filter(|f| pattern.matches_ground(&f.literal))
        .fold(None, |best: Option<&FuzzyFact>, f| match best {
            Some(b) if b.weight > f.weight || (b.weight == f.weight && b.literal <= f.literal) => Some(b),
            _ => Some(f),
        })
}

/// Truth degree of a single literal against a fact set, ignoring edge
/// weights. Positive literals take the max matching weight (0 when absent);
/// negated literals are crisp negation-as-failure.
pub fn literal_activation(literal: &Literal, facts: &[FuzzyFact], gamma_neg: f64) -> f64 {
    if literal.is_negated() {
        let defeated = facts
            .iter()
            .any(|f| literal.matches_ground(&f.literal) && f.weight > gamma_neg);
        if defeated {
            0.0
        } else {
            1.0
        }
    } else {
        best_match(literal, facts).map_or(0.0, |f| f.weight)
    }
}

/// Evaluates a rule and returns its proof node, whether or not it fires.
pub fn evaluate_rule(rule: &Rule, facts: &[FuzzyFact], config: &InferenceConfig) -> RuleNode {
    let leaves: Vec<ProofLeaf> = rule
        .body
        .iter()
        .map(|b| {
            let (fact_weight, matched) = if b.literal.is_negated() {
                (literal_activation(&b.literal, facts, config.gamma_neg), None)
            } else {
                match best_match(&b.literal, facts) {
                    Some(f) => (f.weight, Some(f)),
                    None => (0.0, None),
                }
            };
            ProofLeaf {
                literal: b.literal.clone(),
                edge_weight: b.weight,
                fact_weight,
                activation: config.tnorm.apply(b.weight, fact_weight),
                matched: matched.map(|f| f.literal.clone()),
                span: matched.and_then(|f| f.span),
            }
        })
        .collect();
    let activation = config.tnorm.fold(leaves.iter().map(|l| l.activation));
    RuleNode { id: rule.id.clone(), activation, leaves }
}

pub fn rule_activation(rule: &Rule, facts: &[FuzzyFact], config: &InferenceConfig) -> f64 {
    evaluate_rule(rule, facts, config).activation
}

pub fn fires(activation: f64, config: &InferenceConfig) -> bool {
    activation > config.gamma
}

/// Evaluates every rule and groups the firing ones by disease. The result is
/// sorted by activation descending, then disease name.
pub fn derive_candidates(
    rules: &[Rule],
    facts: &[FuzzyFact],
    config: &InferenceConfig,
) -> Vec<DiagnosisCandidate> {
    let mut by_disease: BTreeMap<Symbol, Vec<RuleNode>> = BTreeMap::new();
    for rule in rules {
        let node = evaluate_rule(rule, facts, config);
        if fires(node.activation, config) {
            by_disease.entry(rule.disease().clone()).or_default().push(node);
        }
    }
    let mut out: Vec<DiagnosisCandidate> = by_disease
        .into_iter()
        .map(|(disease, mut nodes)| {
            nodes.sort_by(|a, b| b.activation.total_cmp(&a.activation).then_with(|| a.id.cmp(&b.id)));
            let activation = nodes[0].activation;
            let proof = ProofTree::new(Literal::diagnosis(&disease), nodes);
            DiagnosisCandidate {
                confidence: proof.confidence,
                disease,
                activation,
                proof,
                prior: None,
                posterior: None,
            }
        })
        .collect();
    sort_by_activation(&mut out);
    out
}

pub(crate) fn sort_by_activation(c: &mut [DiagnosisCandidate]) {
    c.sort_by(|a, b| b.activation.total_cmp(&a.activation).then_with(|| a.disease.cmp(&b.disease)));
}
