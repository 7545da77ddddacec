//! The textual knowledge-base format: weighted Horn rules, fuzzy facts and
//! prevalence priors, plus the hedge lexicon TSV.
//!
//! ```text
//! % comment
//! diagnosis(stable_angina) :- symptom(chest_pain)@0.8, trigger(exertion)@0.9,
//!     risk(_), \+ lab(troponin_elevated).
//! fuzzy_symptom(chest_pain, 0.8).
//! risk(smoking).
//! prior(stable_angina, age_40_64, male, _, 0.06).
//! ```
//!
//! A body literal may carry `@w` (default 1). Bare ground atoms are facts at
//! weight 1; non-symptom facts may also carry `@w`.

mod lexicon;
mod parser;
mod printer;

pub use lexicon::{parse_lexicon, print_lexicon, Lexicon, LexiconError};
pub use parser::{parse_literal, parse_program, ParseError};
pub use printer::{format_number, print_program};

use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

/// Predicate of every rule head.
pub const DIAGNOSIS: &str = "diagnosis";
/// Predicate used for symptom facts and symptom→disease edges.
pub const SYMPTOM: &str = "symptom";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Atom(Symbol),
    Wildcard,
}

impl Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Term::Atom(sym) => s.serialize_str(sym.as_str()),
            Term::Wildcard => s.serialize_str("_"),
        }
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        if raw == "_" {
            return Ok(Term::Wildcard);
        }
        Symbol::new(&raw).map(Term::Atom).map_err(serde::de::Error::custom)
    }
}

impl Term {
    pub fn atom(name: &str) -> Self {
        Term::Atom(Symbol::new(name).expect("valid identifier"))
    }

    pub fn is_wildcard(&self) -> bool {
        matches!(self, Term::Wildcard)
    }

    pub fn as_atom(&self) -> Option<&Symbol> {
        match self {
            Term::Atom(s) => Some(s),
            Term::Wildcard => None,
        }
    }

    /// Wildcards on either side match anything.
    pub fn matches(&self, other: &Term) -> bool {
        match (self, other) {
            (Term::Wildcard, _) | (_, Term::Wildcard) => true,
            (Term::Atom(a), Term::Atom(b)) => a == b,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(s) => write!(f, "{s}"),
            Term::Wildcard => f.write_str("_"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    #[default]
    Positive,
    NegatedAsFailure,
}

/// A predicate applied to terms, e.g. `risk(_)` or `\+ lab(troponin_elevated)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub predicate: Symbol,
    #[serde(default)]
    pub args: Vec<Term>,
    #[serde(default)]
    pub polarity: Polarity,
}

impl Literal {
    pub fn new(predicate: Symbol, args: Vec<Term>) -> Self {
        Self { predicate, args, polarity: Polarity::Positive }
    }

    /// `pred(arg)` with both parts given as identifiers. Panics on invalid
    /// identifiers; meant for fixtures and tests.
    pub fn unary(predicate: &str, arg: &str) -> Self {
        Self::new(Symbol::new(predicate).expect("valid predicate"), vec![Term::atom(arg)])
    }

    pub fn symptom(name: &Symbol) -> Self {
        Self::new(Symbol::intern(SYMPTOM), vec![Term::Atom(name.clone())])
    }

    pub fn diagnosis(disease: &Symbol) -> Self {
        Self::new(Symbol::intern(DIAGNOSIS), vec![Term::Atom(disease.clone())])
    }

    pub fn negated(mut self) -> Self {
        self.polarity = Polarity::NegatedAsFailure;
        self
    }

    pub fn positive(&self) -> Self {
        Self { polarity: Polarity::Positive, ..self.clone() }
    }

    pub fn is_negated(&self) -> bool {
        self.polarity == Polarity::NegatedAsFailure
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|a| !a.is_wildcard())
    }

    /// The symptom name when this is a positive, ground `symptom(s)` literal.
    pub fn symptom_name(&self) -> Option<&Symbol> {
        if self.polarity == Polarity::Positive
            && self.predicate.as_str() == SYMPTOM
            && self.args.len() == 1
        {
            self.args[0].as_atom()
        } else {
            None
        }
    }

    /// Disease of a `diagnosis(d)` head.
    pub fn diagnosis_name(&self) -> Option<&Symbol> {
        if self.predicate.as_str() == DIAGNOSIS && self.args.len() == 1 {
            self.args[0].as_atom()
        } else {
            None
        }
    }

    /// Does this (possibly wildcarded) pattern match a ground literal?
    /// Polarity is ignored.
    pub fn matches_ground(&self, ground: &Literal) -> bool {
        self.predicate == ground.predicate
            && self.args.len() == ground.args.len()
            && self.args.iter().zip(&ground.args).all(|(p, g)| p.matches(g))
    }
}

impl std::str::FromStr for Literal {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_literal(s)
    }
}

/// Serializes a literal as its DSL text.
pub mod literal_text {
    use super::Literal;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(lit: &Literal, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&lit.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Literal, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_negated() {
            f.write_str("\\+ ")?;
        }
        write!(f, "{}", self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// A rule body literal together with its edge weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyLiteral {
    pub literal: Literal,
    pub weight: f64,
}

impl BodyLiteral {
    pub fn new(literal: Literal, weight: f64) -> Self {
        Self { literal, weight }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Loaded from a knowledge-base file.
    #[default]
    Curated,
    /// Accepted by the rule-induction gate.
    Induced,
    /// The learner-owned support rule of a disease, edited by structural updates.
    Learner,
    /// Authored through physician feedback.
    Clinician,
}

/// Stable rule identifier derived from the head and the body literal set.
/// Weights do not contribute, so weight edits keep the id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleId(pub String);

impl RuleId {
    pub fn compute(head: &Literal, body: &[BodyLiteral]) -> Self {
        let mut parts: Vec<String> = body.iter().map(|b| b.literal.to_string()).collect();
        parts.sort();
        let key = format!("{head}:-{}", parts.join(","));
        let digest = Sha256::digest(key.as_bytes());
        RuleId(format!("r{}", &hex::encode(digest)[..12]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuleError {
    #[error("rule body is empty")]
    EmptyBody,
    #[error("rule head must be a positive ground `diagnosis(d)` literal, got `{0}`")]
    BadHead(String),
    #[error("edge weight {weight} of `{literal}` is outside [0, 1]")]
    WeightOutOfRange { literal: String, weight: f64 },
    #[error("literal `{0}` appears twice in one body")]
    DuplicateLiteral(String),
}

/// A weighted Horn clause `diagnosis(d) :- b1@w1, ..., bn@wn`.
///
/// Edge weights may be exactly 0: the learner clips edges to 0 and leaves
/// them in place until a structural prune removes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub id: RuleId,
    pub head: Literal,
    pub body: Vec<BodyLiteral>,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default)]
    pub created_at: u64,
}

impl Rule {
    pub fn new(
        head: Literal,
        body: Vec<BodyLiteral>,
        provenance: Provenance,
        created_at: u64,
    ) -> Result<Self, RuleError> {
        validate_rule(&head, &body)?;
        let id = RuleId::compute(&head, &body);
        Ok(Self { id, head, body, provenance, created_at })
    }

    pub fn disease(&self) -> &Symbol {
        self.head.diagnosis_name().expect("validated head")
    }

    /// Recomputes the id after a structural change to the body.
    pub fn rehash(&mut self) {
        self.id = RuleId::compute(&self.head, &self.body);
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        validate_rule(&self.head, &self.body)
    }

    pub fn body_weight(&self, literal: &Literal) -> Option<f64> {
        self.body.iter().find(|b| &b.literal == literal).map(|b| b.weight)
    }
}

fn validate_rule(head: &Literal, body: &[BodyLiteral]) -> Result<(), RuleError> {
    if head.is_negated() || !head.is_ground() || head.diagnosis_name().is_none() {
        return Err(RuleError::BadHead(head.to_string()));
    }
    if body.is_empty() {
        return Err(RuleError::EmptyBody);
    }
    for (i, b) in body.iter().enumerate() {
        if !(0.0..=1.0).contains(&b.weight) {
            return Err(RuleError::WeightOutOfRange {
                literal: b.literal.to_string(),
                weight: b.weight,
            });
        }
        if body[..i].iter().any(|prev| prev.literal == b.literal) {
            return Err(RuleError::DuplicateLiteral(b.literal.to_string()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Temporal {
    Acute,
    Chronic,
    #[default]
    Untagged,
}

/// Byte offsets `[start, end)` into a source note.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        text.get(self.start..self.end)
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// A ground positive literal with a truth degree in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyFact {
    pub literal: Literal,
    pub weight: f64,
    #[serde(default)]
    pub temporal: Temporal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
}

impl FuzzyFact {
    pub fn new(literal: Literal, weight: f64) -> Self {
        Self { literal, weight, temporal: Temporal::Untagged, span: None }
    }

    pub fn symptom(name: &str, weight: f64) -> Self {
        Self::new(Literal::unary(SYMPTOM, name), weight)
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.weight) && self.literal.is_ground() && !self.literal.is_negated()
    }
}

/// Prevalence of a disease within a demographic stratum. Wildcards mark
/// marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorEntry {
    pub disease: Symbol,
    pub age_band: Term,
    pub sex: Term,
    pub region: Term,
    pub prevalence: f64,
}

impl PriorEntry {
    pub fn key(&self) -> PriorKey {
        PriorKey {
            disease: self.disease.clone(),
            age_band: self.age_band.clone(),
            sex: self.sex.clone(),
            region: self.region.clone(),
        }
    }
}

/// Stratum identity of a prior entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PriorKey {
    pub disease: Symbol,
    pub age_band: Term,
    pub sex: Term,
    pub region: Term,
}

/// Everything a `.kb` file can hold, in source order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Program {
    pub rules: Vec<Rule>,
    pub facts: Vec<FuzzyFact>,
    pub priors: Vec<PriorEntry>,
}

impl Program {
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.facts.is_empty() && self.priors.is_empty()
    }
}
