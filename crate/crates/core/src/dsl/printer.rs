use super::{FuzzyFact, PriorEntry, Rule, SYMPTOM};
use std::fmt::Write;

/// Shortest decimal text that parses back to exactly `value`. Never uses
/// exponent notation.
pub fn format_number(value: f64) -> String {
    format!("{value}")
}

fn weight_suffix(weight: f64) -> String {
    if weight == 1.0 {
        String::new()
    } else {
        format!("@{}", format_number(weight))
    }
}

pub(crate) fn print_rule(out: &mut String, rule: &Rule) {
    write!(out, "{} :- ", rule.head).unwrap();
    for (i, b) in rule.body.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write!(out, "{}{}", b.literal, weight_suffix(b.weight)).unwrap();
    }
    out.push_str(".\n");
}

fn print_fact(out: &mut String, fact: &FuzzyFact) {
    match fact.literal.symptom_name() {
        Some(name) if fact.weight != 1.0 && fact.literal.predicate.as_str() == SYMPTOM => {
            writeln!(out, "fuzzy_symptom({name}, {}).", format_number(fact.weight)).unwrap();
        }
        _ => writeln!(out, "{}{}.", fact.literal, weight_suffix(fact.weight)).unwrap(),
    }
}

pub(crate) fn print_prior(out: &mut String, p: &PriorEntry) {
    writeln!(
        out,
        "prior({}, {}, {}, {}, {}).",
        p.disease,
        p.age_band,
        p.sex,
        p.region,
        format_number(p.prevalence)
    )
    .unwrap();
}

/// Canonical text: one clause per line, rules then facts then priors, each
/// group in the given order. Temporal tags and spans are not part of the
/// format.
pub fn print_program(rules: &[Rule], facts: &[FuzzyFact], priors: &[PriorEntry]) -> String {
    let mut out = String::new();
    for r in rules {
        print_rule(&mut out, r);
    }
    for f in facts {
        print_fact(&mut out, f);
    }
    for p in priors {
        print_prior(&mut out, p);
    }
    out
}
