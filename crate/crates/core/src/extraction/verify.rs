use super::tokens::tokenize;
use super::Triple;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Negation cues, as token sequences.
pub const NEGATION_CUES: &[&[&str]] = &[&["denies"], &["no"], &["without"], &["negative", "for"]];

/// Tokens before an entity mention that are searched for a negation cue.
pub const NEGATION_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// The span or claimed text is not supported by the note.
    Hallucination,
    /// A negation cue precedes the mention in the same sentence.
    Negated,
    /// The same entity is both asserted and negated.
    Contradiction,
    /// The span crosses a segment boundary.
    CrossesSegment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub triple: Triple,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Verified {
    pub accepted: Vec<Triple>,
    pub rejected: Vec<Rejection>,
}

/// Checks each triple against the note: its span must be a valid slice, its
/// claimed text (when present) must occur verbatim inside it, and without claimed
/// text the slice must mention a word of the entity name. Negated mentions
/// are rejected, and an entity with both negated and asserted mentions is
/// rejected entirely.
pub fn verify_facts(triples: &[Triple], note: &str) -> Verified {
    let tokens = tokenize(note, 0);
    let mut verdicts: Vec<Option<RejectReason>> = triples.iter().map(|t| grounding(t, note)).collect();

    for (t, v) in triples.iter().zip(verdicts.iter_mut()) {
        if v.is_some() {
            continue;
        }
        let Some(first) = tokens.iter().position(|tok| tok.span.end > t.span.start) else { continue };
        let sentence = tokens[first].sentence;
        let window: Vec<&str> = tokens[first.saturating_sub(NEGATION_WINDOW)..first]
            .iter()
            .filter(|tok| tok.sentence == sentence)
            .map(|tok| tok.text.as_str())
            .collect();
        let negated = NEGATION_CUES
            .iter()
            .any(|cue| window.windows(cue.len()).any(|w| w == *cue));
        if negated {
            *v = Some(RejectReason::Negated);
        }
    }

    let negated: BTreeSet<_> = triples
        .iter()
        .zip(&verdicts)
        .filter(|(_, v)| **v == Some(RejectReason::Negated))
        .map(|(t, _)| t.entity.clone())
        .collect();
    for (t, v) in triples.iter().zip(verdicts.iter_mut()) {
        if v.is_none() && negated.contains(&t.entity) {
            *v = Some(RejectReason::Contradiction);
        }
    }

    let mut out = Verified::default();
    for (t, v) in triples.iter().zip(verdicts) {
        match v {
            None => out.accepted.push(t.clone()),
            Some(reason) => out.rejected.push(Rejection { triple: t.clone(), reason }),
        }
    }
    out
}

fn grounding(t: &Triple, note: &str) -> Option<RejectReason> {
    let Some(slice) = t.span.slice(note).filter(|s| !s.trim().is_empty()) else {
        return Some(RejectReason::Hallucination);
    };
    if !(0.0..=1.0).contains(&t.hedge_weight) {
        return Some(RejectReason::Hallucination);
    }
    let supported = match &t.evidence {
        Some(text) => !text.trim().is_empty() && slice.contains(text.as_str()),
        None => {
            let lower = slice.to_lowercase();
            t.entity.as_str().split('_').any(|part| part.len() > 2 && lower.contains(part))
        }
    };
    (!supported).then_some(RejectReason::Hallucination)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::Span;
    use crate::extraction::TripleValue;
    use crate::symbol::Symbol;

    fn triple(entity: &str, note: &str, phrase: &str) -> Triple {
        let start = note.find(phrase).unwrap();
        Triple {
            entity: Symbol::new(entity).unwrap(),
            relation: Symbol::new("presence").unwrap(),
            value: TripleValue::Atom(Symbol::new("present").unwrap()),
            hedge_weight: 1.0,
            span: Span::new(start, start + phrase.len()),
            evidence: Some(phrase.to_string()),
        }
    }

    #[test]
    fn denied_symptoms_are_rejected() {
        let note = "He feels mild breathlessness but denies nausea or diaphoresis.";
        let v = verify_facts(
            &[
                triple("breathlessness", note, "breathlessness"),
                triple("nausea", note, "nausea"),
                triple("diaphoresis", note, "diaphoresis"),
            ],
            note,
        );
        assert_eq!(v.accepted.len(), 1);
        assert_eq!(v.accepted[0].entity.as_str(), "breathlessness");
        assert!(v.rejected.iter().all(|r| r.reason == RejectReason::Negated));
    }

    #[test]
    fn negation_scope_is_bounded() {
        let note = "No fever. Cough present.";
        let v = verify_facts(&[triple("cough", note, "Cough")], note);
        assert_eq!(v.accepted.len(), 1);
        let note = "denies a b c d e fever";
        assert_eq!(verify_facts(&[triple("fever", note, "fever")], note).accepted.len(), 1);
        let note = "negative for fever";
        assert_eq!(verify_facts(&[triple("fever", note, "fever")], note).rejected[0].reason, RejectReason::Negated);
    }

    #[test]
    fn hallucinations() {
        let note = "chest pain on exertion";
        let mut t = triple("chest_pain", note, "chest pain");
        t.evidence = Some("nausea".into());
        assert_eq!(verify_facts(&[t.clone()], note).rejected[0].reason, RejectReason::Hallucination);
        t.evidence = None;
        assert_eq!(verify_facts(&[t.clone()], note).accepted.len(), 1);
        t.entity = Symbol::new("nausea").unwrap();
        assert_eq!(verify_facts(&[t.clone()], note).rejected[0].reason, RejectReason::Hallucination);
        t.span = Span::new(5, 500);
        assert_eq!(verify_facts(&[t], note).rejected[0].reason, RejectReason::Hallucination);
    }

    #[test]
    fn contradiction_rejects_all_mentions() {
        let note = "Fever yesterday. No fever today.";
        let a = triple("fever", note, "Fever");
        let start = note.rfind("fever").unwrap();
        let mut b = a.clone();
        b.span = Span::new(start, start + 5);
        b.evidence = Some("fever".into());
        let v = verify_facts(&[a, b], note);
        assert!(v.accepted.is_empty());
        let reasons: Vec<_> = v.rejected.iter().map(|r| r.reason.clone()).collect();
        assert_eq!(reasons, vec![RejectReason::Contradiction, RejectReason::Negated]);
    }
}
