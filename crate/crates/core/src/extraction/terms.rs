use super::tokens::{tokenize, words, Token};
use super::{ExtractionError, Extractor, Segment, Triple, TripleValue};
use crate::dsl::{Lexicon, Span};
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

const DEFAULT_TERMS: &str = include_str!("../../data/terms.tsv");

/// Tokens before a match that are searched for a hedge word.
pub const HEDGE_WINDOW: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEntry {
    pub phrase: String,
    pub entity: Symbol,
    pub relation: Symbol,
    pub value: Symbol,
}

/// Surface phrase → (entity, relation, value) dictionary.
#[derive(Debug, Clone, Default)]
pub struct TermTable {
    entries: Vec<TermEntry>,
    by_first: HashMap<String, Vec<(Vec<String>, usize)>>,
}

impl TermTable {
    pub fn new(entries: Vec<TermEntry>) -> Self {
        let mut by_first: HashMap<String, Vec<(Vec<String>, usize)>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            let w = words(&e.phrase);
            if let Some(first) = w.first() {
                by_first.entry(first.clone()).or_default().push((w, i));
            }
        }
        for list in by_first.values_mut() {
            list.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)));
        }
        Self { entries, by_first }
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TERMS).expect("built-in term table is well formed")
    }

    /// Reads `phrase<TAB>entity<TAB>relation<TAB>value` lines; blank lines
    /// and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, ExtractionError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            let bad = |reason: &str| ExtractionError::TermTable { line: line_no, reason: reason.to_string() };
            if cols.len() != 4 {
                return Err(bad("expected 4 tab-separated columns"));
            }
            if words(cols[0]).is_empty() {
                return Err(bad("empty phrase"));
            }
            let sym = |s: &str| Symbol::new(s).map_err(|e| bad(&e.to_string()));
            entries.push(TermEntry {
                phrase: cols[0].to_string(),
                entity: sym(cols[1])?,
                relation: sym(cols[2])?,
                value: sym(cols[3])?,
            });
        }
        Ok(Self::new(entries))
    }

    pub fn entries(&self) -> &[TermEntry] {
        &self.entries
    }

    /// Longest match starting at `tokens[i]` within one sentence.
    fn match_at(&self, tokens: &[Token], i: usize) -> Option<(usize, &TermEntry)> {
        let candidates = self.by_first.get(&tokens[i].text)?;
        candidates.iter().find_map(|(w, idx)| {
            let window = tokens.get(i..i + w.len())?;
            let same_sentence = window.iter().all(|t| t.sentence == tokens[i].sentence);
            let equal = window.iter().zip(w).all(|(t, p)| &t.text == p);
            (same_sentence && equal).then_some((w.len(), &self.entries[*idx]))
        })
    }
}

/// Dictionary-driven default extractor with hedge detection.
#[derive(Debug, Clone)]
pub struct LexiconExtractor {
    pub terms: TermTable,
}

impl Default for LexiconExtractor {
    fn default() -> Self {
        Self { terms: TermTable::builtin() }
    }
}

impl Extractor for LexiconExtractor {
    fn extract(&self, note: &str, segments: &[Segment], lexicon: &Lexicon) -> Result<Vec<Triple>, ExtractionError> {
        let hedges: Vec<(Vec<String>, String, f64)> = lexicon
            .iter()
            .map(|(term, w)| (words(term), term.to_string(), w))
            .filter(|(w, _, _)| !w.is_empty())
            .collect();
        let mut out = Vec::new();
        for seg in segments {
            let tokens = tokenize(&seg.text, seg.span.start);
            let mut last_match_end = 0;
            let mut i = 0;
            while i < tokens.len() {
                let Some((len, entry)) = self.terms.match_at(&tokens, i) else {
                    i += 1;
                    continue;
                };
                let span = Span::new(tokens[i].span.start, tokens[i + len - 1].span.end);
                let floor = i.saturating_sub(HEDGE_WINDOW).max(last_match_end);
                let window: Vec<&Token> =
                    tokens[floor..i].iter().filter(|t| t.sentence == tokens[i].sentence).collect();
                let (value, hedge_weight) = match find_hedge(&window, &hedges) {
                    Some((term, w)) => (Symbol::normalize(term).unwrap_or_else(|| entry.value.clone()), w),
                    None => (entry.value.clone(), 1.0),
                };
                out.push(Triple {
                    entity: entry.entity.clone(),
                    relation: entry.relation.clone(),
                    value: TripleValue::Atom(value),
                    hedge_weight,
                    span,
                    evidence: span.slice(note).map(str::to_string),
                });
                i += len;
                last_match_end = i;
            }
        }
        Ok(out)
    }
}

/// The hedge ending closest to the match; longer hedges win ties.
fn find_hedge<'a>(window: &[&Token], hedges: &'a [(Vec<String>, String, f64)]) -> Option<(&'a str, f64)> {
    for end in (0..window.len()).rev() {
        let mut best: Option<&(Vec<String>, String, f64)> = None;
        for h in hedges {
            let n = h.0.len();
            if n > end + 1 {
                continue;
            }
            let slice = &window[end + 1 - n..=end];
            if slice.iter().zip(&h.0).all(|(t, w)| &t.text == w) && best.is_none_or(|b| n > b.0.len()) {
                best = Some(h);
            }
        }
        if let Some(h) = best {
            return Some((&h.1, h.2));
        }
    }
    None
}
