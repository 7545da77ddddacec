use super::printer::format_number;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LexiconError {
    #[error("line {line}: expected `term<TAB>weight`")]
    Malformed { line: usize },
    #[error("line {line}: weight `{raw}` is not a number in [0, 1]")]
    BadWeight { line: usize, raw: String },
    #[error("line {line}: duplicate term `{term}`")]
    Duplicate { line: usize, term: String },
}

/// Hedge lexicon: lowercase hedge phrase → truth degree.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lexicon(pub BTreeMap<String, f64>);

impl Lexicon {
    /// Calibration defaults for common hedges.
    pub fn default_hedges() -> Self {
        let entries = [
            ("mild", 0.3),
            ("moderate", 0.6),
            ("severe", 0.9),
            ("on-and-off", 0.5),
            ("intermittent", 0.5),
            ("occasional", 0.4),
        ];
        Lexicon(entries.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    pub fn get(&self, term: &str) -> Option<f64> {
        self.0.get(term).copied()
    }

    pub fn insert(&mut self, term: &str, weight: f64) {
        self.0.insert(term.to_lowercase(), weight);
    }

    pub fn remove(&mut self, term: &str) -> Option<f64> {
        self.0.remove(term)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Parses `term<TAB>weight` lines. Blank lines and `#` comments are skipped.
pub fn parse_lexicon(text: &str) -> Result<Lexicon, LexiconError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut cols = raw.split('\t');
        let (Some(term), Some(weight), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(LexiconError::Malformed { line });
        };
        let term = term.trim().to_lowercase();
        if term.is_empty() {
            return Err(LexiconError::Malformed { line });
        }
        let w: f64 = weight
            .trim()
            .parse()
            .ok()
            .filter(|w: &f64| (0.0..=1.0).contains(w))
            .ok_or_else(|| LexiconError::BadWeight { line, raw: weight.trim().to_string() })?;
        if map.insert(term.clone(), w).is_some() {
            return Err(LexiconError::Duplicate { line, term });
        }
    }
    Ok(Lexicon(map))
}

/// Sorted, one entry per line.
pub fn print_lexicon(lexicon: &Lexicon) -> String {
    lexicon.iter().map(|(t, w)| format!("{t}\t{}\n", format_number(w))).collect()
}
