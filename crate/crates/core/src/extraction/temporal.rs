use super::tokens::{tokenize, Token};
use crate::dsl::{Span, Temporal};
use serde::{Deserialize, Serialize};

/// Durations shorter than this many days are acute.
pub const ACUTE_CUTOFF_DAYS: f64 = 14.0;

/// A recognised time expression and the duration it denotes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalMention {
    pub span: Span,
    pub duration_days: f64,
}

impl TemporalMention {
    pub fn tag(&self) -> Temporal {
        tag_for(self.duration_days)
    }
}

pub fn tag_for(duration_days: f64) -> Temporal {
    if duration_days < ACUTE_CUTOFF_DAYS {
        Temporal::Acute
    } else {
        Temporal::Chronic
    }
}

fn number(word: &str) -> Option<f64> {
    if let Ok(v) = word.parse::<f64>() {
        return Some(v);
    }
    const WORDS: [&str; 21] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
        "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
    ];
    if let Some(i) = WORDS.iter().position(|w| *w == word) {
        return Some(i as f64);
    }
    match word {
        "a" | "an" => Some(1.0),
        "couple" => Some(2.0),
        "few" => Some(3.0),
        "thirty" => Some(30.0),
        _ => None,
    }
}

fn unit_days(word: &str) -> Option<f64> {
    match word {
        "hour" | "hours" => Some(1.0 / 24.0),
        "day" | "days" => Some(1.0),
        "week" | "weeks" => Some(7.0),
        "month" | "months" => Some(30.0),
        "year" | "years" => Some(365.0),
        _ => None,
    }
}

/// Finds "for the past N days/weeks", "for N days", "N days ago",
/// "past week" and "since yesterday" style expressions in `text`. Spans are
/// shifted by `offset`.
pub fn normalize_temporal(text: &str, offset: usize) -> Vec<TemporalMention> {
    let toks = tokenize(text, offset);
    let word = |i: usize| toks.get(i).map(|t: &Token| t.text.as_str());
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let mention = match word(i) {
            Some("past" | "last") => match (word(i + 1).and_then(number), word(i + 2).and_then(unit_days)) {
                (Some(n), Some(u)) => Some((i, i + 2, n * u)),
                _ => word(i + 1).and_then(unit_days).map(|u| (i, i + 1, u)),
            },
            Some("for") => match (word(i + 1).and_then(number), word(i + 2).and_then(unit_days)) {
                (Some(n), Some(u)) => Some((i, i + 2, n * u)),
                _ => None,
            },
            Some("since") if word(i + 1) == Some("yesterday") => Some((i, i + 1, 1.0)),
            Some(w) => match (number(w), word(i + 1).and_then(unit_days), word(i + 2)) {
                (Some(n), Some(u), Some("ago")) => Some((i, i + 2, n * u)),
                _ => None,
            },
            None => None,
        };
        match mention {
            Some((a, b, days)) if toks[a].sentence == toks[b].sentence => {
                out.push(TemporalMention { span: Span::new(toks[a].span.start, toks[b].span.end), duration_days: days });
                i = b + 1;
            }
            _ => i += 1,
        }
    }
    out
}
