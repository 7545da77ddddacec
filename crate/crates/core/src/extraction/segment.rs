use super::{Segment, SegmentKind};
use crate::dsl::Span;

const HEADERS: &[(&str, SegmentKind)] = &[
    ("history of present illness", SegmentKind::History),
    ("past medical history", SegmentKind::History),
    ("chief complaint", SegmentKind::ChiefComplaint),
    ("presenting complaint", SegmentKind::ChiefComplaint),
    ("laboratory results", SegmentKind::Labs),
    ("social history", SegmentKind::History),
    ("family history", SegmentKind::History),
    ("vital signs", SegmentKind::Vitals),
    ("lab results", SegmentKind::Labs),
    ("laboratory", SegmentKind::Labs),
    ("history", SegmentKind::History),
    ("vitals", SegmentKind::Vitals),
    ("labs", SegmentKind::Labs),
    ("hpi", SegmentKind::History),
    ("pmh", SegmentKind::History),
    ("cc", SegmentKind::ChiefComplaint),
];

/// Classifies a line as a section header. Known keywords match
/// case-insensitively when followed by `:` or the end of the line; any other
/// capitalised label of up to three words followed by `:` opens an `Other`
/// section.
fn header_kind(line: &str) -> Option<SegmentKind> {
    let line = line.trim_start();
    let lower = line.to_lowercase();
    for (kw, kind) in HEADERS {
        if let Some(rest) = lower.strip_prefix(kw) {
            let rest = rest.trim_start();
            if rest.starts_with(':') || rest.is_empty() {
                return Some(*kind);
            }
        }
    }
    let (label, _) = line.split_once(':')?;
    let starts_upper = label.chars().next().is_some_and(|c| c.is_ascii_uppercase());
    let words = label.split_whitespace().count();
    let plain = label.chars().all(|c| c.is_ascii_alphabetic() || c == ' ');
    (starts_upper && plain && (1..=3).contains(&words)).then_some(SegmentKind::Other)
}

/// Splits a note into sections at header lines. Text before the first header
/// is the chief complaint. Segments tile the note: a whitespace-only prefix
/// is folded into the first header's segment.
pub fn segment_note(text: &str) -> Vec<Segment> {
    let mut starts: Vec<(usize, SegmentKind)> = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if let Some(kind) = header_kind(line) {
            starts.push((offset, kind));
        }
        offset += line.len();
    }
    match starts.first() {
        Some(&(first, _)) if text[..first].trim().is_empty() => starts[0].0 = 0,
        _ => starts.insert(0, (0, SegmentKind::ChiefComplaint)),
    }
    let mut out = Vec::with_capacity(starts.len());
    for (i, &(start, kind)) in starts.iter().enumerate() {
        let end = starts.get(i + 1).map_or(text.len(), |s| s.0);
        out.push(Segment { kind, text: text[start..end].to_string(), span: Span::new(start, end) });
    }
    out
}
