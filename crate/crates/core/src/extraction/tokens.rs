use crate::dsl::Span;

/// A lowercased word with its byte span in the source and its sentence index.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub text: String,
    pub span: Span,
    pub sentence: usize,
}

fn is_boundary(c: char) -> bool {
    matches!(c, '.' | ';' | '\n' | '!' | '?')
}

/// Splits `text` into words. Hyphens and apostrophes between letters stay
/// inside a word (`on-and-off`), as does a decimal point between digits.
/// Spans are shifted by `offset`.
pub(crate) fn tokenize(text: &str, offset: usize) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut sentence = 0;
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if !c.is_alphanumeric() {
            if is_boundary(c) {
                sentence += 1;
            }
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() {
            let c = chars[j].1;
            if c.is_alphanumeric() {
                j += 1;
                continue;
            }
            let next = chars.get(j + 1).map(|p| p.1);
            let prev = chars[j - 1].1;
            let joins = match c {
                '-' | '\'' | '\u{2019}' => next.is_some_and(|n| n.is_alphanumeric()),
                '.' => prev.is_ascii_digit() && next.is_some_and(|n| n.is_ascii_digit()),
                _ => false,
            };
            if joins {
                j += 2;
            } else {
                break;
            }
        }
        let end = chars.get(j).map_or(text.len(), |p| p.0);
        out.push(Token {
            text: text[start..end].to_lowercase(),
            span: Span::new(start + offset, end + offset),
            sentence,
        });
        i = j;
    }
    out
}

/// Lowercased token texts of a phrase.
pub(crate) fn words(phrase: &str) -> Vec<String> {
    tokenize(phrase, 0).into_iter().map(|t| t.text).collect()
}
