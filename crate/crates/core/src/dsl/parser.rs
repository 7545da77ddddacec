use super::{BodyLiteral, FuzzyFact, Literal, PriorEntry, Program, Provenance, Rule, RuleError, Term};
use crate::symbol::{is_identifier, Symbol};
use std::collections::HashSet;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{column}: syntax error, expected {expected}")]
    SyntaxError { line: usize, column: usize, expected: String },
    #[error("{line}:{column}: duplicate clause `{clause}`")]
    DuplicateClause { line: usize, column: usize, clause: String },
    #[error("{line}:{column}: weight {value} outside {range}")]
    WeightOutOfRange { line: usize, column: usize, value: f64, range: &'static str },
    #[error("{line}:{column}: invalid clause: {reason}")]
    InvalidClause { line: usize, column: usize, reason: String },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match *self {
            ParseError::SyntaxError { line, column, .. }
            | ParseError::DuplicateClause { line, column, .. }
            | ParseError::WeightOutOfRange { line, column, .. }
            | ParseError::InvalidClause { line, column, .. } => (line, column),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Wildcard,
    Number(f64),
    LParen,
    RParen,
    Comma,
    Dot,
    Neck,
    Naf,
    At,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Wildcard => "`_`".into(),
            Tok::Number(n) => format!("number {n}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Neck => "`:-`".into(),
            Tok::Naf => "`\\+`".into(),
            Tok::At => "`@`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tl, column: tc });
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' | ')' | ',' | '.' | '@' => {
                push(
                    &mut out,
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        ',' => Tok::Comma,
                        '.' => Tok::Dot,
                        _ => Tok::At,
                    },
                );
                i += 1;
                col += 1;
            }
            ':' if chars.get(i + 1) == Some(&'-') => {
                push(&mut out, Tok::Neck);
                i += 2;
                col += 2;
            }
            '\\' if chars.get(i + 1) == Some(&'+') => {
                push(&mut out, Tok::Naf);
                i += 2;
                col += 2;
            }
            '_' if !chars.get(i + 1).is_some_and(|n| n.is_ascii_alphanumeric() || *n == '_') => {
                push(&mut out, Tok::Wildcard);
                i += 1;
                col += 1;
            }
            c if c.is_ascii_lowercase() => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_lowercase() || chars[i].is_ascii_digit() || chars[i] == '_')
                {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                col += i - start;
                push(&mut out, Tok::Ident(word));
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit()) {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let raw: String = chars[start..i].iter().collect();
                col += i - start;
                let value: f64 = raw.parse().expect("digits parse as f64");
                push(&mut out, Tok::Number(value));
            }
            _ => {
                return Err(ParseError::SyntaxError {
                    line,
                    column: col,
                    expected: format!("a token, found `{c}`"),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let t = self.peek();
        ParseError::SyntaxError {
            line: t.line,
            column: t.column,
            expected: format!("{expected}, found {}", t.tok.describe()),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, ParseError> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            Err(self.error(what))
        }
    }

    fn ident(&mut self) -> Result<(Symbol, Token), ParseError> {
        match &self.peek().tok {
            Tok::Ident(name) => {
                debug_assert!(is_identifier(name));
                let sym = Symbol::intern(name);
                Ok((sym, self.bump()))
            }
            _ => Err(self.error("identifier")),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().tok {
            Tok::Wildcard => {
                self.bump();
                Ok(Term::Wildcard)
            }
            Tok::Ident(_) => Ok(Term::Atom(self.ident()?.0)),
            _ => Err(self.error("identifier or `_`")),
        }
    }

    fn number(&mut self) -> Result<(f64, Token), ParseError> {
        match self.peek().tok {
            Tok::Number(n) => Ok((n, self.bump())),
            _ => Err(self.error("number")),
        }
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let (predicate, _) = self.ident()?;
        let mut args = Vec::new();
        if self.peek().tok == Tok::LParen {
            self.bump();
            args.push(self.term()?);
            while self.peek().tok == Tok::Comma {
                self.bump();
                args.push(self.term()?);
            }
            self.expect(Tok::RParen, "`,` or `)`")?;
        }
        Ok(Literal::new(predicate, args))
    }

    fn optional_weight(&mut self) -> Result<Option<(f64, Token)>, ParseError> {
        if self.peek().tok == Tok::At {
            self.bump();
            Ok(Some(self.number()?))
        } else {
            Ok(None)
        }
    }
}

fn unit_weight(value: f64, at: &Token) -> Result<f64, ParseError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ParseError::WeightOutOfRange { line: at.line, column: at.column, value, range: "[0, 1]" })
    }
}

/// Parses a `.kb` program. Clauses come back in source order; rule ids are
/// derived from head and body content.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut program = Program::default();
    let mut seen_rules = HashSet::new();
    let mut seen_facts = HashSet::new();
    let mut seen_priors = HashSet::new();

    while p.peek().tok != Tok::Eof {
        let start = p.peek().clone();
        let dup = |clause: String| ParseError::DuplicateClause {
            line: start.line,
            column: start.column,
            clause,
        };
        match (&start.tok, p.peek_at(1)) {
            (Tok::Ident(name), Tok::LParen) if name == "prior" => {
                p.bump();
                p.bump();
                let (disease, _) = p.ident()?;
                p.expect(Tok::Comma, "`,`")?;
                let age_band = p.term()?;
                p.expect(Tok::Comma, "`,`")?;
                let sex = p.term()?;
                p.expect(Tok::Comma, "`,`")?;
                let region = p.term()?;
                p.expect(Tok::Comma, "`,`")?;
                let (prevalence, at) = p.number()?;
                if !(prevalence > 0.0 && prevalence <= 1.0) {
                    return Err(ParseError::WeightOutOfRange {
                        line: at.line,
                        column: at.column,
                        value: prevalence,
                        range: "(0, 1]",
                    });
                }
                p.expect(Tok::RParen, "`)`")?;
                p.expect(Tok::Dot, "`.`")?;
                let entry = PriorEntry { disease, age_band, sex, region, prevalence };
                if !seen_priors.insert(entry.key()) {
                    return Err(dup(format!("prior for {:?}", entry.key())));
                }
                program.priors.push(entry);
            }
            (Tok::Ident(name), Tok::LParen) if name == "fuzzy_symptom" => {
                p.bump();
                p.bump();
                let (symptom, _) = p.ident()?;
                p.expect(Tok::Comma, "`,`")?;
                let (w, at) = p.number()?;
                let weight = unit_weight(w, &at)?;
                p.expect(Tok::RParen, "`)`")?;
                p.expect(Tok::Dot, "`.`")?;
                let literal = Literal::symptom(&symptom);
                if !seen_facts.insert(literal.clone()) {
                    return Err(dup(literal.to_string()));
                }
                program.facts.push(FuzzyFact::new(literal, weight));
            }
            (Tok::Ident(_), _) => {
                let head = p.literal()?;
                if p.peek().tok == Tok::Neck {
                    p.bump();
                    let mut body = Vec::new();
                    loop {
                        let negated = if p.peek().tok == Tok::Naf {
                            p.bump();
                            true
                        } else {
                            false
                        };
                        let mut lit = p.literal()?;
                        if negated {
                            lit = lit.negated();
                        }
                        let weight = match p.optional_weight()? {
                            Some((w, at)) => unit_weight(w, &at)?,
                            None => 1.0,
                        };
                        body.push(BodyLiteral::new(lit, weight));
                        if p.peek().tok == Tok::Comma {
                            p.bump();
                        } else {
                            break;
                        }
                    }
                    p.expect(Tok::Dot, "`,` or `.`")?;
                    let rule = Rule::new(head, body, Provenance::Curated, 0).map_err(|e| match e {
                        RuleError::DuplicateLiteral(l) => dup(l),
                        other => ParseError::InvalidClause {
                            line: start.line,
                            column: start.column,
                            reason: other.to_string(),
                        },
                    })?;
                    if !seen_rules.insert(rule.id.clone()) {
                        return Err(dup(rule.head.to_string()));
                    }
                    program.rules.push(rule);
                } else {
                    let weight = match p.optional_weight()? {
                        Some((w, at)) => unit_weight(w, &at)?,
                        None => 1.0,
                    };
                    p.expect(Tok::Dot, "`:-`, `@` or `.`")?;
                    if !head.is_ground() {
                        return Err(ParseError::InvalidClause {
                            line: start.line,
                            column: start.column,
                            reason: format!("fact `{head}` contains a wildcard"),
                        });
                    }
                    if !seen_facts.insert(head.clone()) {
                        return Err(dup(head.to_string()));
                    }
                    program.facts.push(FuzzyFact::new(head, weight));
                }
            }
            _ => return Err(p.error("clause")),
        }
    }
    Ok(program)
}

/// Parses a single body literal such as `symptom(chest_pain)` or
/// `\+ lab(troponin_elevated)`.
pub fn parse_literal(text: &str) -> Result<Literal, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let negated = if p.peek().tok == Tok::Naf {
        p.bump();
        true
    } else {
        false
    };
    let lit = p.literal()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.error("end of literal"));
    }
    Ok(if negated { lit.negated() } else { lit })
}
