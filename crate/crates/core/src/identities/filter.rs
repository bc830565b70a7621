//! Tag expressions selecting scenarios.
//!
//! Grammar: `expr := term ('|' term)*`, `term := factor ('&' factor)*`,
//! `factor := '!' factor | '(' expr ')' | word`. A word matches a scenario
//! whose id equals it or whose tags contain it. Commas act as `|`.

use super::IdentityError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TagExpr {
    All,
    Word(String),
    Not(Box<TagExpr>),
    And(Vec<TagExpr>),
    Or(Vec<TagExpr>),
}

impl TagExpr {
    pub fn parse(src: &str) -> Result<Self, IdentityError> {
        let tokens = tokenize(src)?;
        if tokens.is_empty() {
            return Ok(TagExpr::All);
        }
        let mut pos = 0;
        let expr = parse_or(&tokens, &mut pos).map_err(|m| bad(src, m))?;
        if pos != tokens.len() {
            return Err(bad(src, "unexpected trailing input"));
        }
        Ok(expr)
    }

    pub fn matches(&self, id: &str, tags: &[&str]) -> bool {
        match self {
            TagExpr::All => true,
            TagExpr::Word(w) => id == w || tags.contains(&w.as_str()),
            TagExpr::Not(e) => !e.matches(id, tags),
            TagExpr::And(es) => es.iter().all(|e| e.matches(id, tags)),
            TagExpr::Or(es) => es.iter().any(|e| e.matches(id, tags)),
        }
    }

    /// Whether some word is mentioned without negation, e.g. to decide
    /// if scenarios excluded by default were asked for explicitly.
    pub fn mentions(&self, pred: &dyn Fn(&str) -> bool) -> bool {
        match self {
            TagExpr::All | TagExpr::Not(_) => false,
            TagExpr::Word(w) => pred(w),
            TagExpr::And(es) | TagExpr::Or(es) => es.iter().any(|e| e.mentions(pred)),
        }
    }
}

fn bad(src: &str, msg: &'static str) -> IdentityError {
    IdentityError::InvalidFilter {
        filter: src.to_owned(),
        reason: msg,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Or,
    And,
    Not,
    Open,
    Close,
}

fn tokenize(src: &str) -> Result<Vec<Tok>, IdentityError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '|' | ',' => {
                chars.next();
                out.push(Tok::Or);
            }
            '&' => {
                chars.next();
                out.push(Tok::And);
            }
            '!' => {
                chars.next();
                out.push(Tok::Not);
            }
            '(' => {
                chars.next();
                out.push(Tok::Open);
            }
            ')' => {
                chars.next();
                out.push(Tok::Close);
            }
            c if c.is_ascii_alphanumeric() || c == '_' || c == '-' => {
                let mut w = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                        w.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Tok::Word(w));
            }
            _ => return Err(bad(src, "unexpected character")),
        }
    }
    Ok(out)
}

fn parse_or(t: &[Tok], pos: &mut usize) -> Result<TagExpr, &'static str> {
    let mut terms = vec![parse_and(t, pos)?];
    while t.get(*pos) == Some(&Tok::Or) {
        *pos += 1;
        terms.push(parse_and(t, pos)?);
    }
    Ok(if terms.len() == 1 { terms.pop().expect("one term") } else { TagExpr::Or(terms) })
}

fn parse_and(t: &[Tok], pos: &mut usize) -> Result<TagExpr, &'static str> {
    let mut factors = vec![parse_factor(t, pos)?];
    while t.get(*pos) == Some(&Tok::And) {
        *pos += 1;
        factors.push(parse_factor(t, pos)?);
    }
    Ok(if factors.len() == 1 { factors.pop().expect("one factor") } else { TagExpr::And(factors) })
}

fn parse_factor(t: &[Tok], pos: &mut usize) -> Result<TagExpr, &'static str> {
    match t.get(*pos) {
        Some(Tok::Not) => {
            *pos += 1;
            Ok(TagExpr::Not(Box::new(parse_factor(t, pos)?)))
        }
        Some(Tok::Open) => {
            *pos += 1;
            let e = parse_or(t, pos)?;
            if t.get(*pos) != Some(&Tok::Close) {
                return Err("missing ')'");
            }
            *pos += 1;
            Ok(e)
        }
        Some(Tok::Word(w)) => {
            *pos += 1;
            Ok(TagExpr::Word(w.clone()))
        }
        _ => Err("expected a tag, '!' or '('"),
    }
}
