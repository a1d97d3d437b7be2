//! Flat key-value config grammar.
//!
//! ```text
//! # comment
//! subcommand = "mix"
//! seed = 1
//!
//! [observable]
//! name = "square_wave"
//!
//! [run]
//! n = [0, 1, 2, 5, 10]
//! method = "both"
//! ```
//!
//! Values are double-quoted strings (escapes `\"`, `\\`, `\n`), numbers,
//! `true`/`false`, or bracketed lists of numbers. Keys are `[A-Za-z0-9_-]+`
//! and are addressed as `section.key` (root keys have no prefix). Sections
//! do not nest and may not repeat; keys may not repeat within a section.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Num(f64),
    Bool(bool),
    List(Vec<f64>),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Str(_) => "string",
            Value::Num(_) => "number",
            Value::Bool(_) => "bool",
            Value::List(_) => "list",
        }
    }
}

/// Where a value came from, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub span: Span,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.span.line, self.span.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    entries: BTreeMap<String, (Value, Span)>,
    key_spans: BTreeMap<String, Span>,
}

impl Document {
    pub fn get(&self, key: &str) -> Option<&(Value, Span)> {
        self.entries.get(key)
    }

    /// Keys with the position of the key itself.
    pub fn keys(&self) -> impl Iterator<Item = (&String, Span)> {
        self.key_spans.iter().map(|(k, s)| (k, *s))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Keys under `section.`, with the prefix stripped.
    pub fn section(&self, section: &str) -> Vec<(&str, &Value, Span)> {
        let prefix = format!("{section}.");
        self.entries
            .iter()
            .filter_map(|(k, (v, s))| k.strip_prefix(&prefix).map(|rest| (rest, v, *s)))
            .collect()
    }
}

fn is_key_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn span(&self) -> Span {
        Span {
            line: self.line,
            column: self.pos + 1,
        }
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            span: self.span(),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.pos += 1;
        }
    }

    fn at_end_or_comment(&self) -> bool {
        matches!(self.peek(), None | Some('#'))
    }

    fn key(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        while self.peek().is_some_and(is_key_char) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a key"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn string(&mut self) -> Result<String, ParseError> {
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(self.err("unterminated string")),
                Some('"') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some('\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some('"') => out.push('"'),
                        Some('\\') => out.push('\\'),
                        Some('n') => out.push('\n'),
                        _ => return Err(self.err("unknown escape")),
                    }
                    self.pos += 1;
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn bare_token(&mut self) -> String {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| !matches!(c, ' ' | '\t' | ',' | ']' | '#'))
        {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let span = self.span();
        let tok = self.bare_token();
        let looks_numeric = tok
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E' | '_'));
        match tok.replace('_', "").parse::<f64>() {
            Ok(v) if looks_numeric && v.is_finite() => Ok(v),
            _ => Err(ParseError {
                span,
                message: if tok.is_empty() {
                    "expected a value".to_string()
                } else {
                    format!("invalid value `{tok}` (strings must be quoted)")
                },
            }),
        }
    }

    fn value(&mut self) -> Result<Value, ParseError> {
        match self.peek() {
            Some('"') => self.string().map(Value::Str),
            Some('[') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    if self.peek() == Some(']') {
                        self.pos += 1;
                        return Ok(Value::List(items));
                    }
                    if self.peek().is_none() {
                        return Err(self.err("unterminated list"));
                    }
                    items.push(self.number()?);
                    self.skip_ws();
                    match self.peek() {
                        Some(',') => self.pos += 1,
                        Some(']') => {}
                        _ => return Err(self.err("expected `,` or `]`")),
                    }
                }
            }
            _ => {
                let save = self.pos;
                let tok = self.bare_token();
                match tok.as_str() {
                    "true" => Ok(Value::Bool(true)),
                    "false" => Ok(Value::Bool(false)),
                    _ => {
                        self.pos = save;
                        self.number().map(Value::Num)
                    }
                }
            }
        }
    }
}

/// Parses a config document.
pub fn parse(src: &str) -> Result<Document, ParseError> {
    let mut doc = Document::default();
    let mut section: Option<String> = None;
    let mut seen_sections: Vec<String> = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let mut c = Cursor {
            chars: line.chars().collect(),
            pos: 0,
            line: i + 1,
        };
        c.skip_ws();
        if c.at_end_or_comment() {
            continue;
        }
        if c.peek() == Some('[') {
            c.pos += 1;
            c.skip_ws();
            let name = c.key()?;
            c.skip_ws();
            if c.peek() != Some(']') {
                return Err(c.err("expected `]`"));
            }
            c.pos += 1;
            c.skip_ws();
            if !c.at_end_or_comment() {
                return Err(c.err("unexpected text after section header"));
            }
            if seen_sections.contains(&name) {
                return Err(ParseError {
                    span: Span { line: i + 1, column: 1 },
                    message: format!("section `[{name}]` appears twice"),
                });
            }
            seen_sections.push(name.clone());
            section = Some(name);
            continue;
        }
        let key_span = c.span();
        let key = c.key()?;
        c.skip_ws();
        if c.peek() != Some('=') {
            return Err(c.err("expected `=`"));
        }
        c.pos += 1;
        c.skip_ws();
        let value_span = c.span();
        let value = c.value()?;
        c.skip_ws();
        if !c.at_end_or_comment() {
            return Err(c.err("unexpected text after value"));
        }
        let full = match &section {
            Some(s) => format!("{s}.{key}"),
            None => key,
        };
        if doc.entries.contains_key(&full) {
            return Err(ParseError {
                span: key_span,
                message: format!("duplicate key `{full}`"),
            });
        }
        doc.key_spans.insert(full.clone(), key_span);
        doc.entries.insert(full, (value, value_span));
    }
    Ok(doc)
}
