//! Canonical text form for AVM templates, used everywhere a structure crosses
//! a file or process boundary (lexicons, rule files, bag files, test oracles).
//!
//! Grammar:
//! ```text
//! value  := atom | var | record | list
//! atom   := [a-z_][a-z0-9_]*
//! var    := '#' [0-9]+
//! record := '{' (feature ':' value (',' feature ':' value)*)? '}'
//! list   := '[' (value (',' value)*)? ']'
//! ```
//! Rendering sorts record features lexicographically and numbers variables in
//! first-visit order, so canonically equal structures render byte-identically.

use super::{Sym, Template};
use std::fmt::Write as _;

impl Template {
    /// Render in canonical form (sorted features, first-visit var numbering).
    pub fn render(&self) -> String {
        let mut out = String::new();
        let canonical = {
            // Re-sort and renumber defensively; templates built by
            // `Template::record` or `Store::snapshot` are already canonical.
            let mut map = std::collections::HashMap::new();
            canonicalize(self, &mut map)
        };
        write_value(&canonical, &mut out);
        out
    }
}

fn canonicalize(t: &Template, vars: &mut std::collections::HashMap<u32, u32>) -> Template {
    match t {
        Template::Var(v) => {
            let next = vars.len() as u32;
            Template::Var(*vars.entry(*v).or_insert(next))
        }
        Template::Atom(s) => Template::Atom(*s),
        Template::Record(entries) => {
            let mut es = entries.clone();
            es.sort_by_key(|(f, _)| f.as_str());
            Template::Record(es.iter().map(|(f, v)| (*f, canonicalize(v, vars))).collect())
        }
        Template::List(items) => {
            Template::List(items.iter().map(|i| canonicalize(i, vars)).collect())
        }
    }
}

fn write_value(t: &Template, out: &mut String) {
    match t {
        Template::Atom(s) => out.push_str(s.as_str()),
        Template::Var(v) => {
            let _ = write!(out, "#{v}");
        }
        Template::Record(entries) => {
            out.push('{');
            for (i, (f, v)) in entries.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(f.as_str());
                out.push_str(": ");
                write_value(v, out);
            }
            out.push('}');
        }
        Template::List(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(v, out);
            }
            out.push(']');
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Error from parsing canonical AVM text; `offset` is a byte offset into the
/// parsed fragment (callers translate to file/line).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{msg} at offset {offset}")]
pub struct SyntaxError {
    pub msg: String,
    pub offset: usize,
}

/// Character-level cursor shared by the AVM, lexicon, rule and bag parsers.
pub(crate) struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(src: &'a str) -> Cursor<'a> {
        Cursor { src, pos: 0 }
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    pub(crate) fn err(&self, msg: impl Into<String>) -> SyntaxError {
        SyntaxError { msg: msg.into(), offset: self.pos }
    }

    pub(crate) fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    pub(crate) fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    pub(crate) fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    /// Consume `c` if it is next (after whitespace); report whether it was.
    pub(crate) fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, c: char) -> Result<(), SyntaxError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    pub(crate) fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.src.len()
    }

    /// Lowercase identifier: `[a-z_][a-z0-9_]*`.
    pub(crate) fn ident(&mut self) -> Result<String, SyntaxError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_lowercase() || c == '_' => {
                self.bump();
            }
            _ => return Err(self.err("expected identifier")),
        }
        while let Some(c) = self.peek() {
            if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' {
                self.bump();
            } else {
                break;
            }
        }
        Ok(self.src[start..self.pos].to_owned())
    }

    /// Capitalized identifier: `[A-Z][A-Za-z0-9_]*` (bilingual-lexicon
    /// variables, Prolog style).
    pub(crate) fn var_name(&mut self) -> Result<String, SyntaxError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_uppercase() => {
                self.bump();
            }
            _ => return Err(self.err("expected a capitalized variable name")),
        }
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                self.bump();
            } else {
                break;
            }
        }
        Ok(self.src[start..self.pos].to_owned())
    }

    pub(crate) fn number(&mut self) -> Result<u32, SyntaxError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        if start == self.pos {
            return Err(self.err("expected number"));
        }
        self.src[start..self.pos]
            .parse()
            .map_err(|_| self.err("number out of range"))
    }

    /// Parse one AVM value. Variable ids are taken literally, so values parsed
    /// from the same statement share variables by writing the same `#N`.
    pub(crate) fn parse_value(&mut self) -> Result<Template, SyntaxError> {
        self.skip_ws();
        match self.peek() {
            Some('#') => {
                self.bump();
                Ok(Template::Var(self.number()?))
            }
            Some('{') => {
                self.bump();
                let mut entries: Vec<(Sym, Template)> = Vec::new();
                if !self.eat('}') {
                    loop {
                        let feat_pos = self.pos;
                        let feat = self.ident()?;
                        let sym = Sym::new(&feat);
                        if entries.iter().any(|(f, _)| *f == sym) {
                            return Err(SyntaxError {
                                msg: format!("duplicate feature '{feat}'"),
                                offset: feat_pos,
                            });
                        }
                        self.expect(':')?;
                        let value = self.parse_value()?;
                        entries.push((sym, value));
                        if self.eat('}') {
                            break;
                        }
                        self.expect(',')?;
                    }
                }
                entries.sort_by_key(|(f, _)| f.as_str());
                Ok(Template::Record(entries))
            }
            Some('[') => {
                self.bump();
                let mut items = Vec::new();
                if !self.eat(']') {
                    loop {
                        items.push(self.parse_value()?);
                        if self.eat(']') {
                            break;
                        }
                        self.expect(',')?;
                    }
                }
                Ok(Template::List(items))
            }
            Some(c) if c.is_ascii_lowercase() || c == '_' => {
                Ok(Template::Atom(Sym::new(&self.ident()?)))
            }
            Some(c) => Err(self.err(format!("unexpected character '{c}'"))),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

/// Parse a complete canonical AVM value; the whole input must be consumed.
pub fn parse_template(src: &str) -> Result<Template, SyntaxError> {
    let mut cur = Cursor::new(src);
    let t = cur.parse_value()?;
    if !cur.at_end() {
        return Err(cur.err("trailing input after value"));
    }
    Ok(t)
}
