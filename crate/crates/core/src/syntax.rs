//! Concrete syntax for PTRSs: a hand-written lexer and recursive-descent
//! parser with line/column diagnostics, and the matching printer.
//!
//! A `#` directly after a function symbol marks an annotated occurrence; rule
//! files reject it, but ADPs stored in proofs use it.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::ptrs::{ModelError, MultiDistribution, PRule, Ptrs};
use crate::rational::{Probability, Rational};
use crate::term::{Name, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: variable {name} declared twice")]
    DuplicateVar {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("exactly one RULES block is required, found {0}")]
    RulesBlocks(usize),
    #[error("at most one START term is allowed")]
    MultipleStart,
    #[error("{line}:{col}: {source}")]
    Model {
        line: usize,
        col: usize,
        source: ModelError,
    },
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Slash,
    Arrow,
    Hash,
    Ident(String),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '\'' | '!')
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let (l, cl) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        let simple = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ',' => Some(Tok::Comma),
            ':' => Some(Tok::Colon),
            '/' => Some(Tok::Slash),
            '#' => Some(Tok::Hash),
            _ => None,
        };
        if let Some(tok) = simple {
            bump(&mut chars);
            out.push(Token { tok, line: l, col: cl });
        } else if c.is_whitespace() {
            bump(&mut chars);
        } else if c == ';' {
            while let Some(&d) = chars.peek() {
                if d == '\n' {
                    break;
                }
                bump(&mut chars);
            }
        } else if c == '-' {
            bump(&mut chars);
            if chars.peek() == Some(&'>') {
                bump(&mut chars);
                out.push(Token {
                    tok: Tok::Arrow,
                    line: l,
                    col: cl,
                });
            } else {
                return Err(syntax(l, cl, "expected '->'"));
            }
        } else if is_ident_char(c) {
            let mut s = String::new();
            while let Some(&d) = chars.peek() {
                if !is_ident_char(d) {
                    break;
                }
                s.push(d);
                bump(&mut chars);
            }
            out.push(Token {
                tok: Tok::Ident(s),
                line: l,
                col: cl,
            });
        } else {
            return Err(syntax(l, cl, &format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

fn syntax(line: usize, col: usize, msg: &str) -> ParseError {
    ParseError::Syntax {
        line,
        col,
        msg: msg.to_string(),
    }
}

/// Token cursor shared by the PTRS, term and ADP entry points.
pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
    vars: BTreeSet<Name>,
    end: (usize, usize),
}

impl Parser {
    pub fn new(text: &str, vars: BTreeSet<Name>) -> Result<Self, ParseError> {
        let toks = lex(text)?;
        let end = text
            .lines()
            .enumerate()
            .last()
            .map(|(i, l)| (i + 1, l.chars().count() + 1))
            .unwrap_or((1, 1));
        Ok(Parser {
            toks,
            pos: 0,
            vars,
            end,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    /// Line and column of the next token, or of the end of input.
    pub fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .unwrap_or(self.end)
    }

    fn error(&self, msg: &str) -> ParseError {
        let (l, c) = self.here();
        syntax(l, c, msg)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(&format!("expected {what}"))),
        }
    }

    pub fn expect_end(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }

    pub fn term(&mut self) -> Result<Term, ParseError> {
        let name = self.ident("a term")?;
        let annotated = if self.peek() == Some(&Tok::Hash) {
            self.pos += 1;
            true
        } else {
            false
        };
        if self.vars.contains(name.as_str()) {
            if annotated {
                return Err(self.error("variables cannot be annotated"));
            }
            if self.peek() == Some(&Tok::LParen) {
                return Err(self.error("variable applied to arguments"));
            }
            return Ok(Term::Var(Arc::from(name)));
        }
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            loop {
                args.push(self.term()?);
                match self.peek() {
                    Some(Tok::Comma) => self.pos += 1,
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.error("expected ',' or ')'")),
                }
            }
        }
        Ok(Term::App {
            sym: Arc::from(name),
            annotated,
            args,
        })
    }

    fn natural(&mut self) -> Result<i64, ParseError> {
        let s = self.ident("a number")?;
        s.parse::<i64>()
            .map_err(|_| self.error(&format!("'{s}' is not a natural number")))
    }

    pub fn probability(&mut self) -> Result<Probability, ParseError> {
        let (l, c) = self.here();
        let n = self.natural()?;
        let d = if self.peek() == Some(&Tok::Slash) {
            self.pos += 1;
            self.natural()?
        } else {
            1
        };
        let model = |e| ParseError::Model {
            line: l,
            col: c,
            source: ModelError::Rational(e),
        };
        let r = Rational::new(n, d).map_err(model)?;
        Probability::try_from(r).map_err(model)
    }

    /// `{ p : t, ... }` without the sum check.
    pub fn branches(&mut self) -> Result<Vec<(Probability, Term)>, ParseError> {
        self.expect(Tok::LBrace, "'{'")?;
        let mut out = Vec::new();
        loop {
            let p = self.probability()?;
            self.expect(Tok::Colon, "':'")?;
            out.push((p, self.term()?));
            match self.peek() {
                Some(Tok::Comma) => self.pos += 1,
                Some(Tok::RBrace) => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return Err(self.error("expected ',' or '}'")),
            }
        }
    }

    pub fn arrow(&mut self) -> Result<(), ParseError> {
        self.expect(Tok::Arrow, "'->'")
    }

    /// A trailing `:flag` after a distribution.
    pub fn flag(&mut self) -> Result<bool, ParseError> {
        self.expect(Tok::Colon, "':'")?;
        match self.ident("true or false")?.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(self.error("expected true or false")),
        }
    }

    fn rule(&mut self) -> Result<PRule, ParseError> {
        let (l, c) = self.here();
        let lhs = self.term()?;
        self.arrow()?;
        let branches = self.branches()?;
        let model = |source| ParseError::Model {
            line: l,
            col: c,
            source,
        };
        let rhs = MultiDistribution::new(branches).map_err(model)?;
        PRule::new(lhs, rhs).map_err(model)
    }
}

/// Parses a whole PTRS file.
pub fn parse_ptrs(text: &str) -> Result<Ptrs, ParseError> {
    let vars = declared_vars(text)?;
    let mut p = Parser::new(text, vars)?;
    let mut rules = None;
    let mut blocks = 0;
    let mut start = None;
    while !p.at_end() {
        p.expect(Tok::LParen, "'('")?;
        let kw = p.ident("VAR, RULES or START")?;
        match kw.as_str() {
            "VAR" => {
                while matches!(p.peek(), Some(Tok::Ident(_))) {
                    p.pos += 1;
                }
            }
            "RULES" => {
                blocks += 1;
                let mut rs = Vec::new();
                while p.peek() != Some(&Tok::RParen) {
                    if p.at_end() {
                        return Err(p.error("unterminated RULES block"));
                    }
                    rs.push(p.rule()?);
                }
                rules = Some(rs);
            }
            "START" => {
                if start.is_some() {
                    return Err(ParseError::MultipleStart);
                }
                start = Some(p.term()?);
            }
            other => return Err(p.error(&format!("unknown block '{other}'"))),
        }
        p.expect(Tok::RParen, "')'")?;
    }
    if blocks != 1 {
        return Err(ParseError::RulesBlocks(blocks));
    }
    if let Some(s) = &start {
        if s.has_annotations() {
            return Err(ModelError::Annotated(s.clone()).into());
        }
    }
    Ok(Ptrs::new(rules.unwrap_or_default(), start)?)
}

/// Collects `(VAR ...)` declarations ahead of the main pass so that
/// declaration order does not matter.
fn declared_vars(text: &str) -> Result<BTreeSet<Name>, ParseError> {
    let toks = lex(text)?;
    let mut vars = BTreeSet::new();
    let mut depth = 0usize;
    let mut i = 0;
    while i < toks.len() {
        match &toks[i].tok {
            Tok::LParen => {
                if depth == 0 && matches!(toks.get(i + 1), Some(Token { tok: Tok::Ident(k), .. }) if k == "VAR")
                {
                    i += 2;
                    while let Some(Token {
                        tok: Tok::Ident(x),
                        line,
                        col,
                    }) = toks.get(i)
                    {
                        if !vars.insert(Name::from(x.as_str())) {
                            return Err(ParseError::DuplicateVar {
                                line: *line,
                                col: *col,
                                name: x.clone(),
                            });
                        }
                        i += 1;
                    }
                    continue;
                }
                depth += 1;
            }
            Tok::RParen => depth = depth.saturating_sub(1),
            _ => {}
        }
        i += 1;
    }
    Ok(vars)
}

/// Parses one term; identifiers in `vars` are variables.
pub fn parse_term(text: &str, vars: &BTreeSet<Name>) -> Result<Term, ParseError> {
    let mut p = Parser::new(text, vars.clone())?;
    let t = p.term()?;
    p.expect_end()?;
    Ok(t)
}

/// Prints a PTRS in the normalized form accepted by [`parse_ptrs`].
pub fn print_ptrs(r: &Ptrs) -> String {
    let mut vars = BTreeSet::new();
    for rule in &r.rules {
        vars.extend(rule.lhs.variables());
    }
    if let Some(s) = &r.start {
        vars.extend(s.variables());
    }
    let mut out = String::new();
    if !vars.is_empty() {
        let names: Vec<&str> = vars.iter().map(|v| v.as_ref()).collect();
        let _ = writeln!(out, "(VAR {})", names.join(" "));
    }
    let _ = writeln!(out, "(RULES");
    for rule in &r.rules {
        let _ = writeln!(out, "  {rule}");
    }
    let _ = writeln!(out, ")");
    if let Some(s) = &r.start {
        let _ = writeln!(out, "(START {s})");
    }
    out
}
