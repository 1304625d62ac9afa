//! Grammar-driven lossless lexer for instance text.
//!
//! Tokens are classified from the grammar's keywords, its terminal rules and
//! the built-in terminals, longest match winning and keywords preferred over
//! identifier-shaped terminals on ties. Whitespace and comments are kept as
//! leading trivia so the token stream reassembles to the source byte-exact.

use crate::grammar::{BodyNode, GrammarAst, RuleKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no terminal matches input at {line}:{col}")]
pub struct LexError {
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenKind {
    /// Grammar keyword; the token text is the keyword itself.
    Keyword,
    /// Token matched by the named terminal rule (user-defined or built-in).
    Terminal(String),
    /// Unlexable input consumed in lenient mode.
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// Byte offset in the source.
    pub offset: usize,
    /// 1-based.
    pub line: u32,
    /// 1-based, in characters.
    pub col: u32,
}

impl Token {
    pub fn end(&self) -> usize {
        self.offset + self.text.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TriviaPiece {
    Whitespace(String),
    LineComment(String),
    BlockComment(String),
}

impl TriviaPiece {
    pub fn text(&self) -> &str {
        match self {
            TriviaPiece::Whitespace(s)
            | TriviaPiece::LineComment(s)
            | TriviaPiece::BlockComment(s) => s,
        }
    }

    pub fn is_comment(&self) -> bool {
        !matches!(self, TriviaPiece::Whitespace(_))
    }
}

/// Lexer configuration extracted from one or more grammars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexConfig {
    /// Keyword literals, longest first so the match loop can take the first hit.
    keywords_by_len: Vec<String>,
    keyword_set: BTreeSet<String>,
    /// Terminal rules in declaration order (user-defined), then built-ins not
    /// shadowed by a user definition.
    terminals: Vec<(String, Option<BodyNode>)>,
}

const BUILTIN_ORDER: &[&str] = &["ID", "INT", "STRING"];
const HIDDEN_TERMINALS: &[&str] = &["WS", "ML_COMMENT", "SL_COMMENT"];

impl LexConfig {
    pub fn from_grammar(grammar: &GrammarAst) -> Self {
        let mut config = LexConfig {
            keywords_by_len: Vec::new(),
            keyword_set: grammar.keywords(),
            terminals: Vec::new(),
        };
        for rule in grammar
            .rules
            .iter()
            .filter(|r| r.kind == RuleKind::Terminal)
        {
            if HIDDEN_TERMINALS.contains(&rule.name.as_str()) {
                continue;
            }
            config
                .terminals
                .push((rule.name.clone(), Some(rule.body.clone())));
        }
        for builtin in BUILTIN_ORDER {
            if !config.terminals.iter().any(|(n, _)| n == builtin) {
                config.terminals.push((builtin.to_string(), None));
            }
        }
        config.rebuild_keyword_index();
        config
    }

    /// Union of two configurations; keywords merge, terminals of `self` keep
    /// priority over terminals only present in `other`.
    pub fn union(&self, other: &LexConfig) -> LexConfig {
        let mut merged = self.clone();
        for kw in &other.keyword_set {
            merged.keyword_set.insert(kw.clone());
        }
        for (name, body) in &other.terminals {
            if !merged.terminals.iter().any(|(n, _)| n == name) {
                merged.terminals.push((name.clone(), body.clone()));
            }
        }
        merged.rebuild_keyword_index();
        merged
    }

    fn rebuild_keyword_index(&mut self) {
        self.keywords_by_len = self.keyword_set.iter().cloned().collect();
        self.keywords_by_len
            .sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    }

    pub fn is_keyword(&self, text: &str) -> bool {
        self.keyword_set.contains(text)
    }

    pub fn keyword_set(&self) -> &BTreeSet<String> {
        &self.keyword_set
    }

    pub fn has_terminal(&self, name: &str) -> bool {
        self.terminals.iter().any(|(n, _)| n == name)
            || BUILTIN_ORDER.contains(&name)
            || HIDDEN_TERMINALS.contains(&name)
    }

    /// Longest match of the named terminal at the start of `text`, in bytes.
    pub fn terminal_match(&self, name: &str, text: &str) -> Option<usize> {
        if let Some((_, Some(body))) = self.terminals.iter().find(|(n, _)| n == name) {
            return longest_body_match(body, text, self);
        }
        builtin_match(name, text)
    }

    /// Whether the named terminal matches `text` in full.
    pub fn terminal_accepts(&self, name: &str, text: &str) -> bool {
        self.terminal_match(name, text) == Some(text.len())
    }

    fn best_token_at(&self, rest: &str) -> Option<(TokenKind, usize)> {
        let mut best_terminal: Option<(String, usize)> = None;
        for (name, _) in &self.terminals {
            if let Some(len) = self.terminal_match(name, rest) {
                if best_terminal.as_ref().is_none_or(|(_, b)| len > *b) {
                    best_terminal = Some((name.clone(), len));
                }
            }
        }
        let keyword_len = self
            .keywords_by_len
            .iter()
            .find(|kw| rest.starts_with(kw.as_str()))
            .map(|kw| kw.len());
        match (keyword_len, best_terminal) {
            (Some(k), Some((_, t))) if k >= t => Some((TokenKind::Keyword, k)),
            (_, Some((name, t))) => Some((TokenKind::Terminal(name), t)),
            (Some(k), None) => Some((TokenKind::Keyword, k)),
            (None, None) => None,
        }
    }
}

/// How to treat unlexable input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexMode {
    /// Fail with [`LexError`].
    Strict,
    /// Consume one character as an [`TokenKind::Error`] token and continue.
    Lenient,
}

#[derive(Debug)]
pub(crate) struct RawLex {
    pub tokens: Vec<Token>,
    /// Leading trivia per token; the final entry is trailing trivia.
    pub trivia: Vec<Vec<TriviaPiece>>,
}

pub(crate) fn lex_raw(source: &str, config: &LexConfig, mode: LexMode) -> Result<RawLex, LexError> {
    let mut tokens = Vec::new();
    let mut trivia = Vec::new();
    let mut pos = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    loop {
        let mut pieces = Vec::new();
        loop {
            let rest = &source[pos..];
            if rest.is_empty() {
                break;
            }
            let ws_len = rest
                .char_indices()
                .find(|(_, c)| !c.is_whitespace())
                .map_or(rest.len(), |(i, _)| i);
            if ws_len > 0 {
                let text = &rest[..ws_len];
                pieces.push(TriviaPiece::Whitespace(text.to_string()));
                advance_position(text, &mut line, &mut col);
                pos += ws_len;
                continue;
            }
            if let Some(len) = config.terminal_match("SL_COMMENT", rest) {
                // Keep the trailing newline out of the comment so line
                // bookkeeping stays with whitespace trivia.
                let len = rest[..len].trim_end_matches(['\n', '\r']).len();
                let text = &rest[..len];
                pieces.push(TriviaPiece::LineComment(text.to_string()));
                advance_position(text, &mut line, &mut col);
                pos += len;
                continue;
            }
            if let Some(len) = config.terminal_match("ML_COMMENT", rest) {
                let text = &rest[..len];
                pieces.push(TriviaPiece::BlockComment(text.to_string()));
                advance_position(text, &mut line, &mut col);
                pos += len;
                continue;
            }
            break;
        }
        if pos >= source.len() {
            trivia.push(pieces);
            break;
        }
        let rest = &source[pos..];
        match config.best_token_at(rest) {
            Some((kind, len)) if len > 0 => {
                let text = &rest[..len];
                trivia.push(pieces);
                tokens.push(Token {
                    text: text.to_string(),
                    kind,
                    offset: pos,
                    line,
                    col,
                });
                advance_position(text, &mut line, &mut col);
                pos += len;
            }
            _ => match mode {
                LexMode::Strict => return Err(LexError { line, col }),
                LexMode::Lenient => {
                    let ch_len = rest.chars().next().map_or(1, |c| c.len_utf8());
                    let text = &rest[..ch_len];
                    trivia.push(pieces);
                    tokens.push(Token {
                        text: text.to_string(),
                        kind: TokenKind::Error,
                        offset: pos,
                        line,
                        col,
                    });
                    advance_position(text, &mut line, &mut col);
                    pos += ch_len;
                }
            },
        }
    }
    Ok(RawLex { tokens, trivia })
}

fn advance_position(text: &str, line: &mut u32, col: &mut u32) {
    for c in text.chars() {
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    }
}

/// Longest match (in bytes) of a terminal-rule body at the start of `text`.
fn longest_body_match(body: &BodyNode, text: &str, config: &LexConfig) -> Option<usize> {
    let ends = match_ends(body, text, 0, config, 0);
    ends.into_iter().filter(|&e| e > 0).max()
}

/// All end positions reachable by matching `node` starting at `pos`.
fn match_ends(
    node: &BodyNode,
    text: &str,
    pos: usize,
    config: &LexConfig,
    depth: u32,
) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    if depth > 32 {
        return out;
    }
    match node {
        BodyNode::Keyword(k) => {
            if text[pos..].starts_with(k.as_str()) {
                out.insert(pos + k.len());
            }
        }
        BodyNode::CharRange { lo, hi } => {
            if let Some(c) = text[pos..].chars().next() {
                if c >= *lo && c <= *hi {
                    out.insert(pos + c.len_utf8());
                }
            }
        }
        BodyNode::Wildcard => {
            if let Some(c) = text[pos..].chars().next() {
                out.insert(pos + c.len_utf8());
            }
        }
        BodyNode::NegatedToken(child) => {
            if let Some(c) = text[pos..].chars().next() {
                let child_ends = match_ends(child, text, pos, config, depth + 1);
                if child_ends.is_empty() {
                    out.insert(pos + c.len_utf8());
                }
            }
        }
        BodyNode::RuleCall(name) => {
            if let Some((_, Some(body))) = config.terminals.iter().find(|(n, _)| n == name) {
                out.extend(match_ends(body, text, pos, config, depth + 1));
            } else if let Some(len) = builtin_match(name, &text[pos..]) {
                out.insert(pos + len);
            }
        }
        BodyNode::Group(children) => {
            let mut positions = BTreeSet::from([pos]);
            for child in children {
                let mut next = BTreeSet::new();
                for p in positions {
                    next.extend(match_ends(child, text, p, config, depth + 1));
                }
                positions = next;
                if positions.is_empty() {
                    break;
                }
            }
            out = positions;
        }
        BodyNode::Alternatives(children) => {
            for child in children {
                out.extend(match_ends(child, text, pos, config, depth + 1));
            }
        }
        BodyNode::UnorderedGroup(children) => {
            // Terminal bodies rarely use `&`; approximate with both orders
            // for pairs and sequential order otherwise.
            if children.len() == 2 {
                for pair in [[0, 1], [1, 0]] {
                    let mid = match_ends(&children[pair[0]], text, pos, config, depth + 1);
                    for p in mid {
                        out.extend(match_ends(&children[pair[1]], text, p, config, depth + 1));
                    }
                }
            } else {
                out = match_ends(
                    &BodyNode::Group(children.clone()),
                    text,
                    pos,
                    config,
                    depth + 1,
                );
            }
        }
        BodyNode::Repeat { child, cardinality } => {
            use crate::grammar::Cardinality::*;
            let mut reachable = BTreeSet::from([pos]);
            let mut frontier = BTreeSet::from([pos]);
            while !frontier.is_empty() {
                let mut next = BTreeSet::new();
                for p in &frontier {
                    for e in match_ends(child, text, *p, config, depth + 1) {
                        if e > *p && !reachable.contains(&e) {
                            next.insert(e);
                        }
                    }
                }
                frontier = next;
                reachable.extend(frontier.iter().copied());
            }
            match cardinality {
                Optional | Star => out = reachable,
                Plus => {
                    out = reachable;
                    out.remove(&pos);
                    // One iteration may legitimately end where it started only
                    // if the child is nullable; re-add in that case.
                    if child.is_nullable() {
                        out.insert(pos);
                    }
                }
            }
        }
        BodyNode::Assignment { .. } | BodyNode::CrossReference { .. } => {}
    }
    out
}

/// Built-in terminal matchers, mirroring Xtext's standard terminals.
fn builtin_match(name: &str, text: &str) -> Option<usize> {
    match name {
        "ID" => {
            let mut chars = text.char_indices();
            match chars.next() {
                Some((_, c)) if c.is_alphabetic() || c == '_' => {}
                _ => return None,
            }
            let end = chars
                .find(|(_, c)| !(c.is_alphanumeric() || *c == '_'))
                .map_or(text.len(), |(i, _)| i);
            Some(end)
        }
        "INT" => {
            let end = text
                .char_indices()
                .find(|(_, c)| !c.is_ascii_digit())
                .map_or(text.len(), |(i, _)| i);
            (end > 0).then_some(end)
        }
        "STRING" => {
            let mut chars = text.char_indices();
            let quote = match chars.next() {
                Some((_, c @ ('"' | '\''))) => c,
                _ => return None,
            };
            let mut escaped = false;
            for (i, c) in chars {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == quote {
                    return Some(i + c.len_utf8());
                }
            }
            None
        }
        "WS" => {
            let end = text
                .char_indices()
                .find(|(_, c)| !c.is_whitespace())
                .map_or(text.len(), |(i, _)| i);
            (end > 0).then_some(end)
        }
        "SL_COMMENT" => {
            if !text.starts_with("//") {
                return None;
            }
            let end = text.find('\n').map_or(text.len(), |i| i + 1);
            Some(end)
        }
        "ML_COMMENT" => {
            if !text.starts_with("/*") {
                return None;
            }
            text[2..].find("*/").map(|i| i + 4)
        }
        _ => None,
    }
}
