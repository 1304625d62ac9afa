//! Extraction of human-oriented information: comments and layout.

use super::lexer::TokenKind;
use super::LosslessInstance;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Per-line layout facts used by the preservation metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineSignature {
    /// Leading whitespace, byte-exact.
    pub indentation: String,
    /// Comment text segments on this line, in order.
    pub comments: Vec<String>,
    pub is_blank: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HumanInfoProfile {
    /// Lines intersecting a comment trivia span.
    pub comment_lines: BTreeSet<u32>,
    /// Lines carrying distinguished format information: blank lines, lines
    /// containing a tab, lines whose indentation does not repeat the file's
    /// dominant unit, and lines holding structure the grammar would
    /// conventionally spread over several lines (a block brace keyword with
    /// content on the same side of the line).
    pub format_lines: BTreeSet<u32>,
    /// Signature for every source line.
    pub per_line_signature: BTreeMap<u32, LineSignature>,
}

/// Builds the comment/format profile of an instance.
pub fn extract_human_info(instance: &LosslessInstance) -> HumanInfoProfile {
    let line_count = instance.line_count() as u32;
    let mut per_line_signature = BTreeMap::new();
    for n in 1..=line_count {
        let text = instance.line_text(n);
        let indent_end = text
            .char_indices()
            .find(|(_, c)| !matches!(c, ' ' | '\t'))
            .map_or(text.len(), |(i, _)| i);
        per_line_signature.insert(
            n,
            LineSignature {
                indentation: text[..indent_end].to_string(),
                comments: Vec::new(),
                is_blank: text.trim().is_empty(),
            },
        );
    }

    // Comment trivia, split per line for multi-line block comments.
    let mut comment_lines = BTreeSet::new();
    let mut offset_cursor = 0usize;
    for (i, pieces) in instance.trivia.iter().enumerate() {
        let mut at = match instance.tokens.get(i) {
            Some(tok) => {
                let total: usize = pieces.iter().map(|p| p.text().len()).sum();
                tok.offset - total
            }
            None => offset_cursor,
        };
        for piece in pieces {
            if piece.is_comment() {
                let first_line = instance.line_of_offset(at);
                for (offset, segment) in piece.text().split('\n').enumerate() {
                    let line = first_line + offset as u32;
                    let trimmed = segment.trim_end_matches('\r');
                    if !trimmed.trim().is_empty() {
                        comment_lines.insert(line);
                        if let Some(sig) = per_line_signature.get_mut(&line) {
                            sig.comments.push(trimmed.trim().to_string());
                        }
                    }
                }
            }
            at += piece.text().len();
        }
        if let Some(tok) = instance.tokens.get(i) {
            offset_cursor = tok.end();
        } else {
            offset_cursor = at;
        }
    }

    let dominant = dominant_indent_unit(&per_line_signature);
    let mut format_lines = BTreeSet::new();
    for (&n, sig) in &per_line_signature {
        if sig.is_blank || sig.indentation.contains('\t') {
            format_lines.insert(n);
            continue;
        }
        if !sig.indentation.is_empty() && !is_unit_multiple(&sig.indentation, &dominant) {
            format_lines.insert(n);
            continue;
        }
        if line_has_compressed_block(instance, n) {
            format_lines.insert(n);
        }
    }

    HumanInfoProfile {
        comment_lines,
        format_lines,
        per_line_signature,
    }
}

/// Most common leading-whitespace width among space-indented lines; falls
/// back to four spaces.
fn dominant_indent_unit(signatures: &BTreeMap<u32, LineSignature>) -> String {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for sig in signatures.values() {
        if sig.is_blank || sig.indentation.is_empty() || sig.indentation.contains('\t') {
            continue;
        }
        *counts.entry(sig.indentation.len()).or_default() += 1;
    }
    let unit = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(len, _)| *len)
        .unwrap_or(4);
    " ".repeat(unit)
}

fn is_unit_multiple(indent: &str, unit: &str) -> bool {
    if unit.is_empty() {
        return indent.is_empty();
    }
    indent.len().is_multiple_of(unit.len()) && indent.chars().all(|c| c == ' ')
}

/// A `{` keyword followed by tokens on the same line, or a `}` keyword with
/// tokens before it: a block the grammar lays out over several lines has been
/// compressed onto one.
fn line_has_compressed_block(instance: &LosslessInstance, line: u32) -> bool {
    let token_ids = instance.tokens_on_line(line);
    for (pos, &idx) in token_ids.iter().enumerate() {
        let token = &instance.tokens[idx];
        if token.kind != TokenKind::Keyword {
            continue;
        }
        if token.text == "{" && pos + 1 < token_ids.len() {
            return true;
        }
        if token.text == "}" && pos > 0 {
            return true;
        }
    }
    false
}
