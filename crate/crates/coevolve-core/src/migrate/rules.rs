//! Rule-based, trivia-preserving instance migration for a defined subset of
//! grammar changes: keyword renames, attribute deletions, terminator
//! additions and separator introductions. Everything else is refused with
//! [`RulesError::UnsupportedChange`] rather than guessed.
//!
//! Edits are planned against the accepting derivation of the instance under
//! the old grammar, so a keyword is only renamed where the parse actually
//! binds it as that keyword, never where an identical identifier happens to
//! occur.

use crate::diff::{ChangeOperation, ChangeSubject, GrammarChange, GrammarDelta, Impact};
use crate::grammar::{BodyNode, Cardinality, GrammarAst};
use crate::instance::{derive_instance, extract_human_info, LosslessInstance};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RulesError {
    #[error("instance does not conform to the old grammar")]
    NotConforming,
    #[error("unsupported change for rule-based migration: {detail}")]
    UnsupportedChange {
        detail: String,
        change: Box<GrammarChange>,
    },
    #[error("overlapping edits at token {index}")]
    Overlap { index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditKind {
    ReplaceToken { index: usize, text: String },
    DeleteToken { index: usize },
    InsertTextAfterToken { index: usize, text: String },
    DeleteLineRange { start_line: u32, end_line: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    #[serde(flatten)]
    pub kind: EditKind,
    /// Which grammar change produced this edit.
    pub reason: String,
}

/// Ordered, non-overlapping edit list for one instance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditScript {
    pub edits: Vec<Edit>,
    /// Original 1-based line numbers the script touches.
    pub touched_lines: BTreeSet<u32>,
}

/// Plans the in-situ edits that migrate `instance` across `delta`.
///
/// Non-breaking changes need no edits. Breaking changes must fall into the
/// supported subset; rule-level deletions with nested structure, structural
/// modifications and mandatory mid-body additions are reported as
/// unsupported.
pub fn plan_edits(
    instance: &LosslessInstance,
    delta: &GrammarDelta,
    old: &GrammarAst,
    new: &GrammarAst,
) -> Result<EditScript, RulesError> {
    let bound = derive_instance(instance, old).ok_or(RulesError::NotConforming)?;
    let comment_lines = extract_human_info(instance).comment_lines;

    let mut edits: Vec<Edit> = Vec::new();
    let mut deleted_spans: Vec<(usize, usize)> = Vec::new();

    for change in &delta.changes {
        match (change.operation, change.subject) {
            // Keyword text substitution at derivation-bound occurrences.
            (ChangeOperation::Rename | ChangeOperation::Modify, ChangeSubject::Keyword)
                if change.old_text.is_some() && change.new_text.is_some() =>
            {
                let path = change
                    .old_path
                    .as_ref()
                    .ok_or_else(|| unsupported(change))?;
                let new_text = change.new_text.clone().unwrap();
                for (&token, binding) in &bound.token_bindings {
                    if binding == path {
                        edits.push(Edit {
                            kind: EditKind::ReplaceToken {
                                index: token,
                                text: new_text.clone(),
                            },
                            reason: change.detail.clone(),
                        });
                    }
                }
            }
            (ChangeOperation::Rename, _) | (ChangeOperation::Add, _) => {}
            (ChangeOperation::Delete, ChangeSubject::Attribute | ChangeSubject::Keyword) => {
                let path = change
                    .old_path
                    .as_ref()
                    .ok_or_else(|| unsupported(change))?;
                for (tag, span) in &bound.tagged_spans {
                    if tag == path {
                        plan_span_deletion(
                            instance,
                            *span,
                            &comment_lines,
                            &change.detail,
                            &mut edits,
                        );
                        deleted_spans.push(*span);
                    }
                }
            }
            (ChangeOperation::Delete, ChangeSubject::Rule) => {
                let occurrences = bound
                    .rule_spans
                    .get(&change.rule_name)
                    .cloned()
                    .unwrap_or_default();
                let uncovered: Vec<(usize, usize)> = occurrences
                    .into_iter()
                    .filter(|span| !deleted_spans.iter().any(|d| d.0 <= span.0 && span.1 <= d.1))
                    .collect();
                if !uncovered.is_empty() {
                    return Err(unsupported(change));
                }
            }
            (ChangeOperation::Modify, _) => {
                if change.impact == Impact::NonBreaking {
                    continue;
                }
                if let Some(keyword) = terminator_addition(change, new) {
                    let spans = bound
                        .rule_spans
                        .get(&change.rule_name)
                        .cloned()
                        .unwrap_or_default();
                    for span in spans {
                        if span.1 > span.0 {
                            edits.push(Edit {
                                kind: EditKind::InsertTextAfterToken {
                                    index: span.1 - 1,
                                    text: keyword.clone(),
                                },
                                reason: change.detail.clone(),
                            });
                        }
                    }
                } else if let Some(separator) = separator_introduction(change) {
                    let unit_path = change
                        .old_path
                        .as_ref()
                        .ok_or_else(|| unsupported(change))?
                        .child(0);
                    let units: Vec<(usize, usize)> = bound
                        .tagged_spans
                        .iter()
                        .filter(|(tag, _)| *tag == unit_path)
                        .map(|(_, span)| *span)
                        .collect();
                    let rule_spans = bound
                        .rule_spans
                        .get(&change.rule_name)
                        .cloned()
                        .unwrap_or_default();
                    for rule_span in rule_spans {
                        let mut inside: Vec<(usize, usize)> = units
                            .iter()
                            .copied()
                            .filter(|u| rule_span.0 <= u.0 && u.1 <= rule_span.1)
                            .collect();
                        inside.sort();
                        inside.dedup();
                        for unit in inside.iter().take(inside.len().saturating_sub(1)) {
                            if unit.1 > unit.0 {
                                let index = unit.1 - 1;
                                // A single following space unless whitespace
                                // already follows.
                                let end = instance.tokens[index].end();
                                let needs_space = instance
                                    .source
                                    .as_bytes()
                                    .get(end)
                                    .is_some_and(|b| !b.is_ascii_whitespace());
                                let text = if needs_space {
                                    format!("{separator} ")
                                } else {
                                    separator.clone()
                                };
                                edits.push(Edit {
                                    kind: EditKind::InsertTextAfterToken { index, text },
                                    reason: change.detail.clone(),
                                });
                            }
                        }
                    }
                } else {
                    return Err(unsupported(change));
                }
            }
        }
    }

    build_script(instance, edits)
}

fn unsupported(change: &GrammarChange) -> RulesError {
    RulesError::UnsupportedChange {
        detail: change.detail.clone(),
        change: Box::new(change.clone()),
    }
}

/// Matches `Modify` changes that append a mandatory keyword at the end of
/// the rule body (a terminator such as `';'`).
fn terminator_addition(change: &GrammarChange, new: &GrammarAst) -> Option<String> {
    if change.old_fragment.is_some() {
        return None;
    }
    let BodyNode::Keyword(keyword) = change.new_fragment.as_ref()? else {
        return None;
    };
    let steps = &change.new_path.as_ref()?.steps;
    let body = &new.rule(&change.rule_name)?.body;
    let BodyNode::Group(children) = body else {
        return None;
    };
    (steps.len() == 1 && steps[0] == children.len() - 1).then(|| keyword.clone())
}

/// Matches `Modify` changes that turn `unit*` into `(unit (sep unit)*)?`:
/// a separator introduced between siblings.
fn separator_introduction(change: &GrammarChange) -> Option<String> {
    let old = change.old_fragment.as_ref()?;
    let new = change.new_fragment.as_ref()?;
    let BodyNode::Repeat {
        child: old_unit,
        cardinality: Cardinality::Star,
    } = old
    else {
        return None;
    };
    let BodyNode::Repeat {
        child: wrapped,
        cardinality: Cardinality::Optional,
    } = new
    else {
        return None;
    };
    let BodyNode::Group(parts) = wrapped.as_ref() else {
        return None;
    };
    let [first, rest] = parts.as_slice() else {
        return None;
    };
    if first != old_unit.as_ref() {
        return None;
    }
    let BodyNode::Repeat {
        child: rest_unit,
        cardinality: Cardinality::Star,
    } = rest
    else {
        return None;
    };
    let BodyNode::Group(sep_parts) = rest_unit.as_ref() else {
        return None;
    };
    let [BodyNode::Keyword(sep), again] = sep_parts.as_slice() else {
        return None;
    };
    (again == old_unit.as_ref()).then(|| sep.clone())
}

/// Deletes a token span, taking whole lines when a line's tokens are all in
/// the span and it carries no comment.
fn plan_span_deletion(
    instance: &LosslessInstance,
    span: (usize, usize),
    comment_lines: &BTreeSet<u32>,
    reason: &str,
    edits: &mut Vec<Edit>,
) {
    let span_tokens: BTreeSet<usize> = (span.0..span.1).collect();
    let mut lines = BTreeSet::new();
    for &t in &span_tokens {
        lines.extend(instance.token_lines(t));
    }
    let mut whole_lines: Vec<u32> = Vec::new();
    let mut token_deletes: BTreeSet<usize> = BTreeSet::new();
    for line in lines {
        let on_line = instance.tokens_on_line(line);
        let fully_covered = on_line.iter().all(|t| span_tokens.contains(t));
        if fully_covered && !comment_lines.contains(&line) {
            whole_lines.push(line);
        } else {
            token_deletes.extend(on_line.into_iter().filter(|t| span_tokens.contains(t)));
        }
    }
    // Contiguous whole lines collapse into one range edit.
    let mut i = 0;
    while i < whole_lines.len() {
        let start = whole_lines[i];
        let mut end = start;
        while i + 1 < whole_lines.len() && whole_lines[i + 1] == end + 1 {
            i += 1;
            end += 1;
        }
        edits.push(Edit {
            kind: EditKind::DeleteLineRange {
                start_line: start,
                end_line: end,
            },
            reason: reason.to_string(),
        });
        i += 1;
    }
    for index in token_deletes {
        edits.push(Edit {
            kind: EditKind::DeleteToken { index },
            reason: reason.to_string(),
        });
    }
}

fn build_script(
    instance: &LosslessInstance,
    mut edits: Vec<Edit>,
) -> Result<EditScript, RulesError> {
    edits.sort_by_key(|e| edit_sort_key(instance, e));
    edits.dedup();
    let mut touched_lines = BTreeSet::new();
    for edit in &edits {
        match &edit.kind {
            EditKind::ReplaceToken { index, .. }
            | EditKind::DeleteToken { index }
            | EditKind::InsertTextAfterToken { index, .. } => {
                touched_lines.extend(instance.token_lines(*index));
            }
            EditKind::DeleteLineRange {
                start_line,
                end_line,
            } => {
                touched_lines.extend(*start_line..=*end_line);
            }
        }
    }
    let script = EditScript {
        edits,
        touched_lines,
    };
    check_overlaps(instance, &script)?;
    Ok(script)
}

fn edit_sort_key(instance: &LosslessInstance, edit: &Edit) -> (usize, usize, u8) {
    let (range, rank) = edit_byte_range(instance, edit);
    (range.0, range.1, rank)
}

/// Byte range an edit occupies, plus a tie-break rank.
fn edit_byte_range(instance: &LosslessInstance, edit: &Edit) -> ((usize, usize), u8) {
    match &edit.kind {
        EditKind::ReplaceToken { index, .. } => {
            let t = &instance.tokens[*index];
            ((t.offset, t.end()), 0)
        }
        EditKind::DeleteToken { index } => {
            let t = &instance.tokens[*index];
            ((t.offset, t.end()), 0)
        }
        EditKind::InsertTextAfterToken { index, .. } => {
            let t = &instance.tokens[*index];
            ((t.end(), t.end()), 1)
        }
        EditKind::DeleteLineRange {
            start_line,
            end_line,
        } => {
            let (start, _) = instance.line_byte_range(*start_line);
            let (_, end) = instance.line_byte_range(*end_line);
            ((start, end), 0)
        }
    }
}

fn check_overlaps(instance: &LosslessInstance, script: &EditScript) -> Result<(), RulesError> {
    let ranges: Vec<(usize, usize)> = script
        .edits
        .iter()
        .map(|e| edit_byte_range(instance, e).0)
        .collect();
    for window in ranges.windows(2) {
        let (a, b) = (window[0], window[1]);
        if a.0 < b.1 && b.0 < a.1 {
            return Err(RulesError::Overlap { index: b.0 });
        }
    }
    Ok(())
}

/// Applies a script planned for this instance, returning the migrated text.
///
/// Bytes outside edit locations are untouched; deleting a token also absorbs
/// doubled whitespace at the seam.
pub fn apply_edits(instance: &LosslessInstance, script: &EditScript) -> Result<String, RulesError> {
    check_overlaps(instance, script)?;
    let source = instance.source.as_bytes();
    let mut patches: Vec<((usize, usize), String)> = Vec::new();
    for edit in &script.edits {
        let patch = match &edit.kind {
            EditKind::ReplaceToken { index, text } => {
                let t = &instance.tokens[*index];
                ((t.offset, t.end()), text.clone())
            }
            EditKind::InsertTextAfterToken { index, text } => {
                let t = &instance.tokens[*index];
                ((t.end(), t.end()), text.clone())
            }
            EditKind::DeleteToken { index } => {
                let t = &instance.tokens[*index];
                let mut end = t.end();
                if t.offset > 0 && matches!(source[t.offset - 1], b' ' | b'\t') {
                    while end < source.len() && matches!(source[end], b' ' | b'\t') {
                        end += 1;
                    }
                }
                ((t.offset, end), String::new())
            }
            EditKind::DeleteLineRange {
                start_line,
                end_line,
            } => {
                let (start, _) = instance.line_byte_range(*start_line);
                let (_, end) = instance.line_byte_range(*end_line);
                ((start, end), String::new())
            }
        };
        patches.push(patch);
    }
    patches.sort_by_key(|(range, _)| *range);
    let mut out = instance.source.clone();
    for ((start, end), replacement) in patches.into_iter().rev() {
        out.replace_range(start..end, &replacement);
    }
    Ok(out)
}
