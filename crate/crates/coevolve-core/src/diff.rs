//! Grammar differencing: classified change lists between two grammar
//! versions, along two dimensions, operation type (add / delete / rename /
//! modify) and impact (breaking / non-breaking).
//!
//! Granularity: when the bodies of a rule align under a tree-matching pass,
//! changes are reported per keyword or assignment; otherwise the rule gets a
//! single whole-rule modify. A delete+add pair whose bodies are identical up
//! to one renamed identifier or keyword collapses into a rename.

use crate::grammar::{body_snippet, BodyNode, GrammarAst, NodePath};
use crate::instance::rule_accepts_id;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChangeOperation {
    Add,
    Delete,
    Rename,
    Modify,
}

impl fmt::Display for ChangeOperation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ChangeOperation::Add => "Add",
            ChangeOperation::Delete => "Delete",
            ChangeOperation::Rename => "Rename",
            ChangeOperation::Modify => "Modify",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChangeSubject {
    Rule,
    Attribute,
    Keyword,
}

impl fmt::Display for ChangeSubject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ChangeSubject::Rule => "rule",
            ChangeSubject::Attribute => "attribute",
            ChangeSubject::Keyword => "keyword",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Impact {
    Breaking,
    NonBreaking,
}

/// One classified change.
///
/// Beyond the reportable fields, a change carries the grammar fragments and
/// body paths involved so downstream consumers (impact classification, the
/// rule-based migrator) can work without re-diffing text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrammarChange {
    pub operation: ChangeOperation,
    pub subject: ChangeSubject,
    pub rule_name: String,
    pub detail: String,
    pub impact: Impact,
    /// Renamed/removed text (keyword text or rule name), when applicable.
    pub old_text: Option<String>,
    /// Replacement text, when applicable.
    pub new_text: Option<String>,
    /// Location of the changed node in the old rule body.
    pub old_path: Option<NodePath>,
    /// Location of the changed node in the new rule body.
    pub new_path: Option<NodePath>,
    pub old_fragment: Option<BodyNode>,
    pub new_fragment: Option<BodyNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrammarDelta {
    pub changes: Vec<GrammarChange>,
    pub total: usize,
    pub breaking_count: usize,
    pub non_breaking_count: usize,
}

impl GrammarDelta {
    fn new(changes: Vec<GrammarChange>) -> Self {
        let breaking_count = changes
            .iter()
            .filter(|c| c.impact == Impact::Breaking)
            .count();
        GrammarDelta {
            total: changes.len(),
            breaking_count,
            non_breaking_count: changes.len() - breaking_count,
            changes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeltaSummary {
    pub total: usize,
    pub breaking: usize,
    pub non_breaking: usize,
    /// Operation types present, by descending frequency; ties broken by the
    /// enum order Add < Delete < Rename < Modify.
    pub primary_operation_types: Vec<ChangeOperation>,
}

/// Frequency-ordered summary in the shape of the per-case change tallies.
pub fn summarize_delta(delta: &GrammarDelta) -> DeltaSummary {
    let mut counts: BTreeMap<ChangeOperation, usize> = BTreeMap::new();
    for change in &delta.changes {
        *counts.entry(change.operation).or_default() += 1;
    }
    let mut ops: Vec<(ChangeOperation, usize)> = counts.into_iter().collect();
    ops.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    DeltaSummary {
        total: delta.total,
        breaking: delta.breaking_count,
        non_breaking: delta.non_breaking_count,
        primary_operation_types: ops.into_iter().map(|(op, _)| op).collect(),
    }
}

/// Computes the classified change list from `old` to `new`.
pub fn diff_grammars(old: &GrammarAst, new: &GrammarAst) -> GrammarDelta {
    let mut changes: Vec<GrammarChange> = Vec::new();

    let old_names: Vec<&str> = old.rules.iter().map(|r| r.name.as_str()).collect();
    let new_names: Vec<&str> = new.rules.iter().map(|r| r.name.as_str()).collect();
    let mut deleted: Vec<&str> = old_names
        .iter()
        .filter(|n| !new_names.contains(n))
        .copied()
        .collect();
    let mut added: Vec<&str> = new_names
        .iter()
        .filter(|n| !old_names.contains(n))
        .copied()
        .collect();

    // Rename collapse: a deleted/added rule pair whose bodies are identical
    // after substituting exactly one identifier or keyword string.
    type RenamePair = (String, String, Option<(String, String)>);
    let mut rename_map: BTreeMap<String, String> = BTreeMap::new();
    let mut rename_pairs: Vec<RenamePair> = Vec::new();
    deleted.retain(|d_name| {
        let d_rule = old.rule(d_name).unwrap();
        for (idx, a_name) in added.iter().enumerate() {
            let a_rule = new.rule(a_name).unwrap();
            if d_rule.kind != a_rule.kind {
                continue;
            }
            if let Some(substitution) = one_string_substitution(&d_rule.body, &a_rule.body) {
                rename_pairs.push((d_name.to_string(), a_name.to_string(), substitution));
                rename_map.insert(d_name.to_string(), a_name.to_string());
                added.remove(idx);
                return false;
            }
        }
        true
    });

    for (old_name, new_name, substitution) in &rename_pairs {
        let change = GrammarChange {
            operation: ChangeOperation::Rename,
            subject: ChangeSubject::Rule,
            rule_name: old_name.clone(),
            detail: format!("rule `{old_name}` renamed to `{new_name}`"),
            impact: Impact::NonBreaking,
            old_text: Some(old_name.clone()),
            new_text: Some(new_name.clone()),
            old_path: None,
            new_path: None,
            old_fragment: None,
            new_fragment: None,
        };
        changes.push(finish(change, old, new));
        if let Some((from, to)) = substitution {
            // The substituted string was a keyword: the concrete syntax
            // changed too, one rename change per affected rule.
            if keyword_in_body(&old.rule(old_name).unwrap().body, from) {
                let change = GrammarChange {
                    operation: ChangeOperation::Rename,
                    subject: ChangeSubject::Keyword,
                    rule_name: old_name.clone(),
                    detail: format!("keyword '{from}' renamed to '{to}'"),
                    impact: Impact::Breaking,
                    old_text: Some(from.clone()),
                    new_text: Some(to.clone()),
                    old_path: keyword_path(&old.rule(old_name).unwrap().body, old_name, from),
                    new_path: None,
                    old_fragment: None,
                    new_fragment: None,
                };
                changes.push(finish(change, old, new));
            }
        }
    }

    for name in &deleted {
        let change = GrammarChange {
            operation: ChangeOperation::Delete,
            subject: ChangeSubject::Rule,
            rule_name: name.to_string(),
            detail: format!("rule `{name}` deleted"),
            impact: Impact::Breaking,
            old_text: Some(name.to_string()),
            new_text: None,
            old_path: Some(NodePath::root(name)),
            new_path: None,
            old_fragment: Some(old.rule(name).unwrap().body.clone()),
            new_fragment: None,
        };
        changes.push(finish(change, old, new));
    }
    for name in &added {
        let change = GrammarChange {
            operation: ChangeOperation::Add,
            subject: ChangeSubject::Rule,
            rule_name: name.to_string(),
            detail: format!("rule `{name}` added"),
            impact: Impact::NonBreaking,
            old_text: None,
            new_text: Some(name.to_string()),
            old_path: None,
            new_path: Some(NodePath::root(name)),
            old_fragment: None,
            new_fragment: Some(new.rule(name).unwrap().body.clone()),
        };
        changes.push(finish(change, old, new));
    }

    // Common rules (renamed rules compare under their new name).
    for old_rule in &old.rules {
        let new_name = rename_map
            .get(&old_rule.name)
            .cloned()
            .unwrap_or_else(|| old_rule.name.clone());
        let Some(new_rule) = new.rule(&new_name) else {
            continue;
        };
        if rename_map.contains_key(&old_rule.name) {
            // Body equality modulo the one substitution is established by the
            // rename collapse itself.
            continue;
        }
        let old_body = apply_rename_map(&old_rule.body, &rename_map);
        if old_body == new_rule.body {
            continue;
        }
        let mut body_changes = Vec::new();
        diff_bodies(
            &old_rule.name,
            &old_body,
            &new_rule.body,
            &NodePath::root(&old_rule.name),
            &NodePath::root(&new_rule.name),
            new,
            &mut body_changes,
        );
        for change in body_changes {
            changes.push(finish(change, old, new));
        }
    }

    GrammarDelta::new(changes)
}

/// Applies the decision procedure for breaking-ness to one change, in
/// isolation: additions of optional or alternative content do not break;
/// deletions of constructs reachable from the entry rule break; keyword
/// renames break; modifications break unless the old fragment is a
/// specialization of the new one (the language can only widen).
pub fn classify_impact(change: &GrammarChange, old: &GrammarAst, new: &GrammarAst) -> Impact {
    match change.operation {
        ChangeOperation::Add => match (&change.old_fragment, &change.new_fragment) {
            // In-rule addition of mandatory content narrows the language.
            (None, Some(fragment))
                if change.subject != ChangeSubject::Rule && !fragment.is_nullable() =>
            {
                Impact::Breaking
            }
            _ => Impact::NonBreaking,
        },
        ChangeOperation::Delete => {
            if old.reachable_rules().contains(&change.rule_name) {
                Impact::Breaking
            } else {
                Impact::NonBreaking
            }
        }
        ChangeOperation::Rename => match change.subject {
            // Rule names never appear in instance text; keyword renames do.
            ChangeSubject::Keyword => Impact::Breaking,
            _ => Impact::NonBreaking,
        },
        ChangeOperation::Modify => {
            let widened = match (&change.old_fragment, &change.new_fragment) {
                (Some(o), Some(n)) => widens(o, n, new, 4),
                _ => {
                    let o = old.rule(&change.rule_name).map(|r| &r.body);
                    let n = new.rule(&change.rule_name).map(|r| &r.body);
                    match (o, n) {
                        (Some(o), Some(n)) => widens(o, n, new, 4),
                        _ => false,
                    }
                }
            };
            if widened {
                Impact::NonBreaking
            } else {
                Impact::Breaking
            }
        }
    }
}

fn finish(mut change: GrammarChange, old: &GrammarAst, new: &GrammarAst) -> GrammarChange {
    change.impact = classify_impact(&change, old, new);
    change
}

fn snippet(node: &BodyNode) -> String {
    body_snippet(node)
}

/// Fine-grained body diff; appends changes for the rule `rule`.
fn diff_bodies(
    rule: &str,
    old: &BodyNode,
    new: &BodyNode,
    old_path: &NodePath,
    new_path: &NodePath,
    new_ast: &GrammarAst,
    out: &mut Vec<GrammarChange>,
) {
    if old == new {
        return;
    }
    // Single-leaf substitution inside an otherwise identical body.
    if let Some(edit) = one_leaf_edit(old, new, old_path, new_path) {
        out.push(leaf_change(rule, edit, new_ast));
        return;
    }
    // Container alignment.
    let old_children = container_children(old);
    let new_children = container_children(new);
    match (old_children, new_children) {
        (Some((old_kind, old_items)), new_side) => {
            let new_items: Vec<(usize, &BodyNode)> = match new_side {
                Some((new_kind, items)) if new_kind == old_kind => items,
                _ if matches!(
                    old_kind,
                    ContainerKind::Alternatives | ContainerKind::Unordered
                ) =>
                {
                    vec![(0, new)]
                }
                _ => {
                    out.push(replaced_change(rule, old, new, old_path, new_path, new_ast));
                    return;
                }
            };
            align_children(
                rule, old_kind, &old_items, &new_items, old_path, new_path, new_ast, out,
            );
        }
        (None, Some((_, new_items))) => {
            // A single node became a container; if the old node survives as
            // one of the new children, report the additions around it.
            if new_items.iter().any(|(_, n)| *n == old) {
                align_children(
                    rule,
                    ContainerKind::Group,
                    &[(0, old)],
                    &new_items,
                    old_path,
                    new_path,
                    new_ast,
                    out,
                );
            } else {
                out.push(replaced_change(rule, old, new, old_path, new_path, new_ast));
            }
        }
        (None, None) => {
            out.push(replaced_change(rule, old, new, old_path, new_path, new_ast));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ContainerKind {
    Group,
    Alternatives,
    Unordered,
}

fn container_children(node: &BodyNode) -> Option<(ContainerKind, Vec<(usize, &BodyNode)>)> {
    let (kind, children) = match node {
        BodyNode::Group(c) => (ContainerKind::Group, c),
        BodyNode::Alternatives(c) => (ContainerKind::Alternatives, c),
        BodyNode::UnorderedGroup(c) => (ContainerKind::Unordered, c),
        _ => return None,
    };
    Some((kind, children.iter().enumerate().collect()))
}

/// Aligns two child lists: exact matches first, then pairs equal up to one
/// leaf edit (recursed), leftovers reported as additions and removals. If
/// nothing aligns at all the whole container counts as rewritten.
#[allow(clippy::too_many_arguments)]
fn align_children(
    rule: &str,
    kind: ContainerKind,
    old_items: &[(usize, &BodyNode)],
    new_items: &[(usize, &BodyNode)],
    old_path: &NodePath,
    new_path: &NodePath,
    new_ast: &GrammarAst,
    out: &mut Vec<GrammarChange>,
) {
    let mut old_matched = vec![false; old_items.len()];
    let mut new_matched = vec![false; new_items.len()];

    // Pass 1: structural equality, in order.
    let mut search_from = 0;
    for (oi, (_, old_child)) in old_items.iter().enumerate() {
        let start = if kind == ContainerKind::Group {
            search_from
        } else {
            0
        };
        for ni in start..new_items.len() {
            if !new_matched[ni] && new_items[ni].1 == *old_child {
                old_matched[oi] = true;
                new_matched[ni] = true;
                if kind == ContainerKind::Group {
                    search_from = ni + 1;
                }
                break;
            }
        }
    }

    // Pass 2: one-leaf-edit pairs among the leftovers.
    let mut edit_pairs: Vec<(usize, usize)> = Vec::new();
    for oi in 0..old_items.len() {
        if old_matched[oi] {
            continue;
        }
        for ni in 0..new_items.len() {
            if new_matched[ni] {
                continue;
            }
            let o_child_path = old_path.child(old_items[oi].0);
            let n_child_path = new_path.child(new_items[ni].0);
            if one_leaf_edit(
                old_items[oi].1,
                new_items[ni].1,
                &o_child_path,
                &n_child_path,
            )
            .is_some()
            {
                old_matched[oi] = true;
                new_matched[ni] = true;
                edit_pairs.push((oi, ni));
                break;
            }
        }
    }

    // Pass 3: positional pairing of remaining leftovers in groups (a child
    // replaced in place), provided at least one anchor matched.
    let exact_matches = old_matched.iter().filter(|m| **m).count() - edit_pairs.len();
    let mut replaced_pairs: Vec<(usize, usize)> = Vec::new();
    if kind == ContainerKind::Group && exact_matches > 0 {
        let old_left: Vec<usize> = (0..old_items.len()).filter(|&i| !old_matched[i]).collect();
        let new_left: Vec<usize> = (0..new_items.len()).filter(|&i| !new_matched[i]).collect();
        for (&oi, &ni) in old_left.iter().zip(new_left.iter()) {
            old_matched[oi] = true;
            new_matched[ni] = true;
            replaced_pairs.push((oi, ni));
        }
    }

    if exact_matches == 0 && edit_pairs.is_empty() && replaced_pairs.is_empty() {
        // Nothing aligned: one whole-container modify.
        let old_node = rebuild(kind, old_items);
        let new_node = rebuild_any(new_items);
        out.push(replaced_change(
            rule, &old_node, &new_node, old_path, new_path, new_ast,
        ));
        return;
    }

    for (oi, ni) in edit_pairs {
        let (o_idx, o_child) = old_items[oi];
        let (n_idx, n_child) = new_items[ni];
        diff_bodies(
            rule,
            o_child,
            n_child,
            &old_path.child(o_idx),
            &new_path.child(n_idx),
            new_ast,
            out,
        );
    }
    for (oi, ni) in replaced_pairs {
        let (o_idx, o_child) = old_items[oi];
        let (n_idx, n_child) = new_items[ni];
        out.push(replaced_change(
            rule,
            o_child,
            n_child,
            &old_path.child(o_idx),
            &new_path.child(n_idx),
            new_ast,
        ));
    }
    for (oi, matched) in old_matched.iter().enumerate() {
        if !matched {
            let (o_idx, o_child) = old_items[oi];
            out.push(removed_child_change(rule, o_child, &old_path.child(o_idx)));
        }
    }
    for (ni, matched) in new_matched.iter().enumerate() {
        if !matched {
            let (n_idx, n_child) = new_items[ni];
            out.push(added_child_change(
                rule,
                kind,
                n_child,
                &new_path.child(n_idx),
            ));
        }
    }
}

fn rebuild(kind: ContainerKind, items: &[(usize, &BodyNode)]) -> BodyNode {
    let children: Vec<BodyNode> = items.iter().map(|(_, n)| (*n).clone()).collect();
    match kind {
        ContainerKind::Group => BodyNode::group(children),
        ContainerKind::Alternatives => BodyNode::alternatives(children),
        ContainerKind::Unordered => BodyNode::unordered(children),
    }
}

fn rebuild_any(items: &[(usize, &BodyNode)]) -> BodyNode {
    BodyNode::group(items.iter().map(|(_, n)| (*n).clone()).collect())
}

fn subject_of(node: &BodyNode) -> ChangeSubject {
    let mut has_assignment = false;
    node.walk(&mut |n| {
        if matches!(n, BodyNode::Assignment { .. }) {
            has_assignment = true;
        }
    });
    if has_assignment {
        ChangeSubject::Attribute
    } else if matches!(node, BodyNode::Keyword(_)) {
        ChangeSubject::Keyword
    } else {
        ChangeSubject::Rule
    }
}

fn feature_of(node: &BodyNode) -> Option<String> {
    let mut feature = None;
    node.walk(&mut |n| {
        if feature.is_none() {
            if let BodyNode::Assignment { feature: f, .. } = n {
                feature = Some(f.clone());
            }
        }
    });
    feature
}

fn removed_child_change(rule: &str, child: &BodyNode, path: &NodePath) -> GrammarChange {
    let subject = subject_of(child);
    let detail = match subject {
        ChangeSubject::Attribute => format!(
            "attribute `{}` deleted (`{}`)",
            feature_of(child).unwrap_or_default(),
            snippet(child)
        ),
        ChangeSubject::Keyword => format!("keyword {} deleted", snippet(child)),
        ChangeSubject::Rule => format!("`{}` deleted from the rule body", snippet(child)),
    };
    GrammarChange {
        operation: ChangeOperation::Delete,
        subject,
        rule_name: rule.to_string(),
        detail,
        impact: Impact::Breaking,
        old_text: match child {
            BodyNode::Keyword(k) => Some(k.clone()),
            _ => feature_of(child),
        },
        new_text: None,
        old_path: Some(path.clone()),
        new_path: None,
        old_fragment: Some(child.clone()),
        new_fragment: None,
    }
}

fn added_child_change(
    rule: &str,
    kind: ContainerKind,
    child: &BodyNode,
    path: &NodePath,
) -> GrammarChange {
    let subject = subject_of(child);
    let optional = child.is_nullable() || kind == ContainerKind::Alternatives;
    let what = match subject {
        ChangeSubject::Attribute => format!(
            "attribute `{}` (`{}`)",
            feature_of(child).unwrap_or_default(),
            snippet(child)
        ),
        ChangeSubject::Keyword => format!("keyword {}", snippet(child)),
        ChangeSubject::Rule => format!("`{}`", snippet(child)),
    };
    let detail = if kind == ContainerKind::Alternatives {
        format!("alternative {what} added")
    } else if optional {
        format!("optional {what} added")
    } else {
        format!("mandatory {what} added")
    };
    GrammarChange {
        // In-rule content changes are modifications of the rule's shape;
        // only whole rules count as Add.
        operation: ChangeOperation::Modify,
        subject,
        rule_name: rule.to_string(),
        detail,
        impact: if optional {
            Impact::NonBreaking
        } else {
            Impact::Breaking
        },
        old_text: None,
        new_text: match child {
            BodyNode::Keyword(k) => Some(k.clone()),
            _ => feature_of(child),
        },
        old_path: None,
        new_path: Some(path.clone()),
        old_fragment: None,
        new_fragment: Some(child.clone()),
    }
}

fn replaced_change(
    rule: &str,
    old: &BodyNode,
    new: &BodyNode,
    old_path: &NodePath,
    new_path: &NodePath,
    _new_ast: &GrammarAst,
) -> GrammarChange {
    GrammarChange {
        operation: ChangeOperation::Modify,
        subject: subject_of(old),
        rule_name: rule.to_string(),
        detail: format!("`{}` changed to `{}`", snippet(old), snippet(new)),
        impact: Impact::Breaking,
        old_text: None,
        new_text: None,
        old_path: Some(old_path.clone()),
        new_path: Some(new_path.clone()),
        old_fragment: Some(old.clone()),
        new_fragment: Some(new.clone()),
    }
}

/// A single leaf-level edit between two otherwise structurally equal bodies.
#[derive(Debug, Clone)]
struct LeafEdit {
    kind: LeafEditKind,
    old_path: NodePath,
    new_path: NodePath,
    old_node: BodyNode,
    new_node: BodyNode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum LeafEditKind {
    KeywordText { from: String, to: String },
    RuleCallName { from: String, to: String },
    FeatureName { from: String, to: String },
    Operator,
    CrossRef,
    CardinalityKind,
}

/// Returns the edit when `old` and `new` differ in exactly one leaf.
fn one_leaf_edit(
    old: &BodyNode,
    new: &BodyNode,
    old_path: &NodePath,
    new_path: &NodePath,
) -> Option<LeafEdit> {
    let mut found: Option<LeafEdit> = None;
    if collect_leaf_edits(old, new, old_path, new_path, &mut found) && found.is_some() {
        found
    } else {
        None
    }
}

/// True when the trees are equal except for leaf edits collected into
/// `found`; aborts (returns false) on a second edit or structural mismatch.
fn collect_leaf_edits(
    old: &BodyNode,
    new: &BodyNode,
    old_path: &NodePath,
    new_path: &NodePath,
    found: &mut Option<LeafEdit>,
) -> bool {
    use BodyNode::*;
    if old == new {
        return true;
    }
    let mut record = |kind: LeafEditKind| -> bool {
        if found.is_some() {
            return false;
        }
        *found = Some(LeafEdit {
            kind,
            old_path: old_path.clone(),
            new_path: new_path.clone(),
            old_node: old.clone(),
            new_node: new.clone(),
        });
        true
    };
    match (old, new) {
        (Keyword(a), Keyword(b)) => record(LeafEditKind::KeywordText {
            from: a.clone(),
            to: b.clone(),
        }),
        (RuleCall(a), RuleCall(b)) => record(LeafEditKind::RuleCallName {
            from: a.clone(),
            to: b.clone(),
        }),
        (CrossReference { .. }, CrossReference { .. }) => record(LeafEditKind::CrossRef),
        (
            Assignment {
                feature: fa,
                operator: oa,
                child: ca,
            },
            Assignment {
                feature: fb,
                operator: ob,
                child: cb,
            },
        ) => {
            if fa != fb && oa == ob && ca == cb {
                return record(LeafEditKind::FeatureName {
                    from: fa.clone(),
                    to: fb.clone(),
                });
            }
            if fa == fb && oa != ob && ca == cb {
                return record(LeafEditKind::Operator);
            }
            if fa == fb && oa == ob {
                return collect_leaf_edits(ca, cb, &old_path.child(0), &new_path.child(0), found);
            }
            false
        }
        (Group(a), Group(b))
        | (Alternatives(a), Alternatives(b))
        | (UnorderedGroup(a), UnorderedGroup(b)) => {
            if a.len() != b.len() {
                return false;
            }
            for (i, (ca, cb)) in a.iter().zip(b.iter()).enumerate() {
                if !collect_leaf_edits(ca, cb, &old_path.child(i), &new_path.child(i), found) {
                    return false;
                }
            }
            true
        }
        (
            Repeat {
                child: ca,
                cardinality: ka,
            },
            Repeat {
                child: cb,
                cardinality: kb,
            },
        ) => {
            if ka != kb && ca == cb {
                return record(LeafEditKind::CardinalityKind);
            }
            if ka == kb {
                return collect_leaf_edits(ca, cb, &old_path.child(0), &new_path.child(0), found);
            }
            false
        }
        (NegatedToken(a), NegatedToken(b)) => {
            collect_leaf_edits(a, b, &old_path.child(0), &new_path.child(0), found)
        }
        _ => false,
    }
}

fn leaf_change(rule: &str, edit: LeafEdit, new_ast: &GrammarAst) -> GrammarChange {
    match &edit.kind {
        LeafEditKind::KeywordText { from, to } => {
            let renamed_away = !new_ast.keywords().contains(from);
            GrammarChange {
                operation: if renamed_away {
                    ChangeOperation::Rename
                } else {
                    ChangeOperation::Modify
                },
                subject: ChangeSubject::Keyword,
                rule_name: rule.to_string(),
                detail: format!("keyword '{from}' renamed to '{to}'"),
                impact: Impact::Breaking,
                old_text: Some(from.clone()),
                new_text: Some(to.clone()),
                old_path: Some(edit.old_path),
                new_path: Some(edit.new_path),
                old_fragment: Some(edit.old_node),
                new_fragment: Some(edit.new_node),
            }
        }
        LeafEditKind::RuleCallName { from, to } => GrammarChange {
            operation: ChangeOperation::Modify,
            subject: ChangeSubject::Attribute,
            rule_name: rule.to_string(),
            detail: format!("rule call `{from}` changed to `{to}`"),
            impact: Impact::Breaking,
            old_text: Some(from.clone()),
            new_text: Some(to.clone()),
            old_path: Some(edit.old_path),
            new_path: Some(edit.new_path),
            old_fragment: Some(edit.old_node),
            new_fragment: Some(edit.new_node),
        },
        LeafEditKind::FeatureName { from, to } => GrammarChange {
            operation: ChangeOperation::Rename,
            subject: ChangeSubject::Attribute,
            rule_name: rule.to_string(),
            detail: format!("attribute `{from}` renamed to `{to}`"),
            impact: Impact::NonBreaking,
            old_text: Some(from.clone()),
            new_text: Some(to.clone()),
            old_path: Some(edit.old_path),
            new_path: Some(edit.new_path),
            old_fragment: Some(edit.old_node),
            new_fragment: Some(edit.new_node),
        },
        LeafEditKind::Operator | LeafEditKind::CrossRef | LeafEditKind::CardinalityKind => {
            GrammarChange {
                operation: ChangeOperation::Modify,
                subject: subject_of(&edit.old_node),
                rule_name: rule.to_string(),
                detail: format!(
                    "`{}` changed to `{}`",
                    snippet(&edit.old_node),
                    snippet(&edit.new_node)
                ),
                impact: Impact::Breaking,
                old_text: None,
                new_text: None,
                old_path: Some(edit.old_path),
                new_path: Some(edit.new_path),
                old_fragment: Some(edit.old_node),
                new_fragment: Some(edit.new_node),
            }
        }
    }
}

/// Checks whether the two bodies become equal after substituting exactly one
/// identifier/keyword string (globally). Returns `Some(None)` for already
/// equal bodies, `Some(Some((from, to)))` for a one-string rename.
fn one_string_substitution(old: &BodyNode, new: &BodyNode) -> Option<Option<(String, String)>> {
    if old == new {
        return Some(None);
    }
    let mut substitution: Option<(String, String)> = None;
    if strings_substitutable(old, new, &mut substitution) {
        substitution.map(Some)
    } else {
        None
    }
}

fn strings_substitutable(
    old: &BodyNode,
    new: &BodyNode,
    substitution: &mut Option<(String, String)>,
) -> bool {
    use BodyNode::*;
    let check = |a: &str, b: &str, substitution: &mut Option<(String, String)>| -> bool {
        if a == b {
            return true;
        }
        match substitution {
            Some((from, to)) => from == a && to == b,
            None => {
                *substitution = Some((a.to_string(), b.to_string()));
                true
            }
        }
    };
    match (old, new) {
        (Keyword(a), Keyword(b)) => check(a, b, substitution),
        (RuleCall(a), RuleCall(b)) => check(a, b, substitution),
        (
            CrossReference {
                target_rule: ta,
                syntax_rule: sa,
            },
            CrossReference {
                target_rule: tb,
                syntax_rule: sb,
            },
        ) => {
            if !check(ta, tb, substitution) {
                return false;
            }
            match (sa, sb) {
                (None, None) => true,
                (Some(a), Some(b)) => check(a, b, substitution),
                _ => false,
            }
        }
        (
            Assignment {
                feature: fa,
                operator: oa,
                child: ca,
            },
            Assignment {
                feature: fb,
                operator: ob,
                child: cb,
            },
        ) => oa == ob && check(fa, fb, substitution) && strings_substitutable(ca, cb, substitution),
        (Group(a), Group(b))
        | (Alternatives(a), Alternatives(b))
        | (UnorderedGroup(a), UnorderedGroup(b)) => {
            a.len() == b.len()
                && a.iter()
                    .zip(b.iter())
                    .all(|(ca, cb)| strings_substitutable(ca, cb, substitution))
        }
        (
            Repeat {
                child: ca,
                cardinality: ka,
            },
            Repeat {
                child: cb,
                cardinality: kb,
            },
        ) => ka == kb && strings_substitutable(ca, cb, substitution),
        (NegatedToken(a), NegatedToken(b)) => strings_substitutable(a, b, substitution),
        (CharRange { lo: la, hi: ha }, CharRange { lo: lb, hi: hb }) => la == lb && ha == hb,
        (Wildcard, Wildcard) => true,
        _ => false,
    }
}

fn keyword_in_body(body: &BodyNode, keyword: &str) -> bool {
    let mut found = false;
    body.walk(&mut |n| {
        if let BodyNode::Keyword(k) = n {
            if k == keyword {
                found = true;
            }
        }
    });
    found
}

fn keyword_path(body: &BodyNode, rule: &str, keyword: &str) -> Option<NodePath> {
    fn search(node: &BodyNode, path: NodePath, keyword: &str) -> Option<NodePath> {
        match node {
            BodyNode::Keyword(k) if k == keyword => Some(path),
            BodyNode::Group(c) | BodyNode::Alternatives(c) | BodyNode::UnorderedGroup(c) => c
                .iter()
                .enumerate()
                .find_map(|(i, child)| search(child, path.child(i), keyword)),
            BodyNode::Assignment { child, .. }
            | BodyNode::Repeat { child, .. }
            | BodyNode::NegatedToken(child) => search(child, path.child(0), keyword),
            _ => None,
        }
    }
    search(body, NodePath::root(rule), keyword)
}

fn apply_rename_map(body: &BodyNode, map: &BTreeMap<String, String>) -> BodyNode {
    use BodyNode::*;
    let rename = |name: &String| map.get(name).cloned().unwrap_or_else(|| name.clone());
    match body {
        RuleCall(name) => RuleCall(rename(name)),
        CrossReference {
            target_rule,
            syntax_rule,
        } => CrossReference {
            target_rule: rename(target_rule),
            syntax_rule: syntax_rule.as_ref().map(rename),
        },
        Assignment {
            feature,
            operator,
            child,
        } => Assignment {
            feature: feature.clone(),
            operator: *operator,
            child: Box::new(apply_rename_map(child, map)),
        },
        Group(c) => Group(c.iter().map(|n| apply_rename_map(n, map)).collect()),
        Alternatives(c) => Alternatives(c.iter().map(|n| apply_rename_map(n, map)).collect()),
        UnorderedGroup(c) => UnorderedGroup(c.iter().map(|n| apply_rename_map(n, map)).collect()),
        Repeat { child, cardinality } => Repeat {
            child: Box::new(apply_rename_map(child, map)),
            cardinality: *cardinality,
        },
        NegatedToken(c) => NegatedToken(Box::new(apply_rename_map(c, map))),
        other => other.clone(),
    }
}

/// Erases recognition-irrelevant structure (assignment features/operators).
fn erase(node: &BodyNode) -> BodyNode {
    use BodyNode::*;
    match node {
        Assignment { child, .. } => erase(child),
        Group(c) => BodyNode::group(c.iter().map(erase).collect()),
        Alternatives(c) => BodyNode::alternatives(c.iter().map(erase).collect()),
        UnorderedGroup(c) => BodyNode::unordered(c.iter().map(erase).collect()),
        Repeat { child, cardinality } => BodyNode::repeat(erase(child), *cardinality),
        NegatedToken(c) => NegatedToken(Box::new(erase(c))),
        other => other.clone(),
    }
}

/// Conservative structural check that every token sequence of `old` is also
/// one of `new` (the modification only widens the language). False negatives
/// are acceptable; false positives are not.
fn widens(old: &BodyNode, new: &BodyNode, new_ast: &GrammarAst, depth: u32) -> bool {
    widens_erased(&erase(old), &erase(new), new_ast, depth)
}

fn widens_erased(old: &BodyNode, new: &BodyNode, new_ast: &GrammarAst, depth: u32) -> bool {
    use crate::grammar::Cardinality::*;
    use BodyNode::*;
    if old == new {
        return true;
    }
    if depth == 0 {
        return false;
    }
    // Old-side decompositions first: every branch must widen.
    match old {
        Alternatives(branches) => {
            return branches
                .iter()
                .all(|b| widens_erased(b, new, new_ast, depth - 1));
        }
        Repeat {
            child,
            cardinality: Optional,
        } => {
            return new.is_nullable() && widens_erased(child, new, new_ast, depth - 1)
                || widens_via_new(old, new, new_ast, depth);
        }
        _ => {}
    }
    widens_via_new(old, new, new_ast, depth)
}

fn widens_via_new(old: &BodyNode, new: &BodyNode, new_ast: &GrammarAst, depth: u32) -> bool {
    use crate::grammar::Cardinality::*;
    use BodyNode::*;
    match new {
        Alternatives(branches) => branches
            .iter()
            .any(|b| widens_erased(old, b, new_ast, depth - 1)),
        Repeat {
            child,
            cardinality: Optional | Star,
        } => {
            widens_erased(old, child, new_ast, depth - 1)
                || matches!(
                    (old, new),
                    (
                        Repeat { child: oc, cardinality: ok },
                        Repeat { child: nc, cardinality: nk }
                    ) if cardinality_widens(*ok, *nk)
                        && widens_erased(oc, nc, new_ast, depth - 1)
                )
        }
        Repeat {
            child,
            cardinality: Plus,
        } => match old {
            Repeat {
                child: oc,
                cardinality: Plus,
            } => widens_erased(oc, child, new_ast, depth - 1),
            _ => widens_erased(old, child, new_ast, depth - 1),
        },
        RuleCall(name) => match new_ast.rule(name) {
            Some(rule) => widens_erased(old, &erase(&rule.body), new_ast, depth - 1),
            None => false,
        },
        CrossReference {
            syntax_rule: new_syntax,
            ..
        } => match old {
            CrossReference {
                syntax_rule: old_syntax,
                ..
            } => {
                let old_s = old_syntax.clone().unwrap_or_else(|| "ID".into());
                let new_s = new_syntax.clone().unwrap_or_else(|| "ID".into());
                old_s == new_s || (old_s == "ID" && rule_accepts_id(new_ast, &new_s))
            }
            _ => false,
        },
        Group(new_children) => {
            let old_children: Vec<&BodyNode> = match old {
                Group(c) => c.iter().collect(),
                other => vec![other],
            };
            embeds(&old_children, new_children, new_ast, depth)
        }
        _ => false,
    }
}

fn cardinality_widens(old: crate::grammar::Cardinality, new: crate::grammar::Cardinality) -> bool {
    use crate::grammar::Cardinality::*;
    matches!(
        (old, new),
        (Optional, Optional) | (Optional, Star) | (Star, Star) | (Plus, Plus) | (Plus, Star)
    )
}

/// Ordered embedding of old children into new children; skipped new children
/// must be nullable.
fn embeds(old: &[&BodyNode], new: &[BodyNode], new_ast: &GrammarAst, depth: u32) -> bool {
    if old.is_empty() {
        return new.iter().all(|n| n.is_nullable());
    }
    if new.is_empty() {
        return false;
    }
    if widens_erased(old[0], &new[0], new_ast, depth - 1)
        && embeds(&old[1..], &new[1..], new_ast, depth)
    {
        return true;
    }
    new[0].is_nullable() && embeds(old, &new[1..], new_ast, depth)
}
