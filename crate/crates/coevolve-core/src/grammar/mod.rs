//! Grammar model: a practical subset of the Xtext grammar language.
//!
//! Supported constructs: keywords, rule calls, assignments (`=`, `+=`, `?=`),
//! alternatives, groups, unordered groups (`&`), cardinalities (`?`, `*`,
//! `+`), cross-references `[T]` / `[T|Syntax]`, `returns` clauses (recorded,
//! semantically ignored), and terminal rules built from keywords, character
//! ranges, wildcard and negation. Header directives (`grammar`, `import`,
//! `generate`) are kept as opaque preamble text and round-tripped verbatim.
//! Everything outside the subset is rejected with
//! [`GrammarError::Unsupported`] rather than mis-parsed.

mod lexer;
mod parser;
mod serializer;

pub use parser::parse_grammar;
pub use serializer::{body_snippet, serialize_grammar};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Implicit terminals available when the grammar does not define them,
/// mirroring Xtext's standard terminal set.
pub const BUILTIN_TERMINALS: &[&str] = &["ID", "INT", "STRING", "ML_COMMENT", "SL_COMMENT", "WS"];

/// Returns true when `name` is one of the built-in terminal rules.
pub fn is_builtin_terminal(name: &str) -> bool {
    BUILTIN_TERMINALS.contains(&name)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("syntax error at {line}:{col}: expected {expected}")]
    Syntax {
        line: u32,
        col: u32,
        expected: String,
    },
    #[error("unsupported construct at line {line}: {construct}")]
    Unsupported { line: u32, construct: String },
    #[error("duplicate rule name `{name}`")]
    DuplicateRule { name: String },
    #[error("rule `{referenced_from}` references unknown rule `{name}`")]
    UnresolvedReference {
        name: String,
        referenced_from: String,
    },
    #[error("invalid grammar: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AssignmentOperator {
    /// `=`
    Assign,
    /// `+=`
    Append,
    /// `?=`
    BoolFlag,
}

impl AssignmentOperator {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssignmentOperator::Assign => "=",
            AssignmentOperator::Append => "+=",
            AssignmentOperator::BoolFlag => "?=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cardinality {
    /// `?`
    Optional,
    /// `*`
    Star,
    /// `+`
    Plus,
}

impl Cardinality {
    pub fn suffix(&self) -> &'static str {
        match self {
            Cardinality::Optional => "?",
            Cardinality::Star => "*",
            Cardinality::Plus => "+",
        }
    }
}

/// One node of a rule body.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BodyNode {
    Keyword(String),
    RuleCall(String),
    Assignment {
        feature: String,
        operator: AssignmentOperator,
        child: Box<BodyNode>,
    },
    CrossReference {
        target_rule: String,
        syntax_rule: Option<String>,
    },
    Group(Vec<BodyNode>),
    Alternatives(Vec<BodyNode>),
    UnorderedGroup(Vec<BodyNode>),
    Repeat {
        child: Box<BodyNode>,
        cardinality: Cardinality,
    },
    CharRange {
        lo: char,
        hi: char,
    },
    Wildcard,
    NegatedToken(Box<BodyNode>),
}

impl BodyNode {
    /// Group constructor; collapses singletons and flattens nested groups
    /// (sequence parentheses carry no meaning of their own).
    pub fn group(children: Vec<BodyNode>) -> BodyNode {
        let mut flat = Vec::with_capacity(children.len());
        for child in children {
            match child {
                BodyNode::Group(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            BodyNode::Group(flat)
        }
    }

    /// Alternatives constructor; collapses singletons and flattens nested
    /// alternatives.
    pub fn alternatives(children: Vec<BodyNode>) -> BodyNode {
        let mut flat = Vec::with_capacity(children.len());
        for child in children {
            match child {
                BodyNode::Alternatives(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            BodyNode::Alternatives(flat)
        }
    }

    /// Unordered-group constructor; collapses singleton lists.
    pub fn unordered(mut children: Vec<BodyNode>) -> BodyNode {
        if children.len() == 1 {
            children.pop().unwrap()
        } else {
            BodyNode::UnorderedGroup(children)
        }
    }

    /// Cardinality constructor. Stacked cardinalities are normalized so that
    /// a `Repeat` never directly wraps another `Repeat`
    /// (e.g. `(x?)*` ≡ `x*`, `(x+)?` ≡ `x*`).
    pub fn repeat(child: BodyNode, cardinality: Cardinality) -> BodyNode {
        use Cardinality::*;
        if let BodyNode::Repeat {
            child: inner,
            cardinality: c_in,
        } = child
        {
            let merged = match (cardinality, c_in) {
                (Optional, Optional) => Optional,
                (Plus, Plus) => Plus,
                _ => Star,
            };
            return BodyNode::Repeat {
                child: inner,
                cardinality: merged,
            };
        }
        BodyNode::Repeat {
            child: Box::new(child),
            cardinality,
        }
    }

    pub fn assignment(feature: &str, operator: AssignmentOperator, child: BodyNode) -> BodyNode {
        BodyNode::Assignment {
            feature: feature.to_string(),
            operator,
            child: Box::new(child),
        }
    }

    /// Direct children for container nodes, empty slice otherwise.
    pub fn children(&self) -> &[BodyNode] {
        match self {
            BodyNode::Group(c) | BodyNode::Alternatives(c) | BodyNode::UnorderedGroup(c) => c,
            _ => &[],
        }
    }

    /// Walks the node and every descendant, depth-first.
    pub fn walk<'a>(&'a self, visit: &mut dyn FnMut(&'a BodyNode)) {
        visit(self);
        match self {
            BodyNode::Group(c) | BodyNode::Alternatives(c) | BodyNode::UnorderedGroup(c) => {
                for child in c {
                    child.walk(visit);
                }
            }
            BodyNode::Assignment { child, .. }
            | BodyNode::Repeat { child, .. }
            | BodyNode::NegatedToken(child) => child.walk(visit),
            _ => {}
        }
    }

    /// Whether the node can match the empty token sequence.
    pub fn is_nullable(&self) -> bool {
        match self {
            BodyNode::Repeat { cardinality, child } => {
                matches!(cardinality, Cardinality::Optional | Cardinality::Star)
                    || child.is_nullable()
            }
            BodyNode::Group(c) => c.iter().all(|n| n.is_nullable()),
            BodyNode::UnorderedGroup(c) => c.iter().all(|n| n.is_nullable()),
            BodyNode::Alternatives(c) => c.iter().any(|n| n.is_nullable()),
            BodyNode::Assignment { child, .. } => child.is_nullable(),
            _ => false,
        }
    }
}

/// Location of a body node within a named rule: child indices from the body
/// root (assignments, repeats and negations count their child as index 0).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodePath {
    pub rule: String,
    pub steps: Vec<usize>,
}

impl NodePath {
    pub fn root(rule: &str) -> NodePath {
        NodePath {
            rule: rule.to_string(),
            steps: Vec::new(),
        }
    }

    pub fn child(&self, index: usize) -> NodePath {
        let mut steps = self.steps.clone();
        steps.push(index);
        NodePath {
            rule: self.rule.clone(),
            steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleKind {
    Parser,
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleDef {
    pub name: String,
    pub kind: RuleKind,
    pub returns_type: Option<String>,
    pub body: BodyNode,
}

/// Parsed grammar: opaque preamble plus an ordered list of rules.
///
/// The entry rule is the first parser rule. Construction validates the
/// structural invariants, so a `GrammarAst` in hand is always well-formed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarAst {
    /// Qualified name from the `grammar` header directive ("" if absent).
    pub name: String,
    /// Header text (grammar/import/generate lines), reproduced verbatim.
    pub preamble: String,
    pub rules: Vec<RuleDef>,
}

impl GrammarAst {
    pub fn new(name: String, preamble: String, rules: Vec<RuleDef>) -> Result<Self, GrammarError> {
        let ast = GrammarAst {
            name,
            preamble,
            rules,
        };
        ast.validate()?;
        Ok(ast)
    }

    /// First parser rule; the recognizer's start symbol.
    pub fn entry_rule(&self) -> Option<&RuleDef> {
        self.rules.iter().find(|r| r.kind == RuleKind::Parser)
    }

    pub fn rule(&self, name: &str) -> Option<&RuleDef> {
        self.rules.iter().find(|r| r.name == name)
    }

    /// All keyword literals used in parser rule bodies, the set a lexer must
    /// prefer over plain identifiers.
    pub fn keywords(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for rule in self.rules.iter().filter(|r| r.kind == RuleKind::Parser) {
            rule.body.walk(&mut |node| {
                if let BodyNode::Keyword(text) = node {
                    out.insert(text.clone());
                }
            });
        }
        out
    }

    /// User-defined terminal rules, in declaration order.
    pub fn terminal_rules(&self) -> Vec<&RuleDef> {
        self.rules
            .iter()
            .filter(|r| r.kind == RuleKind::Terminal)
            .collect()
    }

    /// Parser-rule names reachable from the entry rule through rule calls and
    /// cross-reference syntax rules.
    pub fn reachable_rules(&self) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = match self.entry_rule() {
            Some(entry) => vec![entry.name.clone()],
            None => vec![],
        };
        while let Some(name) = stack.pop() {
            if !seen.insert(name.clone()) {
                continue;
            }
            if let Some(rule) = self.rule(&name) {
                rule.body.walk(&mut |node| match node {
                    BodyNode::RuleCall(target) => stack.push(target.clone()),
                    BodyNode::CrossReference { syntax_rule, .. } => {
                        stack.push(syntax_rule.clone().unwrap_or_else(|| "ID".to_string()));
                    }
                    _ => {}
                });
            }
        }
        seen
    }

    fn validate(&self) -> Result<(), GrammarError> {
        let mut names = BTreeSet::new();
        for rule in &self.rules {
            if !names.insert(rule.name.clone()) {
                return Err(GrammarError::DuplicateRule {
                    name: rule.name.clone(),
                });
            }
        }
        for rule in &self.rules {
            let mut err = None;
            rule.body.walk(&mut |node| {
                if err.is_some() {
                    return;
                }
                match node {
                    BodyNode::Keyword(text) if text.is_empty() => {
                        err = Some(GrammarError::Invalid(format!(
                            "empty keyword in rule `{}`",
                            rule.name
                        )));
                    }
                    BodyNode::Repeat { child, .. } => {
                        if matches!(child.as_ref(), BodyNode::Repeat { .. }) {
                            err = Some(GrammarError::Invalid(format!(
                                "stacked cardinality in rule `{}`",
                                rule.name
                            )));
                        }
                    }
                    BodyNode::RuleCall(target) => {
                        if self.rule(target).is_none() && !is_builtin_terminal(target) {
                            err = Some(GrammarError::UnresolvedReference {
                                name: target.clone(),
                                referenced_from: rule.name.clone(),
                            });
                        }
                    }
                    BodyNode::CrossReference {
                        target_rule,
                        syntax_rule,
                    } => {
                        for target in std::iter::once(target_rule).chain(syntax_rule.iter()) {
                            if self.rule(target).is_none() && !is_builtin_terminal(target) {
                                err = Some(GrammarError::UnresolvedReference {
                                    name: target.clone(),
                                    referenced_from: rule.name.clone(),
                                });
                            }
                        }
                    }
                    _ => {}
                }
                if err.is_none() && rule.kind == RuleKind::Terminal {
                    if let BodyNode::Assignment { .. } | BodyNode::CrossReference { .. } = node {
                        err = Some(GrammarError::Invalid(format!(
                            "terminal rule `{}` contains an assignment or cross-reference",
                            rule.name
                        )));
                    }
                }
                if err.is_none() && rule.kind == RuleKind::Parser {
                    if let BodyNode::CharRange { .. }
                    | BodyNode::Wildcard
                    | BodyNode::NegatedToken(_) = node
                    {
                        err = Some(GrammarError::Invalid(format!(
                            "character-level construct outside a terminal rule in `{}`",
                            rule.name
                        )));
                    }
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        Ok(())
    }
}
