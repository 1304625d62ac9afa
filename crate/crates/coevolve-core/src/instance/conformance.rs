//! Grammar-driven conformance checking with line-level error localization.

use super::cfg::Cfg;
use super::earley::{DerivationNode, ErrPosition, Recognizer};
use super::lexer::{LexConfig, LexMode};
use super::LosslessInstance;
use crate::grammar::GrammarAst;
use serde::Serialize;
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConformanceError {
    pub line: u32,
    pub col: u32,
    pub message: String,
    pub expected: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformanceReport {
    pub conforms: bool,
    pub errors: Vec<ConformanceError>,
    /// 1-based line numbers covered by error regions (blank lines excluded;
    /// only token-bearing lines can appear here).
    pub error_lines: BTreeSet<u32>,
    /// Lines all of whose tokens fell into skipped error regions, meaning a
    /// deletion-style repair would remove them.
    pub skipped_lines: BTreeSet<u32>,
}

impl ConformanceReport {
    fn conforming() -> Self {
        ConformanceReport {
            conforms: true,
            errors: Vec::new(),
            error_lines: BTreeSet::new(),
            skipped_lines: BTreeSet::new(),
        }
    }

    fn single_error(message: String) -> Self {
        ConformanceReport {
            conforms: false,
            errors: vec![ConformanceError {
                line: 1,
                col: 1,
                message,
                expected: vec![],
            }],
            error_lines: BTreeSet::new(),
            skipped_lines: BTreeSet::new(),
        }
    }
}

/// Runs the chart recognizer for the grammar's entry rule over the instance.
///
/// The instance source is re-lexed with the union of the grammar's token
/// definitions and the instance's own, so text written for another grammar
/// version stays lexable; unknown input becomes error tokens that fail
/// recognition rather than aborting. Failures are reported as data.
pub fn check_conformance(instance: &LosslessInstance, grammar: &GrammarAst) -> ConformanceReport {
    check_text(&instance.source, grammar, Some(instance.config()))
}

/// Conformance of raw text; `extra` widens the lexer so foreign keywords and
/// terminals from another grammar version are still tokenized.
pub(crate) fn check_text(
    source: &str,
    grammar: &GrammarAst,
    extra: Option<&LexConfig>,
) -> ConformanceReport {
    let own = LexConfig::from_grammar(grammar);
    let config = match extra {
        Some(other) => own.union(other),
        None => own,
    };
    let lexed = LosslessInstance::lex(source, config, LexMode::Lenient)
        .expect("lenient lexing cannot fail");

    let entry = match grammar.entry_rule() {
        Some(rule) => rule.name.clone(),
        None => return ConformanceReport::single_error("grammar has no parser rule".into()),
    };
    let cfg = match Cfg::compile(grammar, &entry) {
        Ok(cfg) => cfg,
        Err(message) => return ConformanceReport::single_error(message),
    };
    let target_keywords = grammar.keywords();
    let recognizer = Recognizer::new(&cfg, &target_keywords, lexed.config());
    let rec = recognizer.run(&lexed.tokens);

    if rec.accepted {
        return ConformanceReport::conforming();
    }

    let mut errors = Vec::new();
    let mut error_lines = BTreeSet::new();
    for err in &rec.errors {
        let (line, col, message) = match err.position {
            ErrPosition::Token(idx) => {
                let tok = &lexed.tokens[idx];
                (tok.line, tok.col, format!("unexpected `{}`", tok.text))
            }
            ErrPosition::Eof => {
                let tok = lexed.tokens.last().expect("eof error implies tokens");
                (tok.line, tok.col, "unexpected end of input".to_string())
            }
            ErrPosition::EmptyInput => (1, 1, "empty input does not match the entry rule".into()),
        };
        for &tok_idx in &err.region {
            if tok_idx < lexed.tokens.len() {
                error_lines.extend(lexed.token_lines(tok_idx));
            }
        }
        errors.push(ConformanceError {
            line,
            col,
            message,
            expected: err.expected.clone(),
        });
    }

    let mut skipped_tokens = BTreeSet::new();
    for &(start, end) in &rec.skipped {
        skipped_tokens.extend(start..end);
    }
    let mut skipped_lines = BTreeSet::new();
    for line in error_lines.iter().copied() {
        let on_line = lexed.tokens_on_line(line);
        if !on_line.is_empty() && on_line.iter().all(|idx| skipped_tokens.contains(idx)) {
            skipped_lines.insert(line);
        }
    }

    ConformanceReport {
        conforms: false,
        errors,
        error_lines,
        skipped_lines,
    }
}

/// Token-level bindings extracted from an accepting derivation: which
/// grammar body node consumed each token, the spans of every tagged body
/// node, and the spans of every parser-rule instantiation.
#[derive(Debug, Default)]
pub(crate) struct BoundDerivation {
    /// Token index to the path of the grammar leaf that consumed it.
    pub token_bindings: std::collections::BTreeMap<usize, crate::grammar::NodePath>,
    /// Spans (half-open token ranges) of every tagged node, leaves included.
    pub tagged_spans: Vec<(crate::grammar::NodePath, (usize, usize))>,
    /// Spans of each parser-rule occurrence, keyed by rule name.
    pub rule_spans: std::collections::BTreeMap<String, Vec<(usize, usize)>>,
}

/// Accepting derivation of a conforming instance under its own grammar.
/// Returns `None` when the instance does not conform.
pub(crate) fn derive_instance(
    instance: &LosslessInstance,
    grammar: &GrammarAst,
) -> Option<BoundDerivation> {
    let entry = grammar.entry_rule()?.name.clone();
    let cfg = Cfg::compile(grammar, &entry).ok()?;
    let target_keywords = grammar.keywords();
    let recognizer = Recognizer::new(&cfg, &target_keywords, instance.config());
    let rec = recognizer.run(&instance.tokens);
    let root = recognizer.derivation(&rec, &instance.tokens)?;

    let mut bound = BoundDerivation::default();
    collect_bindings(&root, &cfg, &mut bound);
    Some(bound)
}

fn collect_bindings(node: &DerivationNode, cfg: &Cfg, bound: &mut BoundDerivation) {
    if let Some(tag) = &node.tag {
        bound.tagged_spans.push((tag.clone(), node.span));
        if let Some(token) = node.token {
            bound.token_bindings.insert(token, tag.clone());
        }
    }
    if let Some(nt) = node.nt {
        let name = cfg.rule_name_of(nt);
        if cfg.rule_nts.get(name) == Some(&nt) {
            bound
                .rule_spans
                .entry(name.to_string())
                .or_default()
                .push(node.span);
        }
    }
    for child in &node.children {
        collect_bindings(child, cfg, bound);
    }
}

/// Whether `rule` in `grammar` accepts exactly the given token texts. Used by
/// the diff's conservative widening check (e.g. does `QualifiedName` accept a
/// plain identifier).
pub(crate) fn rule_accepts_id(grammar: &GrammarAst, rule: &str) -> bool {
    if rule == "ID" {
        return true;
    }
    let Ok(cfg) = Cfg::compile(grammar, rule) else {
        return false;
    };
    let config = LexConfig::from_grammar(grammar);
    let Ok(probe) = LosslessInstance::lex("probe_identifier", config, LexMode::Lenient) else {
        return false;
    };
    let target_keywords = grammar.keywords();
    let recognizer = Recognizer::new(&cfg, &target_keywords, probe.config());
    recognizer.run(&probe.tokens).accepted
}
