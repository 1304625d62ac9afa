//! Grammar AST back to source text.

use super::{BodyNode, GrammarAst, RuleKind};

/// Serializes the AST to grammar-language text.
///
/// The preamble is reproduced byte-exact; rules are printed in a canonical
/// layout. The output re-parses to a structurally equal AST.
pub fn serialize_grammar(ast: &GrammarAst) -> String {
    let mut out = String::new();
    out.push_str(&ast.preamble);
    if !ast.preamble.is_empty() && !ast.preamble.ends_with('\n') {
        out.push('\n');
    }
    for (i, rule) in ast.rules.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if rule.kind == RuleKind::Terminal {
            out.push_str("terminal ");
        }
        out.push_str(&rule.name);
        if let Some(returns) = &rule.returns_type {
            out.push_str(" returns ");
            out.push_str(returns);
        }
        out.push_str(":\n    ");
        out.push_str(&body_text(&rule.body, Prec::Alternatives));
        out.push_str(";\n");
    }
    out
}

/// Serializes a single body node (used in diff change details).
pub fn body_snippet(node: &BodyNode) -> String {
    body_text(node, Prec::Alternatives)
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Alternatives,
    Unordered,
    Sequence,
    Primary,
}

fn body_text(node: &BodyNode, need: Prec) -> String {
    let (text, prec) = match node {
        BodyNode::Keyword(k) => (quote_keyword(k), Prec::Primary),
        BodyNode::RuleCall(name) => (name.clone(), Prec::Primary),
        BodyNode::Assignment {
            feature,
            operator,
            child,
        } => (
            format!(
                "{feature}{}{}",
                operator.as_str(),
                body_text(child, Prec::Primary)
            ),
            Prec::Primary,
        ),
        BodyNode::CrossReference {
            target_rule,
            syntax_rule,
        } => (
            match syntax_rule {
                Some(syntax) => format!("[{target_rule}|{syntax}]"),
                None => format!("[{target_rule}]"),
            },
            Prec::Primary,
        ),
        BodyNode::Group(children) => (
            children
                .iter()
                .map(|c| body_text(c, Prec::Sequence))
                .collect::<Vec<_>>()
                .join(" "),
            Prec::Sequence,
        ),
        BodyNode::Alternatives(children) => (
            children
                .iter()
                .map(|c| body_text(c, Prec::Unordered))
                .collect::<Vec<_>>()
                .join(" | "),
            Prec::Alternatives,
        ),
        BodyNode::UnorderedGroup(children) => (
            children
                .iter()
                .map(|c| body_text(c, Prec::Sequence))
                .collect::<Vec<_>>()
                .join(" & "),
            Prec::Unordered,
        ),
        BodyNode::Repeat { child, cardinality } => {
            let inner = body_text(child, Prec::Primary);
            // Parenthesize assignments under a cardinality for readability;
            // both forms parse identically.
            let inner = if matches!(child.as_ref(), BodyNode::Assignment { .. }) {
                format!("({inner})")
            } else {
                inner
            };
            (format!("{inner}{}", cardinality.suffix()), Prec::Primary)
        }
        BodyNode::CharRange { lo, hi } => (
            format!(
                "{}..{}",
                quote_keyword(&lo.to_string()),
                quote_keyword(&hi.to_string())
            ),
            Prec::Primary,
        ),
        BodyNode::Wildcard => (".".to_string(), Prec::Primary),
        BodyNode::NegatedToken(child) => (
            format!("!{}", body_text(child, Prec::Primary)),
            Prec::Primary,
        ),
    };
    if prec < need {
        format!("({text})")
    } else {
        text
    }
}

fn quote_keyword(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('\'');
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out.push('\'');
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse_grammar;
    use super::*;

    const G1: &str = include_str!("../../fixtures/domainmodel/grammar_v1.xtext");
    const G2: &str = include_str!("../../fixtures/domainmodel/grammar_v2.xtext");
    const DNN1: &str = include_str!("../../fixtures/dnn/grammar_v1.xtext");

    #[test]
    fn round_trip_is_structurally_stable() {
        for src in [G1, G2, DNN1] {
            let ast = parse_grammar(src).unwrap();
            let text = serialize_grammar(&ast);
            let reparsed = parse_grammar(&text)
                .unwrap_or_else(|e| panic!("serialized text failed to parse: {e}\n{text}"));
            assert_eq!(ast, reparsed);
        }
    }

    #[test]
    fn preamble_survives_byte_exact() {
        let ast = parse_grammar(G2).unwrap();
        let text = serialize_grammar(&ast);
        assert!(text.starts_with(&ast.preamble));
    }

    #[test]
    fn datatype_rule_keeps_its_terminator_literal() {
        let ast = parse_grammar(G2).unwrap();
        let text = serialize_grammar(&ast);
        assert!(text.contains("';'"), "{text}");
    }

    #[test]
    fn keyword_escaping() {
        assert_eq!(quote_keyword("a'b"), "'a\\'b'");
        assert_eq!(quote_keyword("\\"), "'\\\\'");
    }
}
