#![allow(dead_code)] // shared by several test targets, each using a subset

//! Shared test machinery: a seeded random grammar generator and a
//! brute-force derivation oracle, independent of the library's recognizer.

use coevolve_core::{
    AssignmentOperator, BodyNode, Cardinality, GrammarAst, RuleDef, RuleKind, TokenKind,
};
use rand::rngs::StdRng;
use rand::Rng;
use std::collections::BTreeSet;

pub const KEYWORD_POOL: &[&str] = &["a", "b", "c", "d", "ab"];
pub const ID_POOL: &[&str] = &["x", "y1", "zz"];

/// Random grammar with up to `max_rules` parser rules, built through the
/// public constructors.
pub fn random_grammar(rng: &mut StdRng, max_rules: usize) -> GrammarAst {
    let rule_count = rng.gen_range(1..=max_rules);
    let names: Vec<String> = (0..rule_count).map(|i| format!("R{i}")).collect();
    let rules: Vec<RuleDef> = names
        .iter()
        .map(|name| RuleDef {
            name: name.clone(),
            kind: RuleKind::Parser,
            returns_type: None,
            body: random_body(rng, &names, 3),
        })
        .collect();
    // Empty preamble implies an empty grammar name, keeping the AST
    // consistent with what its own serialization parses back to.
    GrammarAst::new(String::new(), String::new(), rules)
        .expect("generated grammar is structurally valid")
}

fn random_body(rng: &mut StdRng, rules: &[String], depth: u32) -> BodyNode {
    let leaf_only = depth == 0;
    let choice = if leaf_only {
        rng.gen_range(0..5)
    } else {
        rng.gen_range(0..9)
    };
    match choice {
        0 | 1 => BodyNode::Keyword(KEYWORD_POOL[rng.gen_range(0..KEYWORD_POOL.len())].to_string()),
        2 => BodyNode::RuleCall(rules[rng.gen_range(0..rules.len())].clone()),
        3 => BodyNode::RuleCall("ID".to_string()),
        4 => {
            let operator = match rng.gen_range(0..3) {
                0 => AssignmentOperator::Assign,
                1 => AssignmentOperator::Append,
                _ => AssignmentOperator::BoolFlag,
            };
            let child = match rng.gen_range(0..3) {
                0 => BodyNode::Keyword(
                    KEYWORD_POOL[rng.gen_range(0..KEYWORD_POOL.len())].to_string(),
                ),
                1 => BodyNode::RuleCall("ID".to_string()),
                _ => BodyNode::CrossReference {
                    target_rule: rules[rng.gen_range(0..rules.len())].clone(),
                    syntax_rule: None,
                },
            };
            BodyNode::assignment(&format!("f{}", rng.gen_range(0..4)), operator, child)
        }
        5 => {
            let n = rng.gen_range(2..=3);
            BodyNode::group((0..n).map(|_| random_body(rng, rules, depth - 1)).collect())
        }
        6 => {
            let n = rng.gen_range(2..=3);
            BodyNode::alternatives((0..n).map(|_| random_body(rng, rules, depth - 1)).collect())
        }
        7 => BodyNode::unordered(vec![
            random_body(rng, rules, depth - 1),
            random_body(rng, rules, depth - 1),
        ]),
        _ => {
            let cardinality = match rng.gen_range(0..3) {
                0 => Cardinality::Optional,
                1 => Cardinality::Star,
                _ => Cardinality::Plus,
            };
            BodyNode::repeat(random_body(rng, rules, depth - 1), cardinality)
        }
    }
}

/// Random token text: a space-separated mix of keywords and identifiers.
pub fn random_token_text(rng: &mut StdRng, max_tokens: usize) -> String {
    let n = rng.gen_range(0..=max_tokens);
    let mut parts = Vec::with_capacity(n);
    for _ in 0..n {
        if rng.gen_bool(0.65) {
            parts.push(KEYWORD_POOL[rng.gen_range(0..KEYWORD_POOL.len())]);
        } else {
            parts.push(ID_POOL[rng.gen_range(0..ID_POOL.len())]);
        }
    }
    parts.join(" ")
}

/// Token text sampled by randomly deriving from the grammar, capped by a
/// recursion budget; `None` when the budget runs out.
pub fn sample_derivation(
    rng: &mut StdRng,
    grammar: &GrammarAst,
    max_tokens: usize,
) -> Option<String> {
    let entry = grammar.entry_rule()?;
    let mut out = Vec::new();
    let mut budget = 64u32;
    emit(rng, grammar, &entry.body, &mut out, &mut budget)?;
    (out.len() <= max_tokens).then(|| out.join(" "))
}

fn emit(
    rng: &mut StdRng,
    grammar: &GrammarAst,
    node: &BodyNode,
    out: &mut Vec<String>,
    budget: &mut u32,
) -> Option<()> {
    if *budget == 0 {
        return None;
    }
    *budget -= 1;
    match node {
        BodyNode::Keyword(k) => out.push(k.clone()),
        BodyNode::RuleCall(name) => {
            if let Some(rule) = grammar.rule(name) {
                emit(rng, grammar, &rule.body, out, budget)?;
            } else {
                out.push(ID_POOL[rng.gen_range(0..ID_POOL.len())].to_string());
            }
        }
        BodyNode::Assignment { child, .. } => emit(rng, grammar, child, out, budget)?,
        BodyNode::CrossReference { .. } => {
            out.push(ID_POOL[rng.gen_range(0..ID_POOL.len())].to_string());
        }
        BodyNode::Group(children) => {
            for child in children {
                emit(rng, grammar, child, out, budget)?;
            }
        }
        BodyNode::Alternatives(children) => {
            let pick = rng.gen_range(0..children.len());
            emit(rng, grammar, &children[pick], out, budget)?;
        }
        BodyNode::UnorderedGroup(children) => {
            let mut order: Vec<usize> = (0..children.len()).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            for i in order {
                emit(rng, grammar, &children[i], out, budget)?;
            }
        }
        BodyNode::Repeat { child, cardinality } => {
            let reps = match cardinality {
                Cardinality::Optional => rng.gen_range(0..=1),
                Cardinality::Star => rng.gen_range(0..=2),
                Cardinality::Plus => rng.gen_range(1..=2),
            };
            for _ in 0..reps {
                emit(rng, grammar, child, out, budget)?;
            }
        }
        BodyNode::CharRange { .. } | BodyNode::Wildcard | BodyNode::NegatedToken(_) => {
            return None;
        }
    }
    Some(())
}

/// Token view for the oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleToken {
    Keyword(String),
    Id,
}

pub fn oracle_tokens(instance: &coevolve_core::LosslessInstance) -> Vec<OracleToken> {
    instance
        .tokens
        .iter()
        .map(|t| match &t.kind {
            TokenKind::Keyword => OracleToken::Keyword(t.text.clone()),
            _ => OracleToken::Id,
        })
        .collect()
}

/// Bottom-up saturation: computes, for every (rule, i, j), whether the rule
/// derives tokens[i..j), then answers for the entry rule over the full
/// stream. Exact on the generated subset (keywords, rule calls, ID,
/// cross-references, groups, alternatives, unordered pairs, cardinalities),
/// left recursion included.
pub fn oracle_accepts(grammar: &GrammarAst, tokens: &[OracleToken]) -> bool {
    let entry = match grammar.entry_rule() {
        Some(rule) => rule.name.clone(),
        None => return false,
    };
    let n = tokens.len();
    let rule_names: Vec<&str> = grammar.rules.iter().map(|r| r.name.as_str()).collect();
    let mut derived: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    loop {
        let mut changed = false;
        for (r, rule) in grammar.rules.iter().enumerate() {
            for i in 0..=n {
                for j in i..=n {
                    if derived.contains(&(r, i, j)) {
                        continue;
                    }
                    if body_derives(&rule.body, tokens, i, j, &rule_names, &derived) {
                        derived.insert((r, i, j));
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let entry_idx = rule_names.iter().position(|r| *r == entry).unwrap();
    derived.contains(&(entry_idx, 0, n))
}

fn body_derives(
    node: &BodyNode,
    tokens: &[OracleToken],
    i: usize,
    j: usize,
    rules: &[&str],
    derived: &BTreeSet<(usize, usize, usize)>,
) -> bool {
    match node {
        BodyNode::Keyword(k) => j == i + 1 && tokens[i] == OracleToken::Keyword(k.clone()),
        BodyNode::RuleCall(name) => match rules.iter().position(|r| r == name) {
            Some(r) => derived.contains(&(r, i, j)),
            // Only the ID builtin appears in generated grammars.
            None => j == i + 1 && tokens[i] == OracleToken::Id,
        },
        BodyNode::CrossReference { .. } => j == i + 1 && tokens[i] == OracleToken::Id,
        BodyNode::Assignment { child, .. } => body_derives(child, tokens, i, j, rules, derived),
        BodyNode::Group(children) => seq_derives(children, tokens, i, j, rules, derived),
        BodyNode::Alternatives(children) => children
            .iter()
            .any(|c| body_derives(c, tokens, i, j, rules, derived)),
        BodyNode::UnorderedGroup(children) => {
            permutations(children.len()).into_iter().any(|perm| {
                let ordered: Vec<BodyNode> = perm.iter().map(|&k| children[k].clone()).collect();
                seq_derives(&ordered, tokens, i, j, rules, derived)
            })
        }
        BodyNode::Repeat { child, cardinality } => match cardinality {
            Cardinality::Optional => i == j || body_derives(child, tokens, i, j, rules, derived),
            Cardinality::Star => star_derives(child, tokens, i, j, rules, derived),
            Cardinality::Plus => {
                if i == j {
                    return body_derives(child, tokens, i, j, rules, derived);
                }
                (i + 1..=j).any(|k| {
                    body_derives(child, tokens, i, k, rules, derived)
                        && star_derives(child, tokens, k, j, rules, derived)
                })
            }
        },
        BodyNode::CharRange { .. } | BodyNode::Wildcard | BodyNode::NegatedToken(_) => false,
    }
}

fn star_derives(
    child: &BodyNode,
    tokens: &[OracleToken],
    i: usize,
    j: usize,
    rules: &[&str],
    derived: &BTreeSet<(usize, usize, usize)>,
) -> bool {
    if i == j {
        return true;
    }
    (i + 1..=j).any(|k| {
        body_derives(child, tokens, i, k, rules, derived)
            && star_derives(child, tokens, k, j, rules, derived)
    })
}

fn seq_derives(
    children: &[BodyNode],
    tokens: &[OracleToken],
    i: usize,
    j: usize,
    rules: &[&str],
    derived: &BTreeSet<(usize, usize, usize)>,
) -> bool {
    match children {
        [] => i == j,
        [first, rest @ ..] => (i..=j).any(|k| {
            body_derives(first, tokens, i, k, rules, derived)
                && seq_derives(rest, tokens, k, j, rules, derived)
        }),
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            go(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut items: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    go(&mut items, 0, &mut out);
    out
}
