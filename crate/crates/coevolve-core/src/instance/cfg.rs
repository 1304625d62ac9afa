//! Compilation of parser rules into a context-free grammar over token
//! matchers. Assignments are transparent for recognition; cross-references
//! recognize their syntax rule (`ID` by default). Every symbol occurrence
//! keeps the path of the body node it came from, so an accepting derivation
//! can bind tokens back to grammar positions.

use crate::grammar::{BodyNode, Cardinality, GrammarAst, NodePath, RuleKind};
use std::collections::BTreeMap;

pub(crate) type NtId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum SymKind {
    Nt(NtId),
    Keyword(String),
    Terminal(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Sym {
    pub kind: SymKind,
    pub tag: Option<NodePath>,
}

#[derive(Debug, Clone)]
pub(crate) struct Prod {
    pub lhs: NtId,
    pub rhs: Vec<Sym>,
}

#[derive(Debug)]
pub(crate) struct Cfg {
    pub nt_names: Vec<String>,
    pub rule_nts: BTreeMap<String, NtId>,
    pub prods: Vec<Prod>,
    pub prods_of: Vec<Vec<usize>>,
    pub start: NtId,
    pub nullable: Vec<bool>,
}

const MAX_UNORDERED_GROUP: usize = 6;

impl Cfg {
    /// Compiles the parser rules of `grammar`, starting at `start_rule`.
    pub fn compile(grammar: &GrammarAst, start_rule: &str) -> Result<Cfg, String> {
        let mut builder = Builder {
            nt_names: Vec::new(),
            rule_nts: BTreeMap::new(),
            prods: Vec::new(),
        };
        for rule in grammar.rules.iter().filter(|r| r.kind == RuleKind::Parser) {
            let id = builder.fresh_nt(&rule.name);
            builder.rule_nts.insert(rule.name.clone(), id);
        }
        let entry = *builder
            .rule_nts
            .get(start_rule)
            .ok_or_else(|| format!("`{start_rule}` is not a parser rule"))?;
        for rule in grammar.rules.iter().filter(|r| r.kind == RuleKind::Parser) {
            let lhs = builder.rule_nts[&rule.name];
            let alts = builder.alternatives(&rule.body, &NodePath::root(&rule.name))?;
            for rhs in alts {
                builder.prods.push(Prod { lhs, rhs });
            }
        }
        // Synthesized start production so acceptance is one item check.
        let start = builder.fresh_nt("<start>");
        let entry_sym = Sym {
            kind: SymKind::Nt(entry),
            tag: None,
        };
        builder.prods.push(Prod {
            lhs: start,
            rhs: vec![entry_sym],
        });

        let mut prods_of = vec![Vec::new(); builder.nt_names.len()];
        for (i, prod) in builder.prods.iter().enumerate() {
            prods_of[prod.lhs].push(i);
        }
        let nullable = compute_nullable(&builder.prods, builder.nt_names.len());
        Ok(Cfg {
            nt_names: builder.nt_names,
            rule_nts: builder.rule_nts,
            prods: builder.prods,
            prods_of,
            start,
            nullable,
        })
    }

    pub fn rule_name_of(&self, nt: NtId) -> &str {
        &self.nt_names[nt]
    }
}

struct Builder {
    nt_names: Vec<String>,
    rule_nts: BTreeMap<String, NtId>,
    prods: Vec<Prod>,
}

impl Builder {
    fn fresh_nt(&mut self, name: &str) -> NtId {
        self.nt_names.push(name.to_string());
        self.nt_names.len() - 1
    }

    fn alternatives(&mut self, node: &BodyNode, path: &NodePath) -> Result<Vec<Vec<Sym>>, String> {
        match node {
            BodyNode::Alternatives(branches) => branches
                .iter()
                .enumerate()
                .map(|(i, b)| self.sequence(b, &path.child(i)))
                .collect(),
            other => Ok(vec![self.sequence(other, path)?]),
        }
    }

    fn sequence(&mut self, node: &BodyNode, path: &NodePath) -> Result<Vec<Sym>, String> {
        match node {
            BodyNode::Group(children) => children
                .iter()
                .enumerate()
                .map(|(i, c)| self.symbol(c, &path.child(i)))
                .collect(),
            other => Ok(vec![self.symbol(other, path)?]),
        }
    }

    fn symbol(&mut self, node: &BodyNode, path: &NodePath) -> Result<Sym, String> {
        let tag = Some(path.clone());
        match node {
            BodyNode::Keyword(text) => Ok(Sym {
                kind: SymKind::Keyword(text.clone()),
                tag,
            }),
            BodyNode::RuleCall(name) => {
                if let Some(&nt) = self.rule_nts.get(name) {
                    Ok(Sym {
                        kind: SymKind::Nt(nt),
                        tag,
                    })
                } else {
                    Ok(Sym {
                        kind: SymKind::Terminal(name.clone()),
                        tag,
                    })
                }
            }
            BodyNode::Assignment { child, .. } => {
                let mut sym = self.symbol(child, &path.child(0))?;
                sym.tag = tag;
                Ok(sym)
            }
            BodyNode::CrossReference { syntax_rule, .. } => {
                let syntax = syntax_rule.clone().unwrap_or_else(|| "ID".to_string());
                if let Some(&nt) = self.rule_nts.get(&syntax) {
                    Ok(Sym {
                        kind: SymKind::Nt(nt),
                        tag,
                    })
                } else {
                    Ok(Sym {
                        kind: SymKind::Terminal(syntax),
                        tag,
                    })
                }
            }
            BodyNode::Group(_) | BodyNode::Alternatives(_) => {
                let nt = self.fresh_nt(&format!("{}#{:?}", path.rule, path.steps));
                let alts = self.alternatives(node, path)?;
                for rhs in alts {
                    self.prods.push(Prod { lhs: nt, rhs });
                }
                Ok(Sym {
                    kind: SymKind::Nt(nt),
                    tag,
                })
            }
            BodyNode::UnorderedGroup(children) => {
                if children.len() > MAX_UNORDERED_GROUP {
                    return Err(format!(
                        "unordered group with {} elements in `{}` exceeds the supported size",
                        children.len(),
                        path.rule
                    ));
                }
                let syms: Vec<Sym> = children
                    .iter()
                    .enumerate()
                    .map(|(i, c)| self.symbol(c, &path.child(i)))
                    .collect::<Result<_, _>>()?;
                let nt = self.fresh_nt(&format!("{}#{:?}&", path.rule, path.steps));
                for perm in permutations(children.len()) {
                    let rhs = perm.iter().map(|&i| syms[i].clone()).collect();
                    self.prods.push(Prod { lhs: nt, rhs });
                }
                Ok(Sym {
                    kind: SymKind::Nt(nt),
                    tag,
                })
            }
            BodyNode::Repeat { child, cardinality } => {
                let unit = self.symbol(child, &path.child(0))?;
                let nt = self.fresh_nt(&format!(
                    "{}#{:?}{}",
                    path.rule,
                    path.steps,
                    cardinality.suffix()
                ));
                let self_sym = Sym {
                    kind: SymKind::Nt(nt),
                    tag: None,
                };
                match cardinality {
                    Cardinality::Optional => {
                        self.prods.push(Prod {
                            lhs: nt,
                            rhs: vec![],
                        });
                        self.prods.push(Prod {
                            lhs: nt,
                            rhs: vec![unit],
                        });
                    }
                    Cardinality::Star => {
                        self.prods.push(Prod {
                            lhs: nt,
                            rhs: vec![],
                        });
                        self.prods.push(Prod {
                            lhs: nt,
                            rhs: vec![unit, self_sym],
                        });
                    }
                    Cardinality::Plus => {
                        self.prods.push(Prod {
                            lhs: nt,
                            rhs: vec![unit.clone()],
                        });
                        self.prods.push(Prod {
                            lhs: nt,
                            rhs: vec![unit, self_sym],
                        });
                    }
                }
                Ok(Sym {
                    kind: SymKind::Nt(nt),
                    tag,
                })
            }
            BodyNode::CharRange { .. } | BodyNode::Wildcard | BodyNode::NegatedToken(_) => {
                // Validation keeps these out of parser rules.
                Err(format!(
                    "character-level construct in parser rule `{}`",
                    path.rule
                ))
            }
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    permute(&mut items, 0, &mut out);
    out.sort();
    out
}

fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}

fn compute_nullable(prods: &[Prod], nt_count: usize) -> Vec<bool> {
    let mut nullable = vec![false; nt_count];
    loop {
        let mut changed = false;
        for prod in prods {
            if nullable[prod.lhs] {
                continue;
            }
            let all = prod.rhs.iter().all(|s| match &s.kind {
                SymKind::Nt(id) => nullable[*id],
                _ => false,
            });
            if all {
                nullable[prod.lhs] = true;
                changed = true;
            }
        }
        if !changed {
            return nullable;
        }
    }
}
