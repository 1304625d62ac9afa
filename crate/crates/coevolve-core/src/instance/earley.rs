//! Earley recognition over token streams, with deterministic error
//! localization and resynchronization.
//!
//! Recovery model: when no item at the frontier can scan the next token, the
//! recognizer searches forward for the first token that either continues the
//! chart (possibly after giving up on pending nonterminals) or starts a fresh
//! instance of the entry rule. Tokens skipped on the way form a
//! deletion-style error region; a resynchronization point equal to the
//! frontier marks an insertion-style error anchored at the previous token.

use super::cfg::{Cfg, NtId, Sym, SymKind};
use super::lexer::{LexConfig, Token, TokenKind};
use crate::grammar::NodePath;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Item {
    prod: u32,
    dot: u16,
    origin: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum ErrPosition {
    /// The token that could not be scanned.
    Token(usize),
    /// Input ended while the entry rule was incomplete.
    Eof,
    /// Empty input that the entry rule does not accept.
    EmptyInput,
}

#[derive(Debug, Clone)]
pub(crate) struct RecError {
    pub position: ErrPosition,
    pub expected: Vec<String>,
    /// Token indices making up the error region.
    pub region: Vec<usize>,
}

pub(crate) struct Recognition {
    pub accepted: bool,
    pub errors: Vec<RecError>,
    /// Skipped token ranges, half-open.
    pub skipped: Vec<(usize, usize)>,
    sets: Vec<BTreeSet<Item>>,
}

pub(crate) struct Recognizer<'a> {
    pub cfg: &'a Cfg,
    /// Keywords of the grammar being checked; tokens lexed as keywords of
    /// another grammar version are matched against terminals instead.
    pub target_keywords: &'a BTreeSet<String>,
    pub lex_config: &'a LexConfig,
}

impl<'a> Recognizer<'a> {
    pub fn new(
        cfg: &'a Cfg,
        target_keywords: &'a BTreeSet<String>,
        lex_config: &'a LexConfig,
    ) -> Self {
        Recognizer {
            cfg,
            target_keywords,
            lex_config,
        }
    }

    fn matches(&self, kind: &SymKind, token: &Token) -> bool {
        match (kind, &token.kind) {
            (SymKind::Keyword(k), TokenKind::Keyword) => token.text == *k,
            (SymKind::Terminal(name), TokenKind::Terminal(t)) => name == t,
            (SymKind::Terminal(name), TokenKind::Keyword) => {
                // A keyword of some *other* grammar version; treat it as raw
                // text for this grammar's terminals.
                !self.target_keywords.contains(&token.text)
                    && self.lex_config.terminal_accepts(name, &token.text)
            }
            _ => false,
        }
    }

    fn next_sym(&self, item: &Item) -> Option<&Sym> {
        self.cfg.prods[item.prod as usize]
            .rhs
            .get(item.dot as usize)
    }

    fn is_complete(&self, item: &Item) -> bool {
        self.cfg.prods[item.prod as usize].rhs.len() == item.dot as usize
    }

    fn start_items(&self, origin: usize) -> BTreeSet<Item> {
        self.cfg.prods_of[self.cfg.start]
            .iter()
            .map(|&p| Item {
                prod: p as u32,
                dot: 0,
                origin: origin as u32,
            })
            .collect()
    }

    /// Prediction/completion closure of `seed` at position `pos`.
    fn closure(&self, seed: BTreeSet<Item>, pos: usize, sets: &[BTreeSet<Item>]) -> BTreeSet<Item> {
        let mut set = seed;
        let mut queue: Vec<Item> = set.iter().copied().collect();
        while let Some(item) = queue.pop() {
            if let Some(sym) = self.next_sym(&item) {
                if let SymKind::Nt(id) = sym.kind {
                    for &p in &self.cfg.prods_of[id] {
                        let predicted = Item {
                            prod: p as u32,
                            dot: 0,
                            origin: pos as u32,
                        };
                        if set.insert(predicted) {
                            queue.push(predicted);
                        }
                    }
                    // A nullable nonterminal may be skipped outright.
                    if self.cfg.nullable[id] {
                        let advanced = Item {
                            dot: item.dot + 1,
                            ..item
                        };
                        if set.insert(advanced) {
                            queue.push(advanced);
                        }
                    }
                }
            } else {
                // Complete: advance waiting parents from the origin set.
                let lhs = self.cfg.prods[item.prod as usize].lhs;
                let origin = item.origin as usize;
                let parents: Vec<Item> = if origin == pos {
                    set.iter().copied().collect()
                } else {
                    sets[origin].iter().copied().collect()
                };
                for parent in parents {
                    if let Some(sym) = self.next_sym(&parent) {
                        if sym.kind == SymKind::Nt(lhs) {
                            let advanced = Item {
                                dot: parent.dot + 1,
                                ..parent
                            };
                            if set.insert(advanced) {
                                queue.push(advanced);
                            }
                        }
                    }
                }
            }
        }
        set
    }

    fn scan(&self, set: &BTreeSet<Item>, token: &Token) -> BTreeSet<Item> {
        let mut out = BTreeSet::new();
        for item in set {
            if let Some(sym) = self.next_sym(item) {
                if !matches!(sym.kind, SymKind::Nt(_)) && self.matches(&sym.kind, token) {
                    out.insert(Item {
                        dot: item.dot + 1,
                        ..*item
                    });
                }
            }
        }
        out
    }

    /// Items reachable by abandoning pending nonterminals: every item with a
    /// nonterminal after its dot also appears advanced past it, completions
    /// propagating. Used only to find recovery points.
    fn abort_closure(
        &self,
        frontier: &BTreeSet<Item>,
        sets: &[BTreeSet<Item>],
        pos: usize,
    ) -> BTreeSet<Item> {
        let mut set = frontier.clone();
        let mut queue: Vec<Item> = set.iter().copied().collect();
        while let Some(item) = queue.pop() {
            if let Some(sym) = self.next_sym(&item) {
                if matches!(sym.kind, SymKind::Nt(_)) {
                    let advanced = Item {
                        dot: item.dot + 1,
                        ..item
                    };
                    if set.insert(advanced) {
                        queue.push(advanced);
                    }
                }
            } else {
                let lhs = self.cfg.prods[item.prod as usize].lhs;
                let origin = item.origin as usize;
                let parents: Vec<Item> = if origin == pos {
                    set.iter().copied().collect()
                } else {
                    sets[origin].iter().copied().collect()
                };
                for parent in parents {
                    if let Some(sym) = self.next_sym(&parent) {
                        if sym.kind == SymKind::Nt(lhs) {
                            let advanced = Item {
                                dot: parent.dot + 1,
                                ..parent
                            };
                            if set.insert(advanced) {
                                queue.push(advanced);
                            }
                        }
                    }
                }
            }
        }
        set
    }

    fn expected_of(&self, set: &BTreeSet<Item>) -> Vec<String> {
        let mut out = BTreeSet::new();
        for item in set {
            if let Some(sym) = self.next_sym(item) {
                match &sym.kind {
                    SymKind::Keyword(k) => {
                        out.insert(format!("'{k}'"));
                    }
                    SymKind::Terminal(t) => {
                        out.insert(t.clone());
                    }
                    SymKind::Nt(_) => {}
                }
            }
        }
        out.into_iter().collect()
    }

    /// Token matchers that can begin a fresh instance of the entry rule.
    fn starters(&self) -> Vec<SymKind> {
        let closed = self.closure(self.start_items(0), 0, &[]);
        let mut out: Vec<SymKind> = Vec::new();
        for item in &closed {
            if let Some(sym) = self.next_sym(item) {
                if !matches!(sym.kind, SymKind::Nt(_)) && !out.contains(&sym.kind) {
                    out.push(sym.kind.clone());
                }
            }
        }
        out
    }

    pub fn run(&self, tokens: &[Token]) -> Recognition {
        let n = tokens.len();
        let mut sets: Vec<BTreeSet<Item>> = vec![BTreeSet::new(); n + 1];
        let mut errors: Vec<RecError> = Vec::new();
        let mut skipped: Vec<(usize, usize)> = Vec::new();
        let starters = self.starters();

        sets[0] = self.closure(self.start_items(0), 0, &sets);
        let mut segment_start = 0usize;
        let mut i = 0usize;
        let mut gave_up = false;

        while i < n {
            let scanned = self.scan(&sets[i], &tokens[i]);
            if !scanned.is_empty() {
                sets[i + 1] = self.closure(scanned, i + 1, &sets);
                i += 1;
                continue;
            }
            let f = i;
            let expected = self.expected_of(&sets[f]);
            let abort = self.abort_closure(&sets[f], &sets, f);
            let mut resync: Option<(usize, bool)> = None;
            #[allow(clippy::needless_range_loop)] // j is the resync position
            for j in f..n {
                if !self.scan(&abort, &tokens[j]).is_empty() {
                    resync = Some((j, true));
                    break;
                }
                if starters.iter().any(|s| self.matches(s, &tokens[j])) {
                    resync = Some((j, false));
                    break;
                }
            }
            match resync {
                None => {
                    errors.push(RecError {
                        position: ErrPosition::Token(f),
                        expected,
                        region: (f..n).collect(),
                    });
                    skipped.push((f, n));
                    gave_up = true;
                    break;
                }
                Some((j, continuation)) => {
                    if j == f {
                        errors.push(RecError {
                            position: ErrPosition::Token(f),
                            expected,
                            region: vec![f.saturating_sub(1)],
                        });
                    } else {
                        errors.push(RecError {
                            position: ErrPosition::Token(f),
                            expected,
                            region: (f..j).collect(),
                        });
                        skipped.push((f, j));
                    }
                    if continuation {
                        let scanned = self.scan(&abort, &tokens[j]);
                        sets[j + 1] = self.closure(scanned, j + 1, &sets);
                        i = j + 1;
                    } else {
                        sets[j] = self.closure(self.start_items(j), j, &sets);
                        segment_start = j;
                        i = j;
                    }
                }
            }
        }

        if !gave_up {
            let final_ok = sets[n].iter().any(|item| {
                self.is_complete(item)
                    && self.cfg.prods[item.prod as usize].lhs == self.cfg.start
                    && item.origin as usize == segment_start
            });
            if !final_ok {
                if n == 0 {
                    errors.push(RecError {
                        position: ErrPosition::EmptyInput,
                        expected: self.expected_of(&sets[0]),
                        region: vec![],
                    });
                } else {
                    errors.push(RecError {
                        position: ErrPosition::Eof,
                        expected: self.expected_of(&sets[n]),
                        region: vec![n - 1],
                    });
                }
            }
        }
        // A clean accept is exactly "no errors recorded": every recovery and
        // the final acceptance check push an error when they trigger.
        let accepted = errors.is_empty();

        Recognition {
            accepted,
            errors,
            skipped,
            sets,
        }
    }

    /// Extracts one derivation tree from a clean accepting chart.
    pub fn derivation(&self, rec: &Recognition, tokens: &[Token]) -> Option<DerivationNode> {
        if !rec.accepted {
            return None;
        }
        let mut completed: BTreeMap<(NtId, usize), BTreeSet<usize>> = BTreeMap::new();
        for (end, set) in rec.sets.iter().enumerate() {
            for item in set {
                if self.is_complete(item) {
                    let lhs = self.cfg.prods[item.prod as usize].lhs;
                    completed
                        .entry((lhs, item.origin as usize))
                        .or_default()
                        .insert(end);
                }
            }
        }
        let builder = DerivationBuilder {
            rec: self,
            completed,
            tokens,
        };
        let start_sym = Sym {
            kind: SymKind::Nt(self.cfg.start),
            tag: None,
        };
        let node = builder.node(&start_sym, 0, tokens.len())?;
        // Unwrap the synthesized start wrapper.
        node.children.into_iter().next()
    }
}

/// One node of an accepting derivation.
#[derive(Debug, Clone)]
pub(crate) struct DerivationNode {
    /// Nonterminal id for rule/helper nodes, None for token leaves.
    pub nt: Option<NtId>,
    /// Path of the grammar body node this symbol occurrence came from.
    pub tag: Option<NodePath>,
    /// Token span, half-open.
    pub span: (usize, usize),
    pub children: Vec<DerivationNode>,
    /// Token index for leaves.
    pub token: Option<usize>,
}

struct DerivationBuilder<'a, 'b> {
    rec: &'b Recognizer<'a>,
    completed: BTreeMap<(NtId, usize), BTreeSet<usize>>,
    tokens: &'b [Token],
}

impl DerivationBuilder<'_, '_> {
    fn derivable(&self, sym: &SymKind, i: usize, j: usize) -> bool {
        match sym {
            SymKind::Nt(id) => self
                .completed
                .get(&(*id, i))
                .is_some_and(|ends| ends.contains(&j)),
            other => j == i + 1 && self.rec.matches(other, &self.tokens[i]),
        }
    }

    fn node(&self, sym: &Sym, i: usize, j: usize) -> Option<DerivationNode> {
        match &sym.kind {
            SymKind::Nt(id) => {
                for &p in &self.rec.cfg.prods_of[*id] {
                    let rhs = &self.rec.cfg.prods[p].rhs;
                    if let Some(splits) = self.split(rhs, i, j) {
                        let mut children = Vec::with_capacity(rhs.len());
                        let mut at = i;
                        for (sym, end) in rhs.iter().zip(splits) {
                            children.push(self.node(sym, at, end)?);
                            at = end;
                        }
                        return Some(DerivationNode {
                            nt: Some(*id),
                            tag: sym.tag.clone(),
                            span: (i, j),
                            children,
                            token: None,
                        });
                    }
                }
                None
            }
            _ => Some(DerivationNode {
                nt: None,
                tag: sym.tag.clone(),
                span: (i, j),
                children: Vec::new(),
                token: Some(i),
            }),
        }
    }

    /// End positions for each symbol of `rhs` spanning `[i, j)`, first
    /// solution in production order.
    fn split(&self, rhs: &[Sym], i: usize, j: usize) -> Option<Vec<usize>> {
        if rhs.is_empty() {
            return (i == j).then(Vec::new);
        }
        let sym = &rhs[0];
        let candidates: Vec<usize> = match &sym.kind {
            SymKind::Nt(id) => self
                .completed
                .get(&(*id, i))
                .map(|ends| ends.iter().copied().filter(|&e| e <= j).collect())
                .unwrap_or_default(),
            other => {
                if i < j && i < self.tokens.len() && self.rec.matches(other, &self.tokens[i]) {
                    vec![i + 1]
                } else {
                    vec![]
                }
            }
        };
        for end in candidates {
            if self.derivable(&sym.kind, i, end) {
                if let Some(mut rest) = self.split(&rhs[1..], end, j) {
                    let mut out = vec![end];
                    out.append(&mut rest);
                    return Some(out);
                }
            }
        }
        None
    }
}
