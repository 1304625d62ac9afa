//! Recursive-descent parser for the supported grammar subset.

use super::lexer::{lex, GTok, Spanned};
use super::{
    AssignmentOperator, BodyNode, Cardinality, GrammarAst, GrammarError, RuleDef, RuleKind,
};

/// Parses a grammar file into an AST.
///
/// Header directives (`grammar`, `import`, `generate`) are captured as opaque
/// preamble text; the rule region is parsed into [`RuleDef`]s. Out-of-subset
/// syntax (semantic actions, predicates, `hidden(...)`, fragments, enum
/// rules) is reported as [`GrammarError::Unsupported`].
pub fn parse_grammar(text: &str) -> Result<GrammarAst, GrammarError> {
    let (preamble, rule_region, line_offset) = split_preamble(text);
    let name = extract_grammar_name(preamble);
    let tokens = lex(rule_region, line_offset)?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut rules = Vec::new();
    while !parser.at_end() {
        rules.push(parser.rule()?);
    }
    if rules.is_empty() {
        return Err(GrammarError::Syntax {
            line: line_offset,
            col: 1,
            expected: "at least one rule".into(),
        });
    }
    GrammarAst::new(name, preamble.to_string(), rules)
}

/// Splits `text` into (preamble, rule region, 1-based line of rule region).
///
/// Preamble lines are blank lines, comment lines, and lines starting with
/// `grammar`, `import` or `generate`; a multi-line block comment keeps the
/// preamble open until it closes.
fn split_preamble(text: &str) -> (&str, &str, u32) {
    let mut offset = 0;
    let mut line_no = 1u32;
    let mut in_block_comment = false;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_start();
        let is_preamble = if in_block_comment {
            true
        } else {
            trimmed.is_empty()
                || trimmed.starts_with("//")
                || trimmed.starts_with("/*")
                || starts_with_word(trimmed, "grammar")
                || starts_with_word(trimmed, "import")
                || starts_with_word(trimmed, "generate")
        };
        if !is_preamble {
            break;
        }
        // Track block-comment state across lines, ignoring comment markers in
        // string literals (directive lines only hold URIs in double quotes).
        let mut rest = line;
        loop {
            if in_block_comment {
                match rest.find("*/") {
                    Some(idx) => {
                        in_block_comment = false;
                        rest = &rest[idx + 2..];
                    }
                    None => break,
                }
            } else {
                match rest.find("/*") {
                    Some(idx) if !rest[..idx].contains("//") => {
                        in_block_comment = true;
                        rest = &rest[idx + 2..];
                    }
                    _ => break,
                }
            }
        }
        offset += line.len();
        line_no += 1;
    }
    (&text[..offset], &text[offset..], line_no)
}

fn starts_with_word(s: &str, word: &str) -> bool {
    s.starts_with(word)
        && s[word.len()..]
            .chars()
            .next()
            .is_none_or(|c| c.is_whitespace())
}

fn extract_grammar_name(preamble: &str) -> String {
    for line in preamble.lines() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("grammar") {
            let rest = rest.trim_start();
            let name: String = rest
                .chars()
                .take_while(|c| c.is_alphanumeric() || *c == '_' || *c == '.')
                .collect();
            if !name.is_empty() {
                return name;
            }
        }
    }
    String::new()
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&GTok> {
        self.tokens.get(self.pos).map(|s| &s.tok)
    }

    fn peek2(&self) -> Option<&GTok> {
        self.tokens.get(self.pos + 1).map(|s| &s.tok)
    }

    fn here(&self) -> (u32, u32) {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1))
    }

    fn bump(&mut self) -> Option<Spanned> {
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        tok
    }

    fn error(&self, expected: &str) -> GrammarError {
        let (line, col) = self.here();
        let found = self
            .peek()
            .map(|t| format!("{expected}, found {}", t.describe()))
            .unwrap_or_else(|| format!("{expected}, found end of input"));
        GrammarError::Syntax {
            line,
            col,
            expected: found,
        }
    }

    fn unsupported(&self, construct: &str) -> GrammarError {
        let (line, _) = self.here();
        GrammarError::Unsupported {
            line,
            construct: construct.to_string(),
        }
    }

    fn expect(&mut self, tok: GTok, what: &str) -> Result<(), GrammarError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(what))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, GrammarError> {
        match self.peek() {
            Some(GTok::Ident(_)) => {
                let Some(Spanned {
                    tok: GTok::Ident(name),
                    ..
                }) = self.bump()
                else {
                    unreachable!()
                };
                Ok(name)
            }
            _ => Err(self.error(what)),
        }
    }

    fn qualified_ident(&mut self, what: &str) -> Result<String, GrammarError> {
        let mut name = self.ident(what)?;
        while self.peek() == Some(&GTok::Dot) {
            self.pos += 1;
            name.push('.');
            name.push_str(&self.ident("identifier after '.'")?);
        }
        Ok(name)
    }

    fn rule(&mut self) -> Result<RuleDef, GrammarError> {
        let mut kind = RuleKind::Parser;
        if let Some(GTok::Ident(word)) = self.peek() {
            match word.as_str() {
                "terminal" => {
                    // `terminal` could itself be a rule name (`terminal X:`)
                    // only when followed by ':'; otherwise it is the modifier.
                    if !matches!(self.peek2(), Some(GTok::Colon)) {
                        kind = RuleKind::Terminal;
                        self.pos += 1;
                        if let Some(GTok::Ident(w)) = self.peek() {
                            if w == "fragment" {
                                return Err(self.unsupported("terminal fragment rule"));
                            }
                        }
                    }
                }
                "enum" if !matches!(self.peek2(), Some(GTok::Colon)) => {
                    return Err(self.unsupported("enum rule"));
                }
                "fragment" if !matches!(self.peek2(), Some(GTok::Colon)) => {
                    return Err(self.unsupported("fragment rule"));
                }
                _ => {}
            }
        }
        let name = self.ident("rule name")?;
        let mut returns_type = None;
        loop {
            match self.peek() {
                Some(GTok::Ident(w)) if w == "returns" => {
                    self.pos += 1;
                    returns_type = Some(self.qualified_ident("return type")?);
                }
                Some(GTok::Ident(w)) if w == "hidden" => {
                    return Err(self.unsupported("hidden(...) clause"));
                }
                Some(GTok::LBracket) => {
                    // Xtext rule parameters `<Param>` lex differently; a '['
                    // here is a stray cross-reference.
                    return Err(self.error("':' after rule name"));
                }
                _ => break,
            }
        }
        self.expect(GTok::Colon, "':' after rule name")?;
        let body = self.alternatives(kind)?;
        self.expect(GTok::Semi, "';' terminating the rule")?;
        Ok(RuleDef {
            name,
            kind,
            returns_type,
            body,
        })
    }

    fn alternatives(&mut self, kind: RuleKind) -> Result<BodyNode, GrammarError> {
        let mut branches = vec![self.unordered(kind)?];
        while self.peek() == Some(&GTok::Pipe) {
            self.pos += 1;
            branches.push(self.unordered(kind)?);
        }
        Ok(BodyNode::alternatives(branches))
    }

    fn unordered(&mut self, kind: RuleKind) -> Result<BodyNode, GrammarError> {
        let mut parts = vec![self.sequence(kind)?];
        while self.peek() == Some(&GTok::Amp) {
            self.pos += 1;
            parts.push(self.sequence(kind)?);
        }
        Ok(BodyNode::unordered(parts))
    }

    fn sequence(&mut self, kind: RuleKind) -> Result<BodyNode, GrammarError> {
        let mut items = Vec::new();
        while self.starts_term(kind) {
            items.push(self.term(kind)?);
        }
        if items.is_empty() {
            return Err(self.error("rule body element"));
        }
        Ok(BodyNode::group(items))
    }

    fn starts_term(&self, kind: RuleKind) -> bool {
        match self.peek() {
            Some(GTok::Ident(_) | GTok::Str(_) | GTok::LParen | GTok::LBracket) => true,
            Some(GTok::Bang | GTok::Dot) => kind == RuleKind::Terminal,
            Some(GTok::LBrace | GTok::Arrow | GTok::FatArrow | GTok::Caret) => true,
            _ => false,
        }
    }

    fn term(&mut self, kind: RuleKind) -> Result<BodyNode, GrammarError> {
        let atom = self.atom(kind)?;
        let node = match self.peek() {
            Some(GTok::Question) => {
                self.pos += 1;
                BodyNode::repeat(atom, Cardinality::Optional)
            }
            Some(GTok::Star) => {
                self.pos += 1;
                BodyNode::repeat(atom, Cardinality::Star)
            }
            Some(GTok::Plus) => {
                self.pos += 1;
                BodyNode::repeat(atom, Cardinality::Plus)
            }
            _ => atom,
        };
        Ok(node)
    }

    fn atom(&mut self, kind: RuleKind) -> Result<BodyNode, GrammarError> {
        match self.peek() {
            Some(GTok::LBrace) => Err(self.unsupported("semantic action `{...}`")),
            Some(GTok::FatArrow) => Err(self.unsupported("predicate `=>`")),
            Some(GTok::Caret) => Err(self.unsupported("escaped keyword identifier `^`")),
            Some(GTok::Arrow) => {
                if kind == RuleKind::Terminal {
                    Err(self.unsupported("until operator `->` in terminal rule"))
                } else {
                    Err(self.unsupported("predicate `->`"))
                }
            }
            Some(GTok::Str(_)) => {
                let (line, col) = self.here();
                let Some(Spanned {
                    tok: GTok::Str(text),
                    ..
                }) = self.bump()
                else {
                    unreachable!()
                };
                if self.peek() == Some(&GTok::DotDot) {
                    if kind != RuleKind::Terminal {
                        return Err(self.unsupported("character range outside a terminal rule"));
                    }
                    self.pos += 1;
                    let hi_text = match self.bump() {
                        Some(Spanned {
                            tok: GTok::Str(s), ..
                        }) => s,
                        _ => return Err(self.error("upper bound of character range")),
                    };
                    let lo = single_char(&text).ok_or(GrammarError::Syntax {
                        line,
                        col,
                        expected: "single-character range bound".into(),
                    })?;
                    let hi = single_char(&hi_text).ok_or(GrammarError::Syntax {
                        line,
                        col,
                        expected: "single-character range bound".into(),
                    })?;
                    return Ok(BodyNode::CharRange { lo, hi });
                }
                if text.is_empty() {
                    return Err(GrammarError::Syntax {
                        line,
                        col,
                        expected: "non-empty keyword".into(),
                    });
                }
                Ok(BodyNode::Keyword(text))
            }
            Some(GTok::Ident(_)) => {
                let feature = self.ident("identifier")?;
                let operator = match self.peek() {
                    Some(GTok::Assign) => Some(AssignmentOperator::Assign),
                    Some(GTok::PlusAssign) => Some(AssignmentOperator::Append),
                    Some(GTok::QuestionAssign) => Some(AssignmentOperator::BoolFlag),
                    _ => None,
                };
                match operator {
                    Some(op) => {
                        self.pos += 1;
                        let child = self.assignable(kind)?;
                        Ok(BodyNode::Assignment {
                            feature,
                            operator: op,
                            child: Box::new(child),
                        })
                    }
                    None => Ok(BodyNode::RuleCall(feature)),
                }
            }
            Some(GTok::LParen) => {
                self.pos += 1;
                let inner = self.alternatives(kind)?;
                self.expect(GTok::RParen, "')'")?;
                Ok(inner)
            }
            Some(GTok::LBracket) => self.cross_reference(),
            Some(GTok::Bang) => {
                if kind != RuleKind::Terminal {
                    return Err(self.unsupported("negated token outside a terminal rule"));
                }
                self.pos += 1;
                let inner = self.atom(kind)?;
                Ok(BodyNode::NegatedToken(Box::new(inner)))
            }
            Some(GTok::Dot) => {
                if kind != RuleKind::Terminal {
                    return Err(self.unsupported("wildcard outside a terminal rule"));
                }
                self.pos += 1;
                Ok(BodyNode::Wildcard)
            }
            _ => Err(self.error("rule body element")),
        }
    }

    fn assignable(&mut self, kind: RuleKind) -> Result<BodyNode, GrammarError> {
        match self.peek() {
            Some(GTok::Str(_)) => {
                let Some(Spanned {
                    tok: GTok::Str(text),
                    line,
                    col,
                }) = self.bump()
                else {
                    unreachable!()
                };
                if text.is_empty() {
                    return Err(GrammarError::Syntax {
                        line,
                        col,
                        expected: "non-empty keyword".into(),
                    });
                }
                Ok(BodyNode::Keyword(text))
            }
            Some(GTok::Ident(_)) => Ok(BodyNode::RuleCall(self.ident("rule call")?)),
            Some(GTok::LBracket) => self.cross_reference(),
            Some(GTok::LParen) => {
                self.pos += 1;
                let inner = self.alternatives(kind)?;
                self.expect(GTok::RParen, "')'")?;
                Ok(inner)
            }
            _ => Err(self.error("assigned value")),
        }
    }

    fn cross_reference(&mut self) -> Result<BodyNode, GrammarError> {
        self.expect(GTok::LBracket, "'['")?;
        let target_rule = self.qualified_ident("cross-reference target")?;
        let syntax_rule = if self.peek() == Some(&GTok::Pipe) {
            self.pos += 1;
            Some(self.qualified_ident("cross-reference syntax rule")?)
        } else {
            None
        };
        self.expect(GTok::RBracket, "']'")?;
        Ok(BodyNode::CrossReference {
            target_rule,
            syntax_rule,
        })
    }
}

fn single_char(s: &str) -> Option<char> {
    let mut chars = s.chars();
    let c = chars.next()?;
    chars.next().is_none().then_some(c)
}
