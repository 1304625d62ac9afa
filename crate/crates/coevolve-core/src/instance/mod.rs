//! Instance model: lossless lexing, conformance checking, human-oriented
//! information extraction.

mod cfg;
mod conformance;
mod earley;
mod human;
mod lexer;

pub use conformance::{check_conformance, ConformanceError, ConformanceReport};
pub use human::{extract_human_info, HumanInfoProfile, LineSignature};
pub use lexer::{LexConfig, LexError, LexMode, Token, TokenKind, TriviaPiece};

pub(crate) use conformance::{check_text, derive_instance, rule_accepts_id};

use crate::grammar::GrammarAst;

/// Token stream with attached trivia permitting byte-exact round-trips.
#[derive(Debug, Clone)]
pub struct LosslessInstance {
    pub source: String,
    pub tokens: Vec<Token>,
    /// Leading trivia per token; the final entry is trailing trivia after the
    /// last token.
    pub trivia: Vec<Vec<TriviaPiece>>,
    line_starts: Vec<usize>,
    config: LexConfig,
}

/// Lexes instance text against a grammar's token definitions.
///
/// Fails with [`LexError`] on input no terminal matches.
pub fn lex_instance(text: &str, grammar: &GrammarAst) -> Result<LosslessInstance, LexError> {
    LosslessInstance::lex(text, LexConfig::from_grammar(grammar), LexMode::Strict)
}

/// Lenient variant for text that may predate the grammar: unlexable input
/// becomes error tokens (which then fail conformance) instead of aborting.
pub fn lex_instance_lenient(text: &str, grammar: &GrammarAst) -> LosslessInstance {
    LosslessInstance::lex(text, LexConfig::from_grammar(grammar), LexMode::Lenient)
        .expect("lenient lexing cannot fail")
}

impl LosslessInstance {
    pub(crate) fn lex(text: &str, config: LexConfig, mode: LexMode) -> Result<Self, LexError> {
        let raw = lexer::lex_raw(text, &config, mode)?;
        Ok(LosslessInstance {
            source: text.to_string(),
            tokens: raw.tokens,
            trivia: raw.trivia,
            line_starts: line_starts(text),
            config,
        })
    }

    pub(crate) fn config(&self) -> &LexConfig {
        &self.config
    }

    /// Concatenates all trivia and token texts back into the source.
    pub fn reassemble(&self) -> String {
        let mut out = String::with_capacity(self.source.len());
        for (i, token) in self.tokens.iter().enumerate() {
            for piece in &self.trivia[i] {
                out.push_str(piece.text());
            }
            out.push_str(&token.text);
        }
        if let Some(trailing) = self.trivia.last() {
            if self.trivia.len() == self.tokens.len() + 1 {
                for piece in trailing {
                    out.push_str(piece.text());
                }
            }
        }
        out
    }

    /// Number of lines in the source (empty source has zero).
    pub fn line_count(&self) -> usize {
        if self.source.is_empty() {
            0
        } else {
            self.source.lines().count()
        }
    }

    /// 1-based line number of a byte offset.
    pub fn line_of_offset(&self, offset: usize) -> u32 {
        match self.line_starts.binary_search(&offset) {
            Ok(idx) => idx as u32 + 1,
            Err(idx) => idx as u32,
        }
    }

    /// Text of the 1-based line `n`, without its newline.
    pub fn line_text(&self, n: u32) -> &str {
        let idx = (n as usize).saturating_sub(1);
        let start = self
            .line_starts
            .get(idx)
            .copied()
            .unwrap_or(self.source.len());
        let end = self
            .line_starts
            .get(idx + 1)
            .map(|next| next - 1)
            .unwrap_or(self.source.len());
        self.source[start..end].trim_end_matches('\r')
    }

    /// Indices of tokens whose span intersects the 1-based line `n`.
    pub fn tokens_on_line(&self, n: u32) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| {
                let start = self.line_of_offset(t.offset);
                let end = self.line_of_offset(t.end().saturating_sub(1).max(t.offset));
                start <= n && n <= end
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Byte range of the 1-based line `n`, including its newline.
    pub(crate) fn line_byte_range(&self, n: u32) -> (usize, usize) {
        let idx = (n as usize).saturating_sub(1);
        let start = self
            .line_starts
            .get(idx)
            .copied()
            .unwrap_or(self.source.len());
        let end = self
            .line_starts
            .get(idx + 1)
            .copied()
            .unwrap_or(self.source.len());
        (start, end)
    }

    /// Lines covered by the token at `index`.
    pub fn token_lines(&self, index: usize) -> std::ops::RangeInclusive<u32> {
        let token = &self.tokens[index];
        let start = self.line_of_offset(token.offset);
        let end = self.line_of_offset(token.end().saturating_sub(1).max(token.offset));
        start..=end
    }
}

fn line_starts(text: &str) -> Vec<usize> {
    let mut starts = vec![0];
    for (i, b) in text.bytes().enumerate() {
        if b == b'\n' && i + 1 < text.len() {
            starts.push(i + 1);
        }
    }
    starts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;

    const G1: &str = include_str!("../../fixtures/domainmodel/grammar_v1.xtext");
    const INSTANCE_V1: &str = include_str!("../../fixtures/domainmodel/instance_v1.dmodel");

    #[test]
    fn round_trip_is_byte_exact() {
        let grammar = parse_grammar(G1).unwrap();
        let instance = lex_instance(INSTANCE_V1, &grammar).unwrap();
        assert_eq!(instance.reassemble(), INSTANCE_V1);
    }

    #[test]
    fn fixture_has_four_comment_regions() {
        let grammar = parse_grammar(G1).unwrap();
        let instance = lex_instance(INSTANCE_V1, &grammar).unwrap();
        let comments: Vec<&TriviaPiece> = instance
            .trivia
            .iter()
            .flatten()
            .filter(|p| p.is_comment())
            .collect();
        assert_eq!(comments.len(), 4);
        assert!(comments[0].text().contains("This is the header."));
    }

    #[test]
    fn simple_entity_tokens() {
        let grammar = parse_grammar(G1).unwrap();
        let instance = lex_instance("entity Blog {}", &grammar).unwrap();
        let texts: Vec<&str> = instance.tokens.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, vec!["entity", "Blog", "{", "}"]);
        assert_eq!(
            instance.trivia[1],
            vec![TriviaPiece::Whitespace(" ".into())]
        );
    }

    #[test]
    fn line_fourteen_holds_a_full_entity_body() {
        let grammar = parse_grammar(G1).unwrap();
        let instance = lex_instance(INSTANCE_V1, &grammar).unwrap();
        let texts: Vec<&str> = instance
            .tokens_on_line(14)
            .into_iter()
            .map(|i| instance.tokens[i].text.as_str())
            .collect();
        assert_eq!(
            texts,
            vec!["entity", "HasAuthor", "{", "author", ":", "String", "}"]
        );
    }

    #[test]
    fn line_lookup() {
        let grammar = parse_grammar(G1).unwrap();
        let instance = lex_instance(INSTANCE_V1, &grammar).unwrap();
        assert_eq!(instance.line_count(), 25);
        assert_eq!(instance.line_text(5), "datatype String");
        assert_eq!(instance.line_text(10), "\t");
    }
}
