//! Token stream for the grammar language itself.

use super::GrammarError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(super) enum GTok {
    Ident(String),
    /// String literal, unescaped content.
    Str(String),
    Colon,
    Semi,
    Pipe,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Question,
    Star,
    Plus,
    Assign,
    PlusAssign,
    QuestionAssign,
    Amp,
    Bang,
    Dot,
    DotDot,
    /// Out-of-subset tokens surface here so the parser can report which
    /// construct was hit instead of a generic syntax error.
    LBrace,
    RBrace,
    Arrow,
    FatArrow,
    Caret,
}

impl GTok {
    pub(super) fn describe(&self) -> String {
        match self {
            GTok::Ident(s) => format!("identifier `{s}`"),
            GTok::Str(s) => format!("'{s}'"),
            GTok::Colon => "':'".into(),
            GTok::Semi => "';'".into(),
            GTok::Pipe => "'|'".into(),
            GTok::LParen => "'('".into(),
            GTok::RParen => "')'".into(),
            GTok::LBracket => "'['".into(),
            GTok::RBracket => "']'".into(),
            GTok::Question => "'?'".into(),
            GTok::Star => "'*'".into(),
            GTok::Plus => "'+'".into(),
            GTok::Assign => "'='".into(),
            GTok::PlusAssign => "'+='".into(),
            GTok::QuestionAssign => "'?='".into(),
            GTok::Amp => "'&'".into(),
            GTok::Bang => "'!'".into(),
            GTok::Dot => "'.'".into(),
            GTok::DotDot => "'..'".into(),
            GTok::LBrace => "'{'".into(),
            GTok::RBrace => "'}'".into(),
            GTok::Arrow => "'->'".into(),
            GTok::FatArrow => "'=>'".into(),
            GTok::Caret => "'^'".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(super) struct Spanned {
    pub tok: GTok,
    pub line: u32,
    pub col: u32,
}

/// Lexes the rule region of a grammar file. `line_offset` is the 1-based line
/// number of the first lexed line, so positions refer to the whole file.
pub(super) fn lex(text: &str, line_offset: u32) -> Result<Vec<Spanned>, GrammarError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = line_offset;
    let mut col = 1u32;

    macro_rules! push {
        ($tok:expr, $len:expr) => {{
            out.push(Spanned {
                tok: $tok,
                line,
                col,
            });
            i += $len;
            col += $len as u32;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '/' if next == Some('/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if next == Some('*') => {
                let (start_line, start_col) = (line, col);
                i += 2;
                col += 2;
                loop {
                    if i + 1 >= chars.len() {
                        return Err(GrammarError::Syntax {
                            line: start_line,
                            col: start_col,
                            expected: "terminated block comment".into(),
                        });
                    }
                    if chars[i] == '*' && chars[i + 1] == '/' {
                        i += 2;
                        col += 2;
                        break;
                    }
                    if chars[i] == '\n' {
                        line += 1;
                        col = 1;
                    } else {
                        col += 1;
                    }
                    i += 1;
                }
            }
            '\'' | '"' => {
                let quote = c;
                let (start_line, start_col) = (line, col);
                let mut value = String::new();
                let mut j = i + 1;
                let mut jcol = col + 1;
                let mut jline = line;
                loop {
                    match chars.get(j) {
                        None => {
                            return Err(GrammarError::Syntax {
                                line: start_line,
                                col: start_col,
                                expected: "terminated string literal".into(),
                            })
                        }
                        Some('\\') => {
                            let esc = chars.get(j + 1).copied().ok_or(GrammarError::Syntax {
                                line: jline,
                                col: jcol,
                                expected: "escape sequence".into(),
                            })?;
                            value.push(match esc {
                                'n' => '\n',
                                'r' => '\r',
                                't' => '\t',
                                other => other,
                            });
                            j += 2;
                            jcol += 2;
                        }
                        Some(&q) if q == quote => {
                            j += 1;
                            jcol += 1;
                            break;
                        }
                        Some(&'\n') => {
                            value.push('\n');
                            j += 1;
                            jline += 1;
                            jcol = 1;
                        }
                        Some(&other) => {
                            value.push(other);
                            j += 1;
                            jcol += 1;
                        }
                    }
                }
                out.push(Spanned {
                    tok: GTok::Str(value),
                    line,
                    col,
                });
                i = j;
                line = jline;
                col = jcol;
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let ident: String = chars[start..i].iter().collect();
                let len = (i - start) as u32;
                out.push(Spanned {
                    tok: GTok::Ident(ident),
                    line,
                    col,
                });
                col += len;
            }
            ':' => push!(GTok::Colon, 1),
            ';' => push!(GTok::Semi, 1),
            '|' => push!(GTok::Pipe, 1),
            '(' => push!(GTok::LParen, 1),
            ')' => push!(GTok::RParen, 1),
            '[' => push!(GTok::LBracket, 1),
            ']' => push!(GTok::RBracket, 1),
            '&' => push!(GTok::Amp, 1),
            '!' => push!(GTok::Bang, 1),
            '{' => push!(GTok::LBrace, 1),
            '}' => push!(GTok::RBrace, 1),
            '^' => push!(GTok::Caret, 1),
            '*' => push!(GTok::Star, 1),
            '?' if next == Some('=') => push!(GTok::QuestionAssign, 2),
            '?' => push!(GTok::Question, 1),
            '+' if next == Some('=') => push!(GTok::PlusAssign, 2),
            '+' => push!(GTok::Plus, 1),
            '=' if next == Some('>') => push!(GTok::FatArrow, 2),
            '=' => push!(GTok::Assign, 1),
            '-' if next == Some('>') => push!(GTok::Arrow, 2),
            '.' if next == Some('.') => push!(GTok::DotDot, 2),
            '.' => push!(GTok::Dot, 1),
            other => {
                return Err(GrammarError::Syntax {
                    line,
                    col,
                    expected: format!("grammar token, found `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_rule_shapes() {
        let toks = lex("DataType:\n    'datatype' name=ID ';';", 1).unwrap();
        let kinds: Vec<&GTok> = toks.iter().map(|s| &s.tok).collect();
        assert_eq!(
            kinds,
            vec![
                &GTok::Ident("DataType".into()),
                &GTok::Colon,
                &GTok::Str("datatype".into()),
                &GTok::Ident("name".into()),
                &GTok::Assign,
                &GTok::Ident("ID".into()),
                &GTok::Str(";".into()),
                &GTok::Semi,
            ]
        );
    }

    #[test]
    fn tracks_lines_through_comments() {
        let toks = lex("// note\nA: 'a';", 1).unwrap();
        assert_eq!(toks[0].line, 2);
    }

    #[test]
    fn string_escapes_unescape() {
        let toks = lex(r"T: '\\' '\'' '\n';", 1).unwrap();
        let strs: Vec<String> = toks
            .iter()
            .filter_map(|s| match &s.tok {
                GTok::Str(v) => Some(v.clone()),
                _ => None,
            })
            .collect();
        assert_eq!(
            strs,
            vec!["\\".to_string(), "'".to_string(), "\n".to_string()]
        );
    }
}
