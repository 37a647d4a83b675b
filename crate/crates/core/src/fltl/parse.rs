//! Concrete syntax:
//!
//! ```text
//! true  false  name  ( φ )  !φ  X φ  F φ  G φ
//! φ U ψ   φ & ψ   φ | ψ   φ -> ψ   φ <-> ψ
//! ```
//!
//! Binding, tightest first: prefix operators, `U` (right-assoc), `&`, `|`,
//! then `->` / `<->` (right-assoc). So `p U q | r` is `(p U q) | r`.
//! `X`, `F`, `G` and `U` are reserved and cannot name propositions.

use super::ast::{Formula, PropId};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    True,
    False,
    Ident(String),
    Not,
    And,
    Or,
    Implies,
    Iff,
    Next,
    Eventually,
    Always,
    Until,
    LParen,
    RParen,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let mut emit = |kind: TokenKind| {
            tokens.push(Token {
                kind,
                line: start_line,
                column: start_col,
            })
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        let (kind, width) = if rest.starts_with("<->") {
            (TokenKind::Iff, 3)
        } else if rest.starts_with("->") {
            (TokenKind::Implies, 2)
        } else {
            match c {
                '!' => (TokenKind::Not, 1),
                '&' => (TokenKind::And, 1),
                '|' => (TokenKind::Or, 1),
                '(' => (TokenKind::LParen, 1),
                ')' => (TokenKind::RParen, 1),
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let len = chars[i..]
                        .iter()
                        .take_while(|c| c.is_ascii_alphanumeric() || **c == '_')
                        .count();
                    let word: String = chars[i..i + len].iter().collect();
                    let kind = match word.as_str() {
                        "true" => TokenKind::True,
                        "false" => TokenKind::False,
                        "X" => TokenKind::Next,
                        "F" => TokenKind::Eventually,
                        "G" => TokenKind::Always,
                        "U" => TokenKind::Until,
                        _ => TokenKind::Ident(word),
                    };
                    (kind, len)
                }
                other => {
                    return Err(Error::Syntax {
                        line,
                        column: col,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
        };
        emit(kind);
        i += width;
        col += width;
    }
    Ok(tokens)
}

/// Parse `text` against the declared proposition list `ap`.
pub fn parse_fltl(text: &str, ap: &[String]) -> Result<Formula> {
    let tokens = tokenize(text)?;
    let end = end_position(text);
    let mut parser = Parser {
        tokens,
        pos: 0,
        ap,
        end,
    };
    let f = parser.expr(0)?;
    if let Some(tok) = parser.peek() {
        return Err(parser.error_at(tok, "expected end of input"));
    }
    Ok(f)
}

fn end_position(text: &str) -> (usize, usize) {
    let line = text.matches('\n').count() + 1;
    let col = text.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    ap: &'a [String],
    end: (usize, usize),
}

const PREFIX_BP: u8 = 9;

fn infix_binding(kind: &TokenKind) -> Option<(u8, u8)> {
    match kind {
        TokenKind::Implies | TokenKind::Iff => Some((2, 1)),
        TokenKind::Or => Some((3, 4)),
        TokenKind::And => Some((5, 6)),
        TokenKind::Until => Some((8, 7)),
        _ => None,
    }
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Result<Token> {
        match self.tokens.get(self.pos) {
            Some(tok) => {
                self.pos += 1;
                Ok(tok.clone())
            }
            None => Err(Error::Syntax {
                line: self.end.0,
                column: self.end.1,
                message: "unexpected end of input".into(),
            }),
        }
    }

    fn error_at(&self, tok: &Token, message: &str) -> Error {
        Error::Syntax {
            line: tok.line,
            column: tok.column,
            message: format!("{message}, found {}", describe(&tok.kind)),
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Formula> {
        let mut lhs = self.prefix()?;
        while let Some(tok) = self.peek() {
            let Some((left_bp, right_bp)) = infix_binding(&tok.kind) else {
                break;
            };
            if left_bp < min_bp {
                break;
            }
            let op = self.next()?.kind;
            let rhs = self.expr(right_bp)?;
            lhs = match op {
                TokenKind::Implies => Formula::implies(lhs, rhs),
                TokenKind::Iff => Formula::iff(lhs, rhs),
                TokenKind::Or => Formula::or(lhs, rhs),
                TokenKind::And => Formula::and(lhs, rhs),
                TokenKind::Until => Formula::until(lhs, rhs),
                _ => unreachable!("infix_binding only admits binary operators"),
            };
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Formula> {
        let tok = self.next()?;
        Ok(match tok.kind {
            TokenKind::True => Formula::True,
            TokenKind::False => Formula::False,
            TokenKind::Ident(ref name) => match self.ap.iter().position(|p| p == name) {
                Some(i) => Formula::Atom(PropId(i)),
                None => {
                    return Err(Error::UndeclaredProposition {
                        name: name.clone(),
                        line: tok.line,
                        column: tok.column,
                    })
                }
            },
            TokenKind::Not => Formula::not(self.expr(PREFIX_BP)?),
            TokenKind::Next => Formula::next(self.expr(PREFIX_BP)?),
            TokenKind::Eventually => Formula::eventually(self.expr(PREFIX_BP)?),
            TokenKind::Always => Formula::always(self.expr(PREFIX_BP)?),
            TokenKind::LParen => {
                let inner = self.expr(0)?;
                let close = self.next()?;
                if close.kind != TokenKind::RParen {
                    return Err(self.error_at(&close, "expected `)`"));
                }
                inner
            }
            _ => return Err(self.error_at(&tok, "expected a formula")),
        })
    }
}

fn describe(kind: &TokenKind) -> String {
    match kind {
        TokenKind::True => "`true`".into(),
        TokenKind::False => "`false`".into(),
        TokenKind::Ident(name) => format!("`{name}`"),
        TokenKind::Not => "`!`".into(),
        TokenKind::And => "`&`".into(),
        TokenKind::Or => "`|`".into(),
        TokenKind::Implies => "`->`".into(),
        TokenKind::Iff => "`<->`".into(),
        TokenKind::Next => "`X`".into(),
        TokenKind::Eventually => "`F`".into(),
        TokenKind::Always => "`G`".into(),
        TokenKind::Until => "`U`".into(),
        TokenKind::LParen => "`(`".into(),
        TokenKind::RParen => "`)`".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ap(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn a(i: usize) -> Formula {
        Formula::atom(i)
    }

    #[test]
    fn eventually_atom() {
        assert_eq!(
            parse_fltl("F p", &ap(&["p"])).unwrap(),
            Formula::eventually(a(0))
        );
    }

    #[test]
    fn until_binds_tighter_than_or() {
        assert_eq!(
            parse_fltl("p U q | r", &ap(&["p", "q", "r"])).unwrap(),
            Formula::or(Formula::until(a(0), a(1)), a(2))
        );
    }

    #[test]
    fn until_is_right_associative() {
        assert_eq!(
            parse_fltl("p U q U r", &ap(&["p", "q", "r"])).unwrap(),
            Formula::until(a(0), Formula::until(a(1), a(2)))
        );
    }

    #[test]
    fn and_over_or_and_implication_lowest() {
        let f = parse_fltl("p | q & r -> !p", &ap(&["p", "q", "r"])).unwrap();
        assert_eq!(
            f,
            Formula::implies(
                Formula::or(a(0), Formula::and(a(1), a(2))),
                Formula::not(a(0))
            )
        );
        let g = parse_fltl("p -> q -> r", &ap(&["p", "q", "r"])).unwrap();
        assert_eq!(g, Formula::implies(a(0), Formula::implies(a(1), a(2))));
    }

    #[test]
    fn prefix_binds_tightest() {
        let f = parse_fltl("X p & G !q", &ap(&["p", "q"])).unwrap();
        assert_eq!(
            f,
            Formula::and(Formula::next(a(0)), Formula::always(Formula::not(a(1))))
        );
    }

    #[test]
    fn waypoint_conjuncts_structure() {
        let f = parse_fltl("F(a | b) & G((a | b) -> F c)", &ap(&["a", "b", "c"])).unwrap();
        let ab = Formula::or(a(0), a(1));
        assert_eq!(
            f,
            Formula::and(
                Formula::eventually(ab.clone()),
                Formula::always(Formula::implies(ab, Formula::eventually(a(2))))
            )
        );
    }

    #[test]
    fn undeclared_proposition_has_position() {
        let err = parse_fltl("p &\n  zz", &ap(&["p"])).unwrap_err();
        match err {
            Error::UndeclaredProposition { name, line, column } => {
                assert_eq!((name.as_str(), line, column), ("zz", 2, 3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_have_positions() {
        let err = parse_fltl("p & )", &ap(&["p"])).unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 1, column: 5, .. }), "{err:?}");
        let err = parse_fltl("(p", &ap(&["p"])).unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 1, column: 3, .. }), "{err:?}");
        let err = parse_fltl("p $ q", &ap(&["p", "q"])).unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 1, column: 3, .. }), "{err:?}");
        let err = parse_fltl("p q", &ap(&["p", "q"])).unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 1, column: 3, .. }), "{err:?}");
    }

    #[test]
    fn tokens_carry_positions() {
        let toks = tokenize("F(s27 <-> s34)\n-> G !x").unwrap();
        let pos: Vec<_> = toks.iter().map(|t| (t.line, t.column)).collect();
        assert_eq!(
            pos,
            vec![(1, 1), (1, 2), (1, 3), (1, 7), (1, 11), (1, 14), (2, 1), (2, 4), (2, 6), (2, 7)]
        );
    }
}
