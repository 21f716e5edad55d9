//! Tag expressions: `cat.group.name` literals combined with `NOT`, `AND`,
//! `OR` and parentheses. `NOT` binds tightest, then `AND`, then `OR`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("tag expression error at position {position}: {message}")]
pub struct ExprError {
    /// Byte offset into the expression
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TagLiteral {
    pub category: String,
    pub group: String,
    pub name: String,
}

impl fmt::Display for TagLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.category, self.group, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TagExpr {
    Tag(TagLiteral),
    Not(Box<TagExpr>),
    And(Box<TagExpr>, Box<TagExpr>),
    Or(Box<TagExpr>, Box<TagExpr>),
}

impl TagExpr {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        let tokens = lex(text)?;
        let mut p = Parser { tokens, pos: 0, end: text.len() };
        let e = p.or()?;
        match p.tokens.get(p.pos) {
            None => Ok(e),
            Some((at, t)) => Err(ExprError { position: *at, message: format!("unexpected {t}") }),
        }
    }

    /// `has` answers whether the scene carries a tag.
    pub fn eval(&self, has: &dyn Fn(&TagLiteral) -> bool) -> bool {
        match self {
            TagExpr::Tag(t) => has(t),
            TagExpr::Not(e) => !e.eval(has),
            TagExpr::And(a, b) => a.eval(has) && b.eval(has),
            TagExpr::Or(a, b) => a.eval(has) || b.eval(has),
        }
    }
}

impl fmt::Display for TagExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TagExpr::Tag(t) => write!(f, "{t}"),
            TagExpr::Not(e) => write!(f, "NOT {e}"),
            TagExpr::And(a, b) => write!(f, "({a} AND {b})"),
            TagExpr::Or(a, b) => write!(f, "({a} OR {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Lit(TagLiteral),
    And,
    Or,
    Not,
    Open,
    Close,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Lit(l) => write!(f, "tag '{l}'"),
            Token::And => f.write_str("AND"),
            Token::Or => f.write_str("OR"),
            Token::Not => f.write_str("NOT"),
            Token::Open => f.write_str("'('"),
            Token::Close => f.write_str("')'"),
        }
    }
}

fn is_word(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.'
}

fn lex(text: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(at, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '(' {
            chars.next();
            out.push((at, Token::Open));
        } else if c == ')' {
            chars.next();
            out.push((at, Token::Close));
        } else if is_word(c) {
            let mut end = at;
            while let Some(&(i, c)) = chars.peek() {
                if !is_word(c) {
                    break;
                }
                end = i + c.len_utf8();
                chars.next();
            }
            let word = &text[at..end];
            let tok = match word {
                "AND" | "and" => Token::And,
                "OR" | "or" => Token::Or,
                "NOT" | "not" => Token::Not,
                _ => {
                    let parts: Vec<&str> = word.split('.').collect();
                    if parts.len() != 3 || parts.iter().any(|p| p.is_empty()) {
                        return Err(ExprError {
                            position: at,
                            message: format!("'{word}' is not a category.group.name tag"),
                        });
                    }
                    Token::Lit(TagLiteral {
                        category: parts[0].into(),
                        group: parts[1].into(),
                        name: parts[2].into(),
                    })
                }
            };
            out.push((at, tok));
        } else {
            return Err(ExprError { position: at, message: format!("unexpected character '{c}'") });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn or(&mut self) -> Result<TagExpr, ExprError> {
        let mut e = self.and()?;
        while self.peek() == Some(&Token::Or) {
            self.pos += 1;
            e = TagExpr::Or(Box::new(e), Box::new(self.and()?));
        }
        Ok(e)
    }

    fn and(&mut self) -> Result<TagExpr, ExprError> {
        let mut e = self.unary()?;
        while self.peek() == Some(&Token::And) {
            self.pos += 1;
            e = TagExpr::And(Box::new(e), Box::new(self.unary()?));
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<TagExpr, ExprError> {
        let Some((at, tok)) = self.tokens.get(self.pos).cloned() else {
            return Err(ExprError { position: self.end, message: "unexpected end of expression".into() });
        };
        self.pos += 1;
        match tok {
            Token::Not => Ok(TagExpr::Not(Box::new(self.unary()?))),
            Token::Lit(l) => Ok(TagExpr::Tag(l)),
            Token::Open => {
                let e = self.or()?;
                match self.tokens.get(self.pos) {
                    Some((_, Token::Close)) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    Some((at, t)) => Err(ExprError { position: *at, message: format!("expected ')', found {t}") }),
                    None => Err(ExprError { position: self.end, message: format!("unclosed '(' opened at {at}") }),
                }
            }
            t => Err(ExprError { position: at, message: format!("unexpected {t}") }),
        }
    }
}
