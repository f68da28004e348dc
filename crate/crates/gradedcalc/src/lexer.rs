//! Pull lexer with source positions. Tokens carry byte offsets so the
//! parser can join hyphenated command names and capture raw JSON spans.

use crate::ast::Span;
use crate::run::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    Comma,
    Semi,
    Colon,
    Eq,
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Eof,
}

impl Tok {
    /// How the token reads in an error message.
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(s) => format!("`{s}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
    pub offset: usize,
    pub len: usize,
}

impl Token {
    pub fn end(&self) -> usize {
        self.offset + self.len
    }
}

pub struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
    lookahead: Vec<Token>,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Lexer<'a> {
        Lexer {
            src,
            pos: 0,
            line: 1,
            col: 1,
            lookahead: Vec::new(),
        }
    }

    pub fn src(&self) -> &'a str {
        self.src
    }

    fn bump(&mut self, c: char) {
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            let rest = &self.src[self.pos..];
            let mut chars = rest.chars();
            match chars.next() {
                Some(c) if c.is_whitespace() => self.bump(c),
                Some('/') if rest.starts_with("//") => {
                    for c in rest.chars() {
                        if c == '\n' {
                            break;
                        }
                        self.bump(c);
                    }
                }
                _ => return,
            }
        }
    }

    fn scan(&mut self) -> Result<Token, Diagnostic> {
        self.skip_trivia();
        let span = Span {
            line: self.line,
            col: self.col,
        };
        let offset = self.pos;
        let rest = &self.src[self.pos..];
        let c = match rest.chars().next() {
            None => {
                return Ok(Token {
                    tok: Tok::Eof,
                    span,
                    offset,
                    len: 0,
                })
            }
            Some(c) => c,
        };
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let end = rest
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                .unwrap_or(rest.len());
            let text = &rest[..end];
            self.col += end as u32;
            self.pos += end;
            Tok::Ident(text.to_string())
        } else if c.is_ascii_digit() {
            let end = rest
                .find(|ch: char| !ch.is_ascii_digit())
                .unwrap_or(rest.len());
            let text = &rest[..end];
            self.col += end as u32;
            self.pos += end;
            Tok::Int(text.to_string())
        } else if rest.starts_with("->") {
            self.bump('-');
            self.bump('>');
            Tok::Arrow
        } else {
            let tok = match c {
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                ':' => Tok::Colon,
                '=' => Tok::Eq,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '^' => Tok::Caret,
                other => {
                    return Err(Diagnostic::syntax(
                        span,
                        format!("unexpected character `{other}`"),
                    ))
                }
            };
            self.bump(c);
            tok
        };
        Ok(Token {
            tok,
            span,
            offset,
            len: self.pos - offset,
        })
    }

    /// Look `n` tokens ahead without consuming (0 = the next token).
    pub fn peek(&mut self, n: usize) -> Result<&Token, Diagnostic> {
        while self.lookahead.len() <= n {
            let t = self.scan()?;
            self.lookahead.push(t);
        }
        Ok(&self.lookahead[n])
    }

    pub fn next(&mut self) -> Result<Token, Diagnostic> {
        self.peek(0)?;
        Ok(self.lookahead.remove(0))
    }

    /// Read one raw JSON value starting at the next token. The lookahead is
    /// rewound so the JSON text is scanned from the source directly.
    pub fn json_value(&mut self) -> Result<(serde_json::Value, Span), Diagnostic> {
        let start = self.peek(0)?.clone();
        // Rewind to the first buffered token; everything after it belongs to
        // the JSON text, not the token stream.
        self.pos = start.offset;
        self.line = start.span.line;
        self.col = start.span.col;
        self.lookahead.clear();
        let mut stream =
            serde_json::Deserializer::from_str(&self.src[self.pos..]).into_iter::<serde_json::Value>();
        let value = match stream.next() {
            Some(Ok(v)) => v,
            Some(Err(e)) => {
                return Err(Diagnostic::syntax(
                    start.span,
                    format!("malformed JSON descriptor: {e}"),
                ))
            }
            None => {
                return Err(Diagnostic::syntax(
                    start.span,
                    "expected a JSON descriptor".to_string(),
                ))
            }
        };
        // Re-walk the consumed text so line/column stay accurate.
        let consumed = stream.byte_offset();
        for c in self.src[self.pos..self.pos + consumed].chars() {
            if c == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        self.pos += consumed;
        Ok((value, start.span))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        let mut lx = Lexer::new(src);
        let mut out = Vec::new();
        loop {
            let t = lx.next().unwrap();
            let done = t.tok == Tok::Eof;
            out.push(t.tok);
            if done {
                return out;
            }
        }
    }

    #[test]
    fn tokens_and_spans() {
        let mut lx = Lexer::new("fn f : 2 = x*xi; // tail\n-> }");
        assert_eq!(lx.next().unwrap().tok, Tok::Ident("fn".into()));
        let f = lx.next().unwrap();
        assert_eq!(f.tok, Tok::Ident("f".into()));
        assert_eq!((f.span.line, f.span.col), (1, 4));
        assert_eq!(
            kinds("a->b - c"),
            vec![
                Tok::Ident("a".into()),
                Tok::Arrow,
                Tok::Ident("b".into()),
                Tok::Minus,
                Tok::Ident("c".into()),
                Tok::Eof,
            ]
        );
        let arrow = {
            let mut lx = Lexer::new("fn f : 2 = x; \n  -> }");
            loop {
                let t = lx.next().unwrap();
                if t.tok == Tok::Arrow {
                    break t;
                }
            }
        };
        assert_eq!((arrow.span.line, arrow.span.col), (2, 3));
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(
            kinds("x // all of this vanishes ; { }\n+ 1"),
            vec![
                Tok::Ident("x".into()),
                Tok::Plus,
                Tok::Int("1".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn json_capture_resumes_lexing() {
        let mut lx = Lexer::new("= {\"a\": [1, 2], \"b\": \"};\"} ; fn");
        assert_eq!(lx.next().unwrap().tok, Tok::Eq);
        let (v, _) = lx.json_value().unwrap();
        assert_eq!(v["a"][1], serde_json::json!(2));
        assert_eq!(v["b"], serde_json::json!("};"));
        assert_eq!(lx.next().unwrap().tok, Tok::Semi);
        assert_eq!(lx.next().unwrap().tok, Tok::Ident("fn".into()));
    }

    #[test]
    fn bad_character_is_positioned() {
        let mut lx = Lexer::new("x ?");
        lx.next().unwrap();
        let err = lx.next().unwrap_err();
        assert_eq!((err.line, err.col), (1, 3));
    }
}
