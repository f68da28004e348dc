//! Recursive-descent parser for calculator scripts. Every failure carries
//! the offending position and the tokens that would have been accepted.

use gradedcalc_core::coeffs::Rat;
use num::BigInt;

use crate::ast::{self, Arg, Command, Expr, Rule, Span, Stmt};
use crate::lexer::{Lexer, Tok, Token};
use crate::run::Diagnostic;

pub fn parse(src: &str) -> Result<Vec<Stmt>, Diagnostic> {
    let mut p = Parser {
        lx: Lexer::new(src),
    };
    let mut stmts = Vec::new();
    while p.lx.peek(0)?.tok != Tok::Eof {
        stmts.push(p.statement()?);
    }
    Ok(stmts)
}

struct Parser<'a> {
    lx: Lexer<'a>,
}

impl<'a> Parser<'a> {
    fn unexpected(&mut self, expected: &str) -> Diagnostic {
        let tok = match self.lx.peek(0) {
            Ok(t) => t.clone(),
            Err(e) => return e,
        };
        Diagnostic::syntax(
            tok.span,
            format!("expected {expected}, found {}", tok.tok.describe()),
        )
    }

    fn expect(&mut self, want: Tok, expected: &str) -> Result<Token, Diagnostic> {
        if self.lx.peek(0)?.tok == want {
            self.lx.next()
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn eat(&mut self, want: Tok) -> Result<bool, Diagnostic> {
        if self.lx.peek(0)?.tok == want {
            self.lx.next()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Span), Diagnostic> {
        match self.lx.peek(0)?.tok.clone() {
            Tok::Ident(s) => {
                let t = self.lx.next()?;
                Ok((s, t.span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    /// An identifier usable as a new object or coordinate name.
    fn fresh_name(&mut self, what: &str) -> Result<(String, Span), Diagnostic> {
        let (name, span) = self.ident(what)?;
        if ast::is_reserved(&name) {
            return Err(Diagnostic::syntax(
                span,
                format!("`{name}` is a reserved word and cannot name {what}"),
            ));
        }
        Ok((name, span))
    }

    fn uint(&mut self, what: &str) -> Result<(u32, Span), Diagnostic> {
        match self.lx.peek(0)?.tok.clone() {
            Tok::Int(digits) => {
                let t = self.lx.next()?;
                let value: u32 = digits
                    .parse()
                    .map_err(|_| Diagnostic::syntax(t.span, format!("{what} out of range")))?;
                Ok((value, t.span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn int(&mut self, what: &str) -> Result<(i64, Span), Diagnostic> {
        let negative = self.lx.peek(0)?.tok == Tok::Minus;
        if negative {
            self.lx.next()?;
        }
        match self.lx.peek(0)?.tok.clone() {
            Tok::Int(digits) => {
                let t = self.lx.next()?;
                let value: i64 = digits
                    .parse()
                    .map_err(|_| Diagnostic::syntax(t.span, format!("{what} out of range")))?;
                Ok((if negative { -value } else { value }, t.span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn rational(&mut self) -> Result<Rat, Diagnostic> {
        let (num, _) = self.int("a rational number")?;
        if self.eat(Tok::Slash)? {
            let (den, dspan) = self.int("a denominator")?;
            if den == 0 {
                return Err(Diagnostic::syntax(dspan, "denominator is zero".into()));
            }
            Ok(Rat::new(BigInt::from(num), BigInt::from(den)))
        } else {
            Ok(Rat::from_integer(BigInt::from(num)))
        }
    }

    fn statement(&mut self) -> Result<Stmt, Diagnostic> {
        let head = self.lx.peek(0)?.clone();
        let word = match &head.tok {
            Tok::Ident(s) => s.clone(),
            _ => return Err(self.unexpected("a statement")),
        };
        match word.as_str() {
            "trunc" => {
                self.lx.next()?;
                let (weight, _) = self.uint("a truncation weight")?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt::Trunc {
                    weight,
                    span: head.span,
                })
            }
            "domain" => self.domain(head.span),
            "fn" => self.fn_stmt(head.span),
            "point" => self.point(head.span),
            "morphism" => self.morphism(head.span),
            "field" => self.field(head.span),
            "form" => self.form(head.span),
            "bundle" => self.bundle(head.span),
            "atlas" => self.atlas(head.span),
            "global" => self.global(head.span),
            _ => self.command(),
        }
    }

    fn domain(&mut self, span: Span) -> Result<Stmt, Diagnostic> {
        self.lx.next()?;
        let (name, _) = self.fresh_name("a domain")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut evens = Vec::new();
        let mut coords = Vec::new();
        let mut weight = None;
        loop {
            if self.eat(Tok::RBrace)? {
                break;
            }
            let (item, item_span) = self.ident("`even`, `coord`, `trunc`, or `}`")?;
            match item.as_str() {
                "even" => loop {
                    let (n, _) = self.fresh_name("a coordinate")?;
                    evens.push(n);
                    if !self.eat(Tok::Comma)? {
                        break;
                    }
                },
                "coord" => {
                    let mut names = Vec::new();
                    loop {
                        let (n, _) = self.fresh_name("a coordinate")?;
                        names.push(n);
                        if !self.eat(Tok::Comma)? {
                            break;
                        }
                    }
                    self.expect(Tok::Colon, "`:`")?;
                    let (degree, _) = self.int("a degree")?;
                    coords.extend(names.into_iter().map(|n| (n, degree)));
                }
                "trunc" => {
                    let (w, _) = self.uint("a truncation weight")?;
                    weight = Some(w);
                }
                other => {
                    return Err(Diagnostic::syntax(
                        item_span,
                        format!("expected `even`, `coord`, or `trunc`, found `{other}`"),
                    ))
                }
            }
            self.expect(Tok::Semi, "`;`")?;
        }
        Ok(Stmt::Domain {
            name,
            evens,
            coords,
            weight,
            span,
        })
    }

    fn on_clause(&mut self) -> Result<Option<String>, Diagnostic> {
        if self.lx.peek(0)?.tok == Tok::Ident("on".into()) {
            self.lx.next()?;
            let (d, _) = self.ident("a domain name")?;
            Ok(Some(d))
        } else {
            Ok(None)
        }
    }

    fn upto_clause(&mut self) -> Result<Option<u32>, Diagnostic> {
        if self.lx.peek(0)?.tok == Tok::Ident("upto".into()) {
            self.lx.next()?;
            let (w, _) = self.uint("a truncation weight")?;
            Ok(Some(w))
        } else {
            Ok(None)
        }
    }

    fn fn_stmt(&mut self, span: Span) -> Result<Stmt, Diagnostic> {
        self.lx.next()?;
        let (name, _) = self.fresh_name("a function")?;
        self.expect(Tok::Colon, "`:`")?;
        let (degree, _) = self.int("a degree")?;
        let domain = self.on_clause()?;
        self.expect(Tok::Eq, "`=`")?;
        let body = self.expr()?;
        let upto = self.upto_clause()?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(Stmt::Fn {
            name,
            degree,
            domain,
            body,
            upto,
            span,
        })
    }

    fn point(&mut self, span: Span) -> Result<Stmt, Diagnostic> {
        self.lx.next()?;
        let (name, _) = self.fresh_name("a point")?;
        let domain = self.on_clause()?;
        self.expect(Tok::Eq, "`=`")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut values = Vec::new();
        if !self.eat(Tok::RParen)? {
            loop {
                values.push(self.rational()?);
                if self.eat(Tok::RParen)? {
                    break;
                }
                self.expect(Tok::Comma, "`,` or `)`")?;
            }
        }
        self.expect(Tok::Semi, "`;`")?;
        Ok(Stmt::Point {
            name,
            domain,
            values,
            span,
        })
    }

    fn rules(&mut self) -> Result<Vec<Rule>, Diagnostic> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut rules = Vec::new();
        loop {
            if self.eat(Tok::RBrace)? {
                return Ok(rules);
            }
            let (coord, coord_span) = self.ident("a coordinate name")?;
            self.expect(Tok::Arrow, "`->`")?;
            let rhs = self.expr()?;
            self.expect(Tok::Semi, "`;`")?;
            rules.push(Rule {
                coord,
                coord_span,
                rhs,
            });
        }
    }

    fn morphism(&mut self, span: Span) -> Result<Stmt, Diagnostic> {
        self.lx.next()?;
        let (name, _) = self.fresh_name("a morphism")?;
        self.expect(Tok::Colon, "`:`")?;
        let (source, _) = self.ident("the source domain")?;
        self.expect(Tok::Arrow, "`->`")?;
        let (target, _) = self.ident("the target domain")?;
        let upto = self.upto_clause()?;
        let rules = self.rules()?;
        Ok(Stmt::Morphism {
            name,
            source,
            target,
            upto,
            rules,
            span,
        })
    }

    fn field(&mut self, span: Span) -> Result<Stmt, Diagnostic> {
        self.lx.next()?;
        let (name, _) = self.fresh_name("a field")?;
        self.expect(Tok::Colon, "`:`")?;
        let (degree, _) = self.int("a degree")?;
        let domain = self.on_clause()?;
        let upto = self.upto_clause()?;
        let rules = self.rules()?;
        Ok(Stmt::Field {
            name,
            degree,
            domain,
            upto,
            rules,
            span,
        })
    }

    fn form(&mut self, span: Span) -> Result<Stmt, Diagnostic> {
        self.lx.next()?;
        let (name, _) = self.fresh_name("a form")?;
        self.expect(Tok::Colon, "`:`")?;
        let (p, _) = self.uint("a form order")?;
        let domain = self.on_clause()?;
        self.expect(Tok::Eq, "`=`")?;
        let body = self.expr()?;
        let upto = self.upto_clause()?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(Stmt::Form {
            name,
            p,
            domain,
            body,
            upto,
            span,
        })
    }

    fn bundle(&mut self, span: Span) -> Result<Stmt, Diagnostic> {
        self.lx.next()?;
        let (name, _) = self.fresh_name("a bundle")?;
        let domain = self.on_clause()?;
        self.expect(Tok::Eq, "`=`")?;
        let (descriptor, _) = self.lx.json_value()?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(Stmt::Bundle {
            name,
            domain,
            descriptor,
            span,
        })
    }

    fn atlas(&mut self, span: Span) -> Result<Stmt, Diagnostic> {
        self.lx.next()?;
        let (name, _) = self.fresh_name("an atlas")?;
        self.expect(Tok::Eq, "`=`")?;
        let (descriptor, _) = self.lx.json_value()?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(Stmt::Atlas {
            name,
            descriptor,
            span,
        })
    }

    fn global(&mut self, span: Span) -> Result<Stmt, Diagnostic> {
        self.lx.next()?;
        let (name, _) = self.fresh_name("a global function")?;
        let atlas = match self.on_clause()? {
            Some(a) => a,
            None => return Err(self.unexpected("`on <atlas>`")),
        };
        self.expect(Tok::Eq, "`=`")?;
        let (descriptor, _) = self.lx.json_value()?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(Stmt::Global {
            name,
            atlas,
            descriptor,
            span,
        })
    }

    /// Statement-head identifier, joining adjacent `ident - ident` runs into
    /// hyphenated command names such as `invert-morphism`.
    fn command_name(&mut self) -> Result<(String, Span, usize), Diagnostic> {
        let head = self.lx.next()?;
        let mut end = head.end();
        let mut name = match head.tok {
            Tok::Ident(s) => s,
            _ => unreachable!("caller checked the head token"),
        };
        loop {
            let minus = self.lx.peek(0)?.clone();
            if minus.tok != Tok::Minus || minus.offset != end {
                break;
            }
            let part = self.lx.peek(1)?.clone();
            let part_end = part.end();
            match part.tok {
                Tok::Ident(s) if part.offset == minus.end() => {
                    self.lx.next()?;
                    self.lx.next()?;
                    name.push('-');
                    name.push_str(&s);
                    end = part_end;
                }
                _ => break,
            }
        }
        Ok((name, head.span, head.offset))
    }

    fn command(&mut self) -> Result<Stmt, Diagnostic> {
        let (name, span, start) = self.command_name()?;
        if !ast::is_command(&name) {
            return Err(Diagnostic::syntax(
                span,
                format!(
                    "unknown statement `{name}`; expected a declaration \
                     (`trunc`, `domain`, `fn`, `point`, `morphism`, `field`, `form`, \
                     `bundle`, `atlas`, `global`) or a command"
                ),
            ));
        }
        let mut args = Vec::new();
        let mut with = Vec::new();
        let mut bind = Vec::new();
        loop {
            let t = self.lx.peek(0)?.clone();
            match t.tok {
                Tok::Semi => break,
                Tok::Ident(ref s) if s == "as" => {
                    self.lx.next()?;
                    loop {
                        let (n, nspan) = self.fresh_name("a result")?;
                        bind.push((n, nspan));
                        match self.lx.peek(0)?.tok {
                            Tok::Semi => break,
                            Tok::Ident(_) => continue,
                            _ => return Err(self.unexpected("a result name or `;`")),
                        }
                    }
                    break;
                }
                Tok::Ident(ref s) if s == "with" => {
                    self.lx.next()?;
                    self.expect(Tok::LParen, "`(`")?;
                    loop {
                        with.push(self.expr()?);
                        if self.eat(Tok::RParen)? {
                            break;
                        }
                        self.expect(Tok::Comma, "`,` or `)`")?;
                    }
                }
                Tok::Ident(ref s) => {
                    if ast::is_reserved(s) && !ast::is_command(s) {
                        return Err(self.unexpected("a command argument or `;`"));
                    }
                    let s = s.clone();
                    self.lx.next()?;
                    args.push(Arg::Name(s, t.span));
                }
                Tok::Int(_) | Tok::Minus => {
                    let (v, vspan) = self.int("an integer argument")?;
                    args.push(Arg::Int(v, vspan));
                }
                _ => return Err(self.unexpected("a command argument, `as`, or `;`")),
            }
        }
        let semi = self.expect(Tok::Semi, "`;`")?;
        let raw = self.lx.src()[start..semi.end()]
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        Ok(Stmt::Command(Command {
            name,
            span,
            args,
            with,
            bind,
            raw,
        }))
    }

    fn expr(&mut self) -> Result<Expr, Diagnostic> {
        let mut lhs = self.term()?;
        loop {
            let t = self.lx.peek(0)?.clone();
            match t.tok {
                Tok::Plus => {
                    self.lx.next()?;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs), t.span);
                }
                Tok::Minus => {
                    self.lx.next()?;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs), t.span);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, Diagnostic> {
        let mut lhs = self.factor()?;
        loop {
            let t = self.lx.peek(0)?.clone();
            match t.tok {
                Tok::Star => {
                    self.lx.next()?;
                    let rhs = self.factor()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs), t.span);
                }
                Tok::Slash => {
                    self.lx.next()?;
                    let rhs = self.factor()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs), t.span);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, Diagnostic> {
        let t = self.lx.peek(0)?.clone();
        if t.tok == Tok::Minus {
            self.lx.next()?;
            let inner = self.factor()?;
            return Ok(Expr::Neg(Box::new(inner), t.span));
        }
        let mut atom = self.atom()?;
        while self.lx.peek(0)?.tok == Tok::Caret {
            let caret = self.lx.next()?;
            let (exp, _) = self.uint("an exponent")?;
            atom = Expr::Pow(Box::new(atom), exp, caret.span);
        }
        Ok(atom)
    }

    fn atom(&mut self) -> Result<Expr, Diagnostic> {
        let t = self.lx.peek(0)?.clone();
        match t.tok {
            Tok::Int(digits) => {
                self.lx.next()?;
                let value = BigInt::parse_bytes(digits.as_bytes(), 10).ok_or_else(|| {
                    Diagnostic::syntax(t.span, "unreadable integer literal".into())
                })?;
                Ok(Expr::Number(Rat::from_integer(value), t.span))
            }
            Tok::Ident(name) => {
                self.lx.next()?;
                Ok(Expr::Name(name, t.span))
            }
            Tok::LParen => {
                self.lx.next()?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(self.unexpected("a number, name, or `(`")),
        }
    }
}
