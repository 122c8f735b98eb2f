use thiserror::Error;

use super::{BinOp, Environment, Expression, Func, Node, Var};

/// Parse failure with a byte offset into the source text.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at offset {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    fn new(offset: usize, message: impl Into<String>) -> Self {
        ParseError { offset, message: message.into() }
    }

    pub(crate) fn unknown_identifier(name: &str, offset: usize) -> Self {
        ParseError::new(offset, format!("unknown identifier `{name}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    /// Returns the next token and its starting offset.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let Some(&c) = bytes.get(start) else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == b'.' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut exp = end + 1;
                if exp < bytes.len() && (bytes[exp] == b'+' || bytes[exp] == b'-') {
                    exp += 1;
                }
                if exp < bytes.len() && bytes[exp].is_ascii_digit() {
                    while exp < bytes.len() && bytes[exp].is_ascii_digit() {
                        exp += 1;
                    }
                    end = exp;
                }
            }
            let text = &self.src[start..end];
            let value = text
                .parse::<f64>()
                .map_err(|_| ParseError::new(start, format!("malformed number `{text}`")))?;
            self.pos = end;
            return Ok((Tok::Num(value), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((Tok::Ident(self.src[start..end].to_string()), start));
        }
        if b"+-*/^(),".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Op(c as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ParseError::new(start, format!("unexpected character `{ch}`")))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let (tok, at) = lexer.next()?;
        Ok(Parser { lexer, tok, at })
    }

    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn expect(&mut self, op: char) -> Result<(), ParseError> {
        if self.tok == Tok::Op(op) {
            self.bump()
        } else {
            Err(self.unexpected(&format!("expected `{op}`")))
        }
    }

    fn unexpected(&self, what: &str) -> ParseError {
        let found = match &self.tok {
            Tok::End => "end of input".to_string(),
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Op(c) => format!("`{c}`"),
        };
        ParseError::new(self.at, format!("{what}, found {found}"))
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expression::new(Node::Binary(op, lhs, rhs));
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expression::new(Node::Binary(op, lhs, rhs));
        }
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        match self.tok {
            Tok::Op('-') => {
                self.bump()?;
                let inner = self.unary()?;
                // Negative literals are a single constant node.
                Ok(match inner.as_constant() {
                    Some(v) => Expression::constant(-v),
                    None => Expression::new(Node::Neg(inner)),
                })
            }
            Tok::Op('+') => {
                self.bump()?;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.primary()?;
        if self.tok != Tok::Op('^') {
            return Ok(base);
        }
        self.bump()?;
        let at = self.at;
        let exponent = self.unary()?;
        if !exponent.free_vars().is_empty() {
            return Err(ParseError::new(at, "exponent must be a constant; write exp(b*log(a)) instead"));
        }
        let value = exponent
            .evaluate(&Environment::new())
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ParseError::new(at, "exponent does not evaluate to a finite constant"))?;
        Ok(Expression::new(Node::Pow(base, value)))
    }

    fn args(&mut self, name: &str, at: usize, count: usize) -> Result<Vec<Expression>, ParseError> {
        self.expect('(')?;
        let mut args = vec![self.expr()?];
        while self.tok == Tok::Op(',') {
            self.bump()?;
            args.push(self.expr()?);
        }
        self.expect(')')?;
        if args.len() != count {
            return Err(ParseError::new(
                at,
                format!("`{name}` takes {count} argument(s), got {}", args.len()),
            ));
        }
        Ok(args)
    }

    fn primary(&mut self) -> Result<Expression, ParseError> {
        let at = self.at;
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expression::constant(v))
            }
            Tok::Op('(') => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump()?;
                if self.tok == Tok::Op('(') {
                    if let Some(func) = Func::from_name(&name) {
                        let mut a = self.args(&name, at, 1)?;
                        return Ok(Expression::new(Node::Call(func, a.remove(0))));
                    }
                    return match name.as_str() {
                        "min" | "max" => {
                            let mut a = self.args(&name, at, 2)?;
                            let b = a.pop().unwrap();
                            let a = a.pop().unwrap();
                            Ok(Expression::new(if name == "min" { Node::Min(a, b) } else { Node::Max(a, b) }))
                        }
                        "ifle" => {
                            let a = self.args(&name, at, 4)?;
                            Ok(Expression::new(Node::IfLe(a[0].clone(), a[1].clone(), a[2].clone(), a[3].clone())))
                        }
                        _ => Err(ParseError::new(at, format!("unknown function `{name}`"))),
                    };
                }
                if name == "pi" {
                    return Ok(Expression::constant(std::f64::consts::PI));
                }
                Var::from_name(&name)
                    .map(Expression::var)
                    .ok_or_else(|| ParseError::unknown_identifier(&name, at))
            }
            _ => Err(self.unexpected("expected an expression")),
        }
    }
}

pub(super) fn parse(text: &str) -> Result<Expression, ParseError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.unexpected("expected end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expression {
        Expression::var(Var::x(i))
    }

    fn bin(op: BinOp, a: Expression, b: Expression) -> Expression {
        Expression::new(Node::Binary(op, a, b))
    }

    #[test]
    fn grammar_examples() {
        let e = parse("x1^2 + sin(x2)").unwrap();
        let expected = bin(
            BinOp::Add,
            Expression::new(Node::Pow(x(1), 2.0)),
            Expression::new(Node::Call(Func::Sin, x(2))),
        );
        assert_eq!(e, expected);

        let e = parse("min(x1+0.1, x2)").unwrap();
        let expected = Expression::new(Node::Min(bin(BinOp::Add, x(1), Expression::constant(0.1)), x(2)));
        assert_eq!(e, expected);
    }

    #[test]
    fn open_paren_fails_at_offset_one() {
        let err = parse("(").unwrap_err();
        assert_eq!(err.offset, 1);
    }

    #[test]
    fn error_cases() {
        assert_eq!(parse("foo(x1)").unwrap_err().offset, 0);
        assert!(parse("foo(x1)").unwrap_err().message.contains("unknown function"));
        assert!(parse("x1 + z").unwrap_err().message.contains("unknown identifier"));
        assert_eq!(parse("x1 +").unwrap_err().offset, 4);
        assert_eq!(parse("x1 ^ x2").unwrap_err().offset, 5);
        assert!(parse("min(x1)").is_err());
        assert!(parse("x1 x2").is_err());
        assert!(parse("2 # 3").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(parse("x1 - x2 - x3").unwrap(), bin(BinOp::Sub, bin(BinOp::Sub, x(1), x(2)), x(3)));
        assert_eq!(parse("x1 + x2*x3").unwrap(), bin(BinOp::Add, x(1), bin(BinOp::Mul, x(2), x(3))));
        assert_eq!(parse("-x1^2").unwrap(), Expression::new(Node::Neg(Expression::new(Node::Pow(x(1), 2.0)))));
        assert_eq!(parse("x1^2^3").unwrap(), Expression::new(Node::Pow(x(1), 8.0)));
        assert_eq!(parse("x1^(1/2)").unwrap(), Expression::new(Node::Pow(x(1), 0.5)));
        assert_eq!(parse("-3").unwrap(), Expression::constant(-3.0));
        assert_eq!(parse("2.5e-3").unwrap(), Expression::constant(2.5e-3));
    }
}
