//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ['^' exponent]
//! exponent := ['-'] integer | '(' ['-' | '+'] integer ')'
//! atom   := number | 'i' | var | func '(' expr ')' | '(' expr ')'
//! func   := 'conj' | 'abs2' | 'exp' | 'log'
//! var    := 'z' digits | 'w' digits
//! ```

use num_complex::Complex64;

use super::{Expression, Node, ParseError, ParseErrorKind};

/// Parses `src` as an expression in `z1..z{dim}`.
pub fn parse(src: &str, dim: usize) -> Result<Expression, ParseError> {
    Parser::new(src, dim, None).run()
}

/// Parses an expression on a total space with base coordinates `z1..zn`
/// and fiber coordinates `w1..wr`. Fiber coordinate `wk` becomes variable
/// `z{n+k}` and the resulting chart dimension is `n + r`.
pub fn parse_with_fiber(src: &str, n: usize, r: usize) -> Result<Expression, ParseError> {
    Parser::new(src, n + r, Some((n, r))).run()
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x:?}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".into(),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    dim: usize,
    fiber: Option<(usize, usize)>,
    tok: Tok,
    tok_start: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, dim: usize, fiber: Option<(usize, usize)>) -> Self {
        Self {
            src,
            pos: 0,
            dim,
            fiber,
            tok: Tok::End,
            tok_start: 0,
        }
    }

    fn run(mut self) -> Result<Expression, ParseError> {
        self.advance()?;
        let root = self.expr()?;
        if self.tok != Tok::End {
            return Err(self.unexpected("operator or end of input"));
        }
        Ok(Expression { root, dim: self.dim })
    }

    fn error_at(&self, offset: usize, kind: ParseErrorKind) -> ParseError {
        let before = &self.src[..offset.min(self.src.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
        ParseError { line, column, kind }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let kind = match self.tok {
            Tok::End => ParseErrorKind::UnexpectedEnd(expected.into()),
            ref t => ParseErrorKind::UnexpectedToken {
                expected: expected.into(),
                found: t.describe(),
            },
        };
        self.error_at(self.tok_start, kind)
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        while let Some(ch) = self.peek_char() {
            if ch.is_whitespace() {
                self.pos += ch.len_utf8();
            } else {
                break;
            }
        }
        self.tok_start = self.pos;
        let Some(ch) = self.peek_char() else {
            self.tok = Tok::End;
            return Ok(());
        };
        if ch.is_ascii_digit() || ch == '.' {
            self.tok = Tok::Num(self.number()?);
        } else if ch.is_ascii_alphabetic() {
            let start = self.pos;
            while let Some(c) = self.peek_char() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            self.tok = Tok::Ident(self.src[start..self.pos].to_string());
        } else if "+-*/^()".contains(ch) {
            self.pos += 1;
            self.tok = Tok::Sym(ch);
        } else {
            return Err(self.error_at(self.pos, ParseErrorKind::UnexpectedChar(ch)));
        }
        Ok(())
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let mut end = start;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
        if end < bytes.len() && bytes[end] == b'.' {
            end += 1;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut k = end + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            let digits = k;
            while k < bytes.len() && bytes[k].is_ascii_digit() {
                k += 1;
            }
            if k > digits {
                end = k;
            }
        }
        let text = &self.src[start..end];
        self.pos = end;
        text.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| self.error_at(start, ParseErrorKind::BadNumber(text.to_string())))
    }

    fn expect(&mut self, sym: char) -> Result<(), ParseError> {
        if self.tok == Tok::Sym(sym) {
            self.advance()
        } else {
            Err(self.unexpected(&format!("`{sym}`")))
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Sym('+') => {
                    self.advance()?;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Sym('-') => {
                    self.advance()?;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.tok {
                Tok::Sym('*') => {
                    self.advance()?;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Sym('/') => {
                    self.advance()?;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.tok {
            Tok::Sym('-') => {
                self.advance()?;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Tok::Sym('+') => {
                self.advance()?;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.tok != Tok::Sym('^') {
            return Ok(base);
        }
        self.advance()?;
        let k = if self.tok == Tok::Sym('(') {
            self.advance()?;
            let k = self.signed_integer()?;
            self.expect(')')?;
            k
        } else {
            self.signed_integer()?
        };
        Ok(Node::Pow(Box::new(base), k))
    }

    fn signed_integer(&mut self) -> Result<i32, ParseError> {
        let negative = match self.tok {
            Tok::Sym('-') => {
                self.advance()?;
                true
            }
            Tok::Sym('+') => {
                self.advance()?;
                false
            }
            _ => false,
        };
        let start = self.tok_start;
        let text = &self.src[start..self.pos];
        match self.tok {
            Tok::Num(_) if text.bytes().all(|b| b.is_ascii_digit()) => {
                let k: i32 = text
                    .parse()
                    .map_err(|_| self.error_at(start, ParseErrorKind::BadNumber(text.to_string())))?;
                self.advance()?;
                Ok(if negative { -k } else { k })
            }
            _ => Err(self.unexpected("integer exponent")),
        }
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        match self.tok.clone() {
            Tok::Num(x) => {
                self.advance()?;
                Ok(Node::Const(Complex64::new(x, 0.0)))
            }
            Tok::Sym('(') => {
                self.advance()?;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let start = self.tok_start;
                self.advance()?;
                self.identifier(&name, start)
            }
            _ => Err(self.unexpected("number, variable, function or `(`")),
        }
    }

    fn identifier(&mut self, name: &str, start: usize) -> Result<Node, ParseError> {
        let wrap: Option<fn(Box<Node>) -> Node> = match name {
            "conj" => Some(Node::Conj),
            "abs2" => Some(Node::Abs2),
            "exp" => Some(Node::Exp),
            "log" => Some(Node::Log),
            _ => None,
        };
        if let Some(wrap) = wrap {
            self.expect('(')?;
            let inner = self.expr()?;
            self.expect(')')?;
            return Ok(wrap(Box::new(inner)));
        }
        if name == "i" {
            return Ok(Node::Const(Complex64::new(0.0, 1.0)));
        }
        let unknown = || ParseErrorKind::UnknownIdentifier(name.to_string());
        let (prefix, digits) = name.split_at(1);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.error_at(start, unknown()));
        }
        let Ok(k) = digits.parse::<usize>() else {
            return Err(self.error_at(start, unknown()));
        };
        let (index, dim) = match (prefix, self.fiber) {
            ("z", None) => (k, self.dim),
            ("z", Some((n, _))) => (k, n),
            ("w", Some((n, r))) => {
                if k == 0 || k > r {
                    return Err(self.error_at(start, ParseErrorKind::VarOutOfRange { index: k, dim: r }));
                }
                return Ok(Node::Var(n + k - 1));
            }
            _ => return Err(self.error_at(start, unknown())),
        };
        if k == 0 || k > dim {
            return Err(self.error_at(start, ParseErrorKind::VarOutOfRange { index, dim }));
        }
        Ok(Node::Var(k - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(k: usize) -> Box<Node> {
        Box::new(Node::Var(k))
    }

    #[test]
    fn modulus_squared() {
        let e = parse("z1*conj(z1)", 1).unwrap();
        assert_eq!(*e.root(), Node::Mul(v(0), Box::new(Node::Conj(v(0)))));
    }

    #[test]
    fn log_of_sum() {
        assert!(parse("log(1 + abs2(z1))", 1).is_ok());
    }

    #[test]
    fn variable_out_of_range() {
        let err = parse("z3", 2).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::VarOutOfRange { index: 3, dim: 2 });
        assert_eq!((err.line, err.column), (1, 1));
    }

    #[test]
    fn zero_index_rejected() {
        assert!(parse("z0", 2).is_err());
    }

    #[test]
    fn unknown_identifier_position() {
        let err = parse("1 +\n  sin(z1)", 1).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("sin".into()));
        assert_eq!((err.line, err.column), (2, 3));
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(
            parse("(z1", 1).unwrap_err().kind,
            ParseErrorKind::UnexpectedEnd(_)
        ));
        assert!(matches!(
            parse("z1 $ 2", 1).unwrap_err().kind,
            ParseErrorKind::UnexpectedChar('$')
        ));
        assert!(matches!(
            parse("z1 z1", 1).unwrap_err().kind,
            ParseErrorKind::UnexpectedToken { .. }
        ));
        assert!(parse("z1^1.5", 1).is_err());
    }

    #[test]
    fn exponents() {
        let a = parse("z1^-2", 1).unwrap();
        let b = parse("z1^(-2)", 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(*a.root(), Node::Pow(v(0), -2));
        assert_eq!(
            *parse("-z1^2", 1).unwrap().root(),
            Node::Neg(Box::new(Node::Pow(v(0), 2)))
        );
    }

    #[test]
    fn scientific_numbers() {
        let e = parse("1.5e-3 + 2E2", 0).unwrap();
        assert_eq!(
            *e.root(),
            Node::Add(Box::new(Node::real(1.5e-3)), Box::new(Node::real(200.0)))
        );
    }

    #[test]
    fn fiber_variables() {
        let e = parse_with_fiber("z1*w2", 1, 2).unwrap();
        assert_eq!(e.dim(), 3);
        assert_eq!(*e.root(), Node::Mul(v(0), v(2)));
        assert!(parse_with_fiber("z2", 1, 2).is_err());
        assert!(parse_with_fiber("w3", 1, 2).is_err());
        assert!(parse("w1", 2).is_err());
    }
}
