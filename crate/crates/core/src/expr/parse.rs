//! Recursive-descent parser for the expression DSL.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := unary (('*'|'/') unary)*
//! unary  := ('-'|'+') unary | power
//! power  := base ('^' '-'? int)?
//! base   := number | ident | ident '[' int ']' | ident '\''* '[' int ']' '(' expr ')'
//!         | ident '\''* '(' expr ')' | 'exp(' expr ')' | 'log(' expr ')' | '(' expr ')'
//! ```
//!
//! `u` and `x` are lattice variables when indexed and continuous variables
//! otherwise; `u1`, `u2`, ... are jet variables; `h` is the lattice spacing
//! parameter. Any other bare identifier is a parameter.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{Expr, LatticeVar, Symbol};
use crate::error::ExprError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Prime,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, column);
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        let single = match c {
            '\'' => Some(Tok::Prime),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token {
                tok,
                line: tl,
                column: tc,
            });
            i += 1;
            column += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let int_part: String = chars[start..i].iter().collect();
            let mut frac_part = String::new();
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                let fs = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                frac_part = chars[fs..i].iter().collect();
            }
            column += i - start;
            out.push(Token {
                tok: Tok::Num(decimal_to_rational(&int_part, &frac_part)),
                line: tl,
                column: tc,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            column += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                column: tc,
            });
            continue;
        }
        return Err(ExprError::Syntax {
            line: tl,
            column: tc,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

pub(crate) fn decimal_to_rational(int_part: &str, frac_part: &str) -> BigRational {
    let digits = format!("{int_part}{frac_part}");
    let digits = if digits.is_empty() {
        "0".to_string()
    } else {
        digits
    };
    let num: BigInt = digits.parse().expect("digit string");
    let den = num_traits::pow(BigInt::from(10), frac_part.len());
    BigRational::new(num, den)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, message: impl Into<String>) -> ExprError {
        let t = &self.tokens[self.pos];
        ExprError::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn category(&self, at: &Token, message: impl Into<String>) -> ExprError {
        ExprError::SymbolCategory {
            line: at.line,
            column: at.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.syntax(format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.next();
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.next();
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.next();
                    let rhs = self.unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.next();
                    let rhs = self.unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Tok::Minus => {
                self.next();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Plus => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.base()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.next();
        let exponent = self.signed_int("integer exponent")?;
        let exponent = i32::try_from(exponent).map_err(|_| self.syntax("exponent out of range"))?;
        Ok(Expr::Pow(Box::new(base), exponent))
    }

    fn signed_int(&mut self, what: &str) -> Result<i64, ExprError> {
        let parenthesized = *self.peek() == Tok::LParen;
        if parenthesized {
            self.next();
        }
        let negative = match self.peek() {
            Tok::Minus => {
                self.next();
                true
            }
            Tok::Plus => {
                self.next();
                false
            }
            _ => false,
        };
        let value = match self.peek().clone() {
            Tok::Num(n) if n.is_integer() => {
                self.next();
                let v: i64 = n
                    .to_integer()
                    .try_into()
                    .map_err(|_| self.syntax("integer out of range"))?;
                v
            }
            _ => return Err(self.syntax(format!("expected {what}"))),
        };
        if parenthesized {
            self.expect(Tok::RParen, "`)`")?;
        }
        Ok(if negative { -value } else { value })
    }

    fn offset(&mut self) -> Result<i32, ExprError> {
        self.expect(Tok::LBracket, "`[`")?;
        let k = self.signed_int("integer offset")?;
        self.expect(Tok::RBracket, "`]`")?;
        i32::try_from(k).map_err(|_| self.syntax("offset out of range"))
    }

    fn parenthesized(&mut self) -> Result<Expr, ExprError> {
        self.expect(Tok::LParen, "`(`")?;
        let e = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(e)
    }

    fn base(&mut self) -> Result<Expr, ExprError> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.next();
                Ok(Expr::Const(n))
            }
            Tok::LParen => self.parenthesized(),
            Tok::Ident(name) => {
                let at = self.next();
                self.identifier(name, at)
            }
            Tok::Eof => Err(self.syntax("unexpected end of input")),
            other => Err(self.syntax(format!("unexpected token {other:?}"))),
        }
    }

    fn identifier(&mut self, name: String, at: Token) -> Result<Expr, ExprError> {
        let mut primes = 0u32;
        while *self.peek() == Tok::Prime {
            self.next();
            primes += 1;
        }
        let lattice = match name.as_str() {
            "u" => Some(LatticeVar::U),
            "x" => Some(LatticeVar::X),
            _ => None,
        };
        let is_jet = name.len() > 1
            && name.starts_with('u')
            && name[1..].chars().all(|c| c.is_ascii_digit());
        let reserved = lattice.is_some() || is_jet || name == "h" || name == "exp" || name == "log";
        if primes > 0 && reserved {
            return Err(self.category(&at, format!("`{name}` cannot carry a derivative mark")));
        }

        if name == "exp" || name == "log" {
            if *self.peek() != Tok::LParen {
                return Err(self.category(&at, format!("`{name}` must be applied: {name}(...)")));
            }
            let arg = self.parenthesized()?;
            return Ok(if name == "exp" {
                Expr::Exp(Box::new(arg))
            } else {
                Expr::Log(Box::new(arg))
            });
        }

        if let Some(var) = lattice {
            if *self.peek() == Tok::LBracket {
                let k = self.offset()?;
                if *self.peek() == Tok::LParen {
                    return Err(self.category(
                        &at,
                        format!("lattice variable `{name}[{k}]` cannot be applied as a function"),
                    ));
                }
                return Ok(Expr::Sym(Symbol::Lattice(var, k)));
            }
            if *self.peek() == Tok::LParen {
                return Err(self.category(&at, format!("`{name}` is a variable, not a function")));
            }
            return Ok(Expr::Sym(Symbol::Cont(name)));
        }

        if is_jet || name == "h" {
            if matches!(self.peek(), Tok::LBracket | Tok::LParen) {
                return Err(self.category(&at, format!("`{name}` cannot be indexed or applied")));
            }
            return Ok(if is_jet {
                Expr::Sym(Symbol::Cont(name))
            } else {
                Expr::Sym(Symbol::Param(name))
            });
        }

        match self.peek() {
            Tok::LBracket => {
                let k = self.offset()?;
                if *self.peek() != Tok::LParen {
                    return Err(self.category(
                        &at,
                        format!("indexed symbol `{name}[{k}]` must be a function applied to an argument"),
                    ));
                }
                let arg = self.parenthesized()?;
                Ok(Expr::func(&name, Some(k), primes, arg))
            }
            Tok::LParen => {
                let arg = self.parenthesized()?;
                Ok(Expr::func(&name, None, primes, arg))
            }
            _ if primes > 0 => {
                Err(self.category(&at, format!("`{name}'` must be applied to an argument")))
            }
            _ => Ok(Expr::Sym(Symbol::Param(name))),
        }
    }
}

/// Parse DSL text into an expression tree.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_second_difference() {
        let e = parse("(u[1]-2*u[0]+u[-1])/h^2").unwrap();
        match e {
            Expr::Div(num, den) => {
                assert_eq!(*den, Expr::Pow(Box::new(Expr::h()), 2));
                assert_eq!(num.u_offsets().len(), 3);
            }
            other => panic!("unexpected tree {other:?}"),
        }
    }

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse("0.25").unwrap(), Expr::rational(1, 4));
        assert_eq!(parse("1.5").unwrap(), Expr::rational(3, 2));
    }

    #[test]
    fn parses_function_symbols_and_derivatives() {
        assert_eq!(
            parse("f'[0](u[0])").unwrap(),
            Expr::func("f", Some(0), 1, Expr::u(0))
        );
        assert_eq!(
            parse("g(x)").unwrap(),
            Expr::func("g", None, 0, Expr::cont("x"))
        );
        assert_eq!(
            parse("g''(x)").unwrap(),
            Expr::func("g", None, 2, Expr::cont("x"))
        );
    }

    #[test]
    fn parses_negative_exponent() {
        assert_eq!(parse("h^-1").unwrap(), Expr::Pow(Box::new(Expr::h()), -1));
    }

    #[test]
    fn categories() {
        assert_eq!(parse("u").unwrap(), Expr::cont("u"));
        assert_eq!(parse("u2").unwrap(), Expr::cont("u2"));
        assert_eq!(parse("p").unwrap(), Expr::param("p"));
        assert_eq!(parse("x[-2]").unwrap(), Expr::x(-2));
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse("u[0] +\n  * 2") {
            Err(ExprError::Syntax { line, column, .. }) => {
                assert_eq!((line, column), (2, 3));
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(matches!(parse("(u[0]"), Err(ExprError::Syntax { .. })));
        assert!(matches!(
            parse("u[0] $"),
            Err(ExprError::Syntax { column: 6, .. })
        ));
    }

    #[test]
    fn symbol_category_errors() {
        for bad in ["u[0](x)", "h[1]", "f[0]", "u1[2]", "exp", "u'[0]"] {
            assert!(
                matches!(parse(bad), Err(ExprError::SymbolCategory { .. })),
                "{bad} should be rejected"
            );
        }
    }
}
