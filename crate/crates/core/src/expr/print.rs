use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::Expr;

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POWER: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => PREC_SUM,
        Expr::Mul(..) | Expr::Div(..) => PREC_PRODUCT,
        Expr::Neg(_) => PREC_UNARY,
        Expr::Pow(..) => PREC_POWER,
        Expr::Const(c) if c.is_negative() => PREC_UNARY,
        Expr::Const(c) if decimal_digits(c).is_none() => PREC_PRODUCT,
        _ => PREC_ATOM,
    }
}

/// Exact decimal rendering when the denominator is of the form 2^a 5^b.
fn decimal_digits(c: &BigRational) -> Option<String> {
    let c = c.abs();
    if c.is_integer() {
        return Some(c.to_integer().to_string());
    }
    let mut den = c.denom().clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let mut places = 0usize;
    let (mut twos, mut fives) = (0usize, 0usize);
    while den.is_even() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if den != BigInt::from(1) {
        return None;
    }
    places = places.max(twos).max(fives);
    let scaled = c.numer() * num_traits::pow(BigInt::from(10), places) / c.denom();
    let digits = scaled.to_string();
    let digits = format!("{digits:0>width$}", width = places + 1);
    let (int_part, frac_part) = digits.split_at(digits.len() - places);
    Some(format!("{int_part}.{frac_part}"))
}

fn write_const(c: &BigRational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let sign = if c.is_negative() { "-" } else { "" };
    match decimal_digits(c) {
        Some(d) => write!(f, "{sign}{d}"),
        None => write!(f, "{sign}{}/{}", c.numer().abs(), c.denom()),
    }
}

fn write_child(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_const(c, f),
            Expr::Sym(s) => write!(f, "{s}"),
            Expr::Func(r, arg) => {
                f.write_str(&r.name)?;
                for _ in 0..r.order {
                    f.write_str("'")?;
                }
                if let Some(k) = r.offset {
                    write!(f, "[{k}]")?;
                }
                write!(f, "({arg})")
            }
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(a, PREC_UNARY, f)
            }
            Expr::Add(a, b) => {
                write_child(a, PREC_SUM, f)?;
                f.write_str(" + ")?;
                write_child(b, PREC_PRODUCT, f)
            }
            Expr::Sub(a, b) => {
                write_child(a, PREC_SUM, f)?;
                f.write_str(" - ")?;
                write_child(b, PREC_PRODUCT, f)
            }
            Expr::Mul(a, b) => {
                write_child(a, PREC_PRODUCT, f)?;
                f.write_str("*")?;
                write_child(b, PREC_UNARY, f)
            }
            Expr::Div(a, b) => {
                write_child(a, PREC_PRODUCT, f)?;
                f.write_str("/")?;
                write_child(b, PREC_UNARY, f)
            }
            Expr::Pow(a, n) => {
                write_child(a, PREC_ATOM, f)?;
                write!(f, "^{n}")
            }
        }
    }
}
