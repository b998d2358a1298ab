//! Symbolic expressions over lattice-indexed variables.
//!
//! An [`Expr`] is an immutable tree. Lattice variables `u[k]`, `x[k]` carry an
//! integer offset relative to the base index `n`; function symbols `f[k](arg)`
//! carry the same offset plus a derivative order (`f'[k]`, `f''[k]`, ...).
//! Continuous variables (`x`, `u`, `u1`, `u2`, ...) are used for jet-space
//! computations on ordinary differential equations.

mod diff;
mod eval;
mod parse;
pub mod poly;
mod print;
pub mod ratfun;
pub mod sample;

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::ExprError;

pub use diff::differentiate;
pub use eval::{evaluate, evaluate_with_magnitude, Binding, Builtin, FunctionEval};
pub use parse::parse;
pub use ratfun::{normalize, RatFun};
pub use sample::{equivalent, sample_residual, SampleBox, SampleConfig, SampleStats};

/// Largest absolute offset [`shift`] will produce.
pub const DEFAULT_OFFSET_BOUND: i32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LatticeVar {
    X,
    U,
}

impl LatticeVar {
    pub fn name(self) -> &'static str {
        match self {
            LatticeVar::X => "x",
            LatticeVar::U => "u",
        }
    }
}

/// A free symbol: something a [`Binding`] assigns a number to.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    /// Named parameter such as `h`, `p`, or an ansatz unknown `c0`.
    Param(String),
    /// Continuous jet variable: `x`, `u`, `u1`, `u2`, ...
    Cont(String),
    Lattice(LatticeVar, i32),
}

impl Symbol {
    pub fn param(name: &str) -> Self {
        Symbol::Param(name.to_string())
    }

    pub fn cont(name: &str) -> Self {
        Symbol::Cont(name.to_string())
    }

    pub fn u(k: i32) -> Self {
        Symbol::Lattice(LatticeVar::U, k)
    }

    pub fn x(k: i32) -> Self {
        Symbol::Lattice(LatticeVar::X, k)
    }

    /// Jet variable of order `k`: `u` for 0, `u1`, `u2`, ... otherwise.
    pub fn jet(k: usize) -> Self {
        if k == 0 {
            Symbol::cont("u")
        } else {
            Symbol::Cont(format!("u{k}"))
        }
    }

    /// Order of a continuous jet variable, if this is one.
    pub fn jet_order(&self) -> Option<usize> {
        match self {
            Symbol::Cont(name) if name == "u" => Some(0),
            Symbol::Cont(name) => name.strip_prefix('u').and_then(|d| d.parse().ok()),
            _ => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Param(name) | Symbol::Cont(name) => f.write_str(name),
            Symbol::Lattice(var, k) => write!(f, "{}[{}]", var.name(), k),
        }
    }
}

/// Reference to a (possibly index-dependent) function symbol.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FuncRef {
    pub name: String,
    /// Lattice offset for `f[k](..)`; `None` for plain `g(..)`.
    pub offset: Option<i32>,
    /// Derivative order: 0 for `f`, 1 for `f'`, ...
    pub order: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Const(BigRational),
    Sym(Symbol),
    Func(FuncRef, Box<Expr>),
    Neg(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn int(v: i64) -> Self {
        Expr::Const(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn rational(num: i64, den: i64) -> Self {
        Expr::Const(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    pub fn sym(s: Symbol) -> Self {
        Expr::Sym(s)
    }

    pub fn param(name: &str) -> Self {
        Expr::Sym(Symbol::param(name))
    }

    pub fn cont(name: &str) -> Self {
        Expr::Sym(Symbol::cont(name))
    }

    pub fn u(k: i32) -> Self {
        Expr::Sym(Symbol::u(k))
    }

    pub fn x(k: i32) -> Self {
        Expr::Sym(Symbol::x(k))
    }

    pub fn h() -> Self {
        Expr::param("h")
    }

    pub fn func(name: &str, offset: Option<i32>, order: u32, arg: Expr) -> Self {
        Expr::Func(
            FuncRef {
                name: name.to_string(),
                offset,
                order,
            },
            Box::new(arg),
        )
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Box::new(self))
    }

    pub fn log(self) -> Self {
        Expr::Log(Box::new(self))
    }

    /// Integer power with trivial exponents folded.
    pub fn pow(self, n: i32) -> Self {
        match n {
            0 => Expr::one(),
            1 => self,
            _ => match self {
                Expr::Const(c) if !(c.is_zero() && n < 0) => Expr::Const(rational_pow(&c, n)),
                base => Expr::Pow(Box::new(base), n),
            },
        }
    }

    pub fn as_const(&self) -> Option<&BigRational> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_one())
    }

    /// Does `s` occur anywhere in the tree (including function arguments)?
    pub fn contains(&self, s: &Symbol) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if let Expr::Sym(t) = e {
                found |= t == s;
            }
        });
        found
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Sym(s) = e {
                out.insert(s.clone());
            }
        });
        out
    }

    /// Names of all function symbols that occur.
    pub fn function_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Func(f, _) = e {
                out.insert(f.name.clone());
            }
        });
        out
    }

    /// The set of lattice offsets this expression depends on, over both
    /// lattice variables and index-dependent function symbols.
    pub fn stencil(&self) -> BTreeSet<i32> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| match e {
            Expr::Sym(Symbol::Lattice(_, k)) => {
                out.insert(*k);
            }
            Expr::Func(f, _) => {
                if let Some(k) = f.offset {
                    out.insert(k);
                }
            }
            _ => {}
        });
        out
    }

    /// Offsets at which `u[k]` itself occurs.
    pub fn u_offsets(&self) -> BTreeSet<i32> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Sym(Symbol::Lattice(LatticeVar::U, k)) = e {
                out.insert(*k);
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Sym(_) => {}
            Expr::Func(_, a) | Expr::Neg(a) | Expr::Exp(a) | Expr::Log(a) | Expr::Pow(a, _) => {
                a.visit(f)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Bottom-up rebuild: children first, then `f` on the rebuilt node.
    pub fn map(&self, f: &mut impl FnMut(Expr) -> Expr) -> Expr {
        let rebuilt = match self {
            Expr::Const(_) | Expr::Sym(_) => self.clone(),
            Expr::Func(r, a) => Expr::Func(r.clone(), Box::new(a.map(f))),
            Expr::Neg(a) => Expr::Neg(Box::new(a.map(f))),
            Expr::Exp(a) => Expr::Exp(Box::new(a.map(f))),
            Expr::Log(a) => Expr::Log(Box::new(a.map(f))),
            Expr::Pow(a, n) => Expr::Pow(Box::new(a.map(f)), *n),
            Expr::Add(a, b) => Expr::Add(Box::new(a.map(f)), Box::new(b.map(f))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.map(f)), Box::new(b.map(f))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.map(f)), Box::new(b.map(f))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.map(f)), Box::new(b.map(f))),
        };
        f(rebuilt)
    }

    /// Replace every occurrence of `s` by `value`.
    pub fn substitute(&self, s: &Symbol, value: &Expr) -> Expr {
        self.map(&mut |e| match e {
            Expr::Sym(ref t) if t == s => value.clone(),
            other => other,
        })
    }

    /// Simultaneous substitution.
    pub fn substitute_all(&self, subs: &[(Symbol, Expr)]) -> Expr {
        self.map(&mut |e| match e {
            Expr::Sym(ref t) => subs
                .iter()
                .find(|(s, _)| s == t)
                .map(|(_, v)| v.clone())
                .unwrap_or(e),
            other => other,
        })
    }
}

/// Translate the base index: every offset `k` becomes `k + j`.
///
/// Fails if any resulting offset exceeds [`DEFAULT_OFFSET_BOUND`].
pub fn shift(e: &Expr, j: i32) -> Result<Expr, ExprError> {
    shift_bounded(e, j, DEFAULT_OFFSET_BOUND)
}

pub fn shift_bounded(e: &Expr, j: i32, bound: i32) -> Result<Expr, ExprError> {
    let mut overflow = None;
    let mut check = |k: i32| {
        let moved = k + j;
        if moved.abs() > bound {
            overflow = Some(moved);
        }
        moved
    };
    let out = e.map(&mut |node| match node {
        Expr::Sym(Symbol::Lattice(var, k)) => Expr::Sym(Symbol::Lattice(var, check(k))),
        Expr::Func(mut r, arg) => {
            r.offset = r.offset.map(&mut check);
            Expr::Func(r, arg)
        }
        other => other,
    });
    match overflow {
        Some(offset) => Err(ExprError::OffsetOverflow { offset, bound }),
        None => Ok(out),
    }
}

pub(crate) fn rational_pow(c: &BigRational, n: i32) -> BigRational {
    let base = if n < 0 { c.recip() } else { c.clone() };
    num_traits::pow(base, n.unsigned_abs() as usize)
}

/// Exact rational from a finite double.
pub fn rational_from_f64(v: f64) -> Option<BigRational> {
    BigRational::from_float(v)
}

/// Rational with the shortest decimal expansion that rounds to `v`, so
/// that `0.2` becomes `1/5` rather than its binary value.
pub fn rational_from_decimal(v: f64) -> Option<BigRational> {
    if !v.is_finite() {
        return None;
    }
    let text = format!("{}", v.abs());
    let (int_part, frac_part) = text.split_once('.').unwrap_or((&text, ""));
    let r = parse::decimal_to_rational(int_part, frac_part);
    Some(if v < 0.0 { -r } else { r })
}

/// Nearest double to an exact rational.
pub fn rational_to_f64(c: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    c.to_f64().unwrap_or_else(|| {
        if c.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

// Builder operators fold the trivial constants so generated trees stay small.

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a + b),
            (a, b) if a.is_zero() => b,
            (a, b) if b.is_zero() => a,
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a - b),
            (a, b) if b.is_zero() => a,
            (a, b) if a.is_zero() => -b,
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a * b),
            (a, b) if a.is_zero() || b.is_zero() => Expr::zero(),
            (a, b) if a.is_one() => b,
            (a, b) if b.is_one() => a,
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Const(a), Expr::Const(b)) if !b.is_zero() => Expr::Const(a / b),
            (a, b) if b.is_one() => a,
            (a, b) if a.is_zero() && !b.is_zero() => Expr::zero(),
            (a, b) => Expr::Div(Box::new(a), Box::new(b)),
        }
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Self {
        Expr::int(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_of_second_difference() {
        let e = parse("(u[1]-2*u[0]+u[-1])/h^2").unwrap();
        assert_eq!(e.stencil().into_iter().collect::<Vec<_>>(), vec![-1, 0, 1]);
    }

    #[test]
    fn shift_moves_lattice_and_function_offsets() {
        let e = parse("u[0]^2").unwrap();
        assert_eq!(shift(&e, 1).unwrap(), parse("u[1]^2").unwrap());
        let chi = parse("1+h*u[0]").unwrap();
        assert_eq!(shift(&chi, -1).unwrap(), parse("1+h*u[-1]").unwrap());
        let f = parse("f'[0](u[0])").unwrap();
        assert_eq!(shift(&f, 2).unwrap(), parse("f'[2](u[2])").unwrap());
    }

    #[test]
    fn shift_round_trip_is_identity() {
        let e = parse("u[-1]*(1+(h/2)*u[-1])*(u[0]-u[-1])/h").unwrap();
        let back = shift(&shift(&e, 2).unwrap(), -2).unwrap();
        assert_eq!(normalize(&back).unwrap(), normalize(&e).unwrap());
    }

    #[test]
    fn shift_reports_offset_overflow() {
        let e = Expr::u(60);
        assert!(matches!(
            shift(&e, 10),
            Err(ExprError::OffsetOverflow { offset: 70, .. })
        ));
    }

    #[test]
    fn constants_and_parameters_do_not_shift() {
        let e = parse("h + 3 + x").unwrap();
        assert_eq!(shift(&e, 5).unwrap(), e);
    }

    #[test]
    fn jet_symbols() {
        assert_eq!(Symbol::jet(0), Symbol::cont("u"));
        assert_eq!(Symbol::jet(3).jet_order(), Some(3));
        assert_eq!(Symbol::cont("x").jet_order(), None);
    }
}
