use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::{rational_to_f64, Expr, Symbol};
use crate::error::ExprError;

/// Numeric evaluator for a function symbol and its derivatives.
pub trait FunctionEval: Send + Sync {
    /// Value of the `order`-th derivative of the function at lattice offset
    /// `offset` (relative to the current base index), at argument `x`.
    fn eval(&self, offset: Option<i32>, order: u32, x: f64) -> f64;
}

impl<F> FunctionEval for F
where
    F: Fn(Option<i32>, u32, f64) -> f64 + Send + Sync,
{
    fn eval(&self, offset: Option<i32>, order: u32, x: f64) -> f64 {
        self(offset, order, x)
    }
}

/// Index-independent built-in functions usable from scheme files.
#[derive(Clone, Debug, PartialEq)]
pub enum Builtin {
    Exp,
    Sin,
    /// Coefficients in increasing degree: `c0 + c1 x + c2 x^2 + ...`.
    Poly(Vec<f64>),
}

impl Builtin {
    pub fn value(&self, order: u32, x: f64) -> f64 {
        match self {
            Builtin::Exp => x.exp(),
            Builtin::Sin => match order % 4 {
                0 => x.sin(),
                1 => x.cos(),
                2 => -x.sin(),
                _ => -x.cos(),
            },
            Builtin::Poly(coeffs) => coeffs
                .iter()
                .enumerate()
                .skip(order as usize)
                .map(|(i, c)| {
                    let i = i as u32;
                    let falling: f64 = (0..order).map(|j| (i - j) as f64).product();
                    c * falling * x.powi((i - order) as i32)
                })
                .sum(),
        }
    }
}

impl FunctionEval for Builtin {
    fn eval(&self, _offset: Option<i32>, order: u32, x: f64) -> f64 {
        self.value(order, x)
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::Exp => f.write_str("builtin(exp)"),
            Builtin::Sin => f.write_str("builtin(sin)"),
            Builtin::Poly(c) => {
                f.write_str("builtin(poly")?;
                for v in c {
                    write!(f, " {v}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Numeric values for free symbols plus evaluators for function symbols.
#[derive(Clone, Default)]
pub struct Binding {
    values: HashMap<Symbol, f64>,
    functions: HashMap<String, Arc<dyn FunctionEval>>,
}

impl fmt::Debug for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<_> = self.functions.keys().collect();
        names.sort();
        f.debug_struct("Binding")
            .field("values", &self.values)
            .field("functions", &names)
            .finish()
    }
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, s: Symbol, v: f64) -> Self {
        self.values.insert(s, v);
        self
    }

    pub fn set(&mut self, s: Symbol, v: f64) {
        self.values.insert(s, v);
    }

    pub fn get(&self, s: &Symbol) -> Option<f64> {
        self.values.get(s).copied()
    }

    pub fn set_function(&mut self, name: &str, f: Arc<dyn FunctionEval>) {
        self.functions.insert(name.to_string(), f);
    }

    pub fn with_function(mut self, name: &str, f: Arc<dyn FunctionEval>) -> Self {
        self.set_function(name, f);
        self
    }

    pub fn function(&self, name: &str) -> Option<&Arc<dyn FunctionEval>> {
        self.functions.get(name)
    }

    /// Copy of the function evaluators and all non-lattice values.
    pub fn parameters_only(&self) -> Binding {
        Binding {
            values: self
                .values
                .iter()
                .filter(|(s, _)| !matches!(s, Symbol::Lattice(..)))
                .map(|(s, v)| (s.clone(), *v))
                .collect(),
            functions: self.functions.clone(),
        }
    }
}

fn domain(e: &Expr, reason: &str) -> ExprError {
    ExprError::Domain {
        expr: e.to_string(),
        reason: reason.to_string(),
    }
}

fn finite(e: &Expr, v: f64) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(e, "non-finite value"))
    }
}

/// Evaluate under a complete binding.
pub fn evaluate(e: &Expr, b: &Binding) -> Result<f64, ExprError> {
    evaluate_with_magnitude(e, b).map(|(v, _)| v)
}

/// Value together with a rounding scale: the value obtained when every sum
/// is replaced by the sum of absolute values. The floating-point error of
/// the value is bounded by a small multiple of `eps * magnitude`.
pub fn evaluate_with_magnitude(e: &Expr, b: &Binding) -> Result<(f64, f64), ExprError> {
    let out = match e {
        Expr::Const(c) => {
            let v = rational_to_f64(c);
            (v, v.abs())
        }
        Expr::Sym(s) => {
            let v = b.get(s).ok_or_else(|| ExprError::Unbound(s.to_string()))?;
            (v, v.abs())
        }
        Expr::Func(r, arg) => {
            let (x, _) = evaluate_with_magnitude(arg, b)?;
            let f = b
                .function(&r.name)
                .ok_or_else(|| ExprError::Unbound(format!("function {}", r.name)))?;
            let v = finite(e, f.eval(r.offset, r.order, x))?;
            (v, v.abs())
        }
        Expr::Neg(a) => {
            let (v, m) = evaluate_with_magnitude(a, b)?;
            (-v, m)
        }
        Expr::Exp(a) => {
            let (x, _) = evaluate_with_magnitude(a, b)?;
            let v = finite(e, x.exp())?;
            (v, v)
        }
        Expr::Log(a) => {
            let (x, _) = evaluate_with_magnitude(a, b)?;
            if x <= 0.0 {
                return Err(domain(e, "logarithm of a non-positive value"));
            }
            let v = x.ln();
            (v, v.abs())
        }
        Expr::Add(l, r) => {
            let (a, ma) = evaluate_with_magnitude(l, b)?;
            let (c, mc) = evaluate_with_magnitude(r, b)?;
            (a + c, ma + mc)
        }
        Expr::Sub(l, r) => {
            let (a, ma) = evaluate_with_magnitude(l, b)?;
            let (c, mc) = evaluate_with_magnitude(r, b)?;
            (a - c, ma + mc)
        }
        Expr::Mul(l, r) => {
            let (a, ma) = evaluate_with_magnitude(l, b)?;
            let (c, mc) = evaluate_with_magnitude(r, b)?;
            (a * c, ma * mc)
        }
        Expr::Div(l, r) => {
            let (a, ma) = evaluate_with_magnitude(l, b)?;
            let (c, _) = evaluate_with_magnitude(r, b)?;
            if c == 0.0 {
                return Err(domain(e, "division by zero"));
            }
            (a / c, ma / c.abs())
        }
        Expr::Pow(a, n) => {
            let (x, m) = evaluate_with_magnitude(a, b)?;
            if *n < 0 && x == 0.0 {
                return Err(domain(e, "negative power of zero"));
            }
            let v = x.powi(*n);
            let mag = if *n >= 0 { m.powi(*n) } else { v.abs() };
            (v, mag)
        }
    };
    Ok((finite(e, out.0)?, out.1))
}
