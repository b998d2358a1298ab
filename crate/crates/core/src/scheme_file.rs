//! Line-oriented scheme files.
//!
//! ```text
//! # comment
//! name = ex2
//! stencil = -1..1
//! lattice = uniform h            # or: uniform 0.1 | points 0 0.1 0.25 ...
//! equation = (u[1]-2*u[0]+u[-1])/h^2 = u[-1]^2
//! solved = 2*u[0] - u[-1] + h^2*u[-1]^2      # optional
//! functions = f: builtin(exp); g: builtin(poly 1 0 2)   # optional
//! ```

use std::collections::BTreeMap;

use crate::error::{Error, ExprError, Result};
use crate::expr::{parse, Builtin, Expr};
use crate::scheme::{Lattice, Scheme};

fn file_error(line: usize, message: impl Into<String>) -> Error {
    Error::SchemeFile {
        line,
        message: message.into(),
    }
}

/// Parse an expression embedded at `column` (1-based) of `line`, rebasing
/// error positions onto the file.
fn parse_at(text: &str, line: usize, column: usize) -> Result<Expr> {
    parse(text).map_err(|e| match e {
        ExprError::Syntax {
            column: c, message, ..
        }
        | ExprError::SymbolCategory {
            column: c, message, ..
        } => file_error(line, format!("column {}: {message}", column + c - 1)),
        other => file_error(line, other.to_string()),
    })
}

fn parse_builtin(text: &str, line: usize) -> Result<Builtin> {
    let inner = text
        .trim()
        .strip_prefix("builtin(")
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| {
            file_error(
                line,
                format!("expected builtin(...), found `{}`", text.trim()),
            )
        })?;
    let mut words = inner.split_whitespace();
    match words.next() {
        Some("exp") => Ok(Builtin::Exp),
        Some("sin") => Ok(Builtin::Sin),
        Some("poly") => {
            let coeffs = words
                .map(|w| {
                    w.parse::<f64>()
                        .map_err(|_| file_error(line, format!("bad coefficient `{w}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if coeffs.is_empty() {
                return Err(file_error(line, "poly needs at least one coefficient"));
            }
            Ok(Builtin::Poly(coeffs))
        }
        other => Err(file_error(
            line,
            format!("unknown builtin `{}`", other.unwrap_or("")),
        )),
    }
}

fn parse_lattice(text: &str, line: usize) -> Result<Lattice> {
    let mut words = text.split_whitespace();
    match words.next() {
        Some("uniform") => match words.next() {
            None | Some("h") => Ok(Lattice::uniform()),
            Some(v) => {
                let h: f64 = v
                    .parse()
                    .map_err(|_| file_error(line, format!("bad spacing `{v}`")))?;
                Lattice::uniform_numeric(h).map_err(|e| file_error(line, e.to_string()))
            }
        },
        Some("points") => {
            let pts = words
                .map(|w| {
                    w.parse::<f64>()
                        .map_err(|_| file_error(line, format!("bad lattice point `{w}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if pts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(file_error(line, "lattice points must increase"));
            }
            Ok(Lattice::Points(pts))
        }
        _ => Err(file_error(line, format!("unknown lattice `{text}`"))),
    }
}

fn parse_stencil(text: &str, line: usize) -> Result<(u32, u32)> {
    let bad = || file_error(line, format!("expected `-a..b`, found `{text}`"));
    let (lo, hi) = text.split_once("..").ok_or_else(bad)?;
    let lo: i32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: i32 = hi.trim().parse().map_err(|_| bad())?;
    if lo > 0 || hi < 0 {
        return Err(bad());
    }
    Ok(((-lo) as u32, hi as u32))
}

/// Parse a scheme file and install its solved form (given or derived).
pub fn parse_scheme(text: &str) -> Result<Scheme> {
    let mut fields: BTreeMap<&str, (usize, usize, &str)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| file_error(line, "expected `key = value`"))?;
        let key = key.trim();
        if !matches!(
            key,
            "name" | "stencil" | "lattice" | "equation" | "solved" | "functions"
        ) {
            return Err(file_error(line, format!("unknown field `{key}`")));
        }
        let lead = value.len() - value.trim_start().len();
        let column = content.find('=').unwrap_or(0) + 2 + lead;
        if fields.insert(key, (line, column, value.trim())).is_some() {
            return Err(file_error(line, format!("duplicate field `{key}`")));
        }
    }
    let (eq_line, eq_col, eq_text) = *fields
        .get("equation")
        .ok_or_else(|| file_error(0, "missing `equation`"))?;
    let equation = match eq_text.rsplit_once('=') {
        Some((lhs, rhs)) => {
            let l = parse_at(lhs, eq_line, eq_col)?;
            let r = parse_at(rhs, eq_line, eq_col + lhs.len() + 1)?;
            if r.is_zero() {
                l
            } else {
                l - r
            }
        }
        None => parse_at(eq_text, eq_line, eq_col)?,
    };
    let lattice = match fields.get("lattice") {
        Some(&(l, _, t)) => parse_lattice(t, l)?,
        None => Lattice::uniform(),
    };
    let equation = match &lattice {
        Lattice::Uniform { spacing } if spacing.as_const().is_some() => lattice.localize(&equation),
        _ => equation,
    };
    let name = fields.get("name").map(|f| f.2).unwrap_or("scheme");
    let mut scheme = match fields.get("stencil") {
        Some(&(l, _, t)) => {
            let (a, b) = parse_stencil(t, l)?;
            Scheme::with_stencil(name, a, b, equation, lattice)
                .map_err(|e| file_error(l, e.to_string()))?
        }
        None => {
            Scheme::new(name, equation, lattice).map_err(|e| file_error(eq_line, e.to_string()))?
        }
    };
    if let Some(&(l, _, t)) = fields.get("functions") {
        for item in t.split(';').filter(|s| !s.trim().is_empty()) {
            let (fname, spec) = item.split_once(':').ok_or_else(|| {
                file_error(
                    l,
                    format!("expected `name: builtin(...)`, found `{}`", item.trim()),
                )
            })?;
            scheme
                .functions
                .insert(fname.trim().to_string(), parse_builtin(spec, l)?);
        }
    }
    for f in scheme.equation.function_names() {
        if !scheme.functions.contains_key(&f) {
            return Err(file_error(
                eq_line,
                format!("function `{f}` has no evaluator in `functions`"),
            ));
        }
    }
    match fields.get("solved") {
        Some(&(l, c, t)) => {
            let g = scheme.lattice.localize(&parse_at(t, l, c)?);
            scheme
                .set_solved(g)
                .map_err(|e| file_error(l, e.to_string()))?;
        }
        None => {
            scheme
                .solve_for_leading()
                .map_err(|e| file_error(eq_line, e.to_string()))?;
        }
    }
    Ok(scheme)
}
