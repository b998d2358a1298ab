//! Difference schemes on a fixed lattice and their numeric trajectories.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{
    differentiate, evaluate, normalize, rational_from_decimal, Binding, Builtin, Expr, Symbol,
};

/// Values beyond this magnitude mark a trajectory as divergent.
pub const DIVERGENCE_BOUND: f64 = 1e100;

#[derive(Clone, Debug, PartialEq)]
pub enum Lattice {
    /// `x[n+1] - x[n] = spacing`; the spacing is the parameter `h` or a
    /// positive constant.
    Uniform { spacing: Expr },
    /// Explicit lattice points, `x_n = points[n]`.
    Points(Vec<f64>),
}

impl Lattice {
    pub fn uniform() -> Self {
        Lattice::Uniform { spacing: Expr::h() }
    }

    pub fn uniform_numeric(h: f64) -> Result<Self> {
        let c = crate::expr::rational_from_f64(h)
            .filter(|_| h > 0.0)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("lattice spacing must be positive, got {h}"))
            })?;
        Ok(Lattice::Uniform {
            spacing: Expr::Const(c),
        })
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Lattice::Uniform { .. })
    }

    /// Spacing between `x[k]` and `x[k+1]` as an expression.
    pub fn step(&self, k: i32) -> Expr {
        match self {
            Lattice::Uniform { spacing } => spacing.clone(),
            Lattice::Points(_) => Expr::x(k + 1) - Expr::x(k),
        }
    }

    /// On a uniform lattice, rewrite `x[k]` as `x[0] + k*spacing` and a
    /// numeric spacing in place of `h`. Identity on explicit points.
    pub fn localize(&self, e: &Expr) -> Expr {
        let Lattice::Uniform { spacing } = self else {
            return e.clone();
        };
        let spacing = spacing.clone();
        let numeric = spacing.as_const().is_some();
        e.map(&mut |node| match node {
            Expr::Sym(Symbol::Lattice(crate::expr::LatticeVar::X, k)) if k != 0 => {
                Expr::x(0) + Expr::int(k as i64) * spacing.clone()
            }
            Expr::Sym(Symbol::Param(ref p)) if numeric && p == "h" => spacing.clone(),
            other => other,
        })
    }

    /// Numeric value of `x_n`. On a uniform lattice `x_0 = 0`.
    pub fn point(&self, n: usize, b: &Binding) -> Result<f64> {
        match self {
            Lattice::Uniform { spacing } => Ok(n as f64 * evaluate(spacing, b)?),
            Lattice::Points(p) => p.get(n).copied().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "lattice has {} points, index {n} requested",
                    p.len()
                ))
            }),
        }
    }
}

/// A single scalar difference equation `E = 0` with stencil `[-a, b]`.
#[derive(Clone, Debug)]
pub struct Scheme {
    pub name: String,
    pub a: u32,
    pub b: u32,
    pub equation: Expr,
    pub lattice: Lattice,
    solved: Option<Expr>,
    /// Evaluators for function symbols, keyed by name.
    pub functions: BTreeMap<String, Builtin>,
}

impl Scheme {
    /// Build a scheme whose stencil is read off the equation. The stencil
    /// must contain 0.
    pub fn new(name: &str, equation: Expr, lattice: Lattice) -> Result<Self> {
        let st = equation.stencil();
        let (lo, hi) = match (st.first(), st.last()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => {
                return Err(Error::InvalidScheme(
                    "equation has no lattice variables".into(),
                ))
            }
        };
        if lo > 0 || hi < 0 {
            return Err(Error::InvalidScheme(format!(
                "stencil {lo}..{hi} does not contain the base point"
            )));
        }
        Scheme::with_stencil(name, (-lo) as u32, hi as u32, equation, lattice)
    }

    pub fn with_stencil(
        name: &str,
        a: u32,
        b: u32,
        equation: Expr,
        lattice: Lattice,
    ) -> Result<Self> {
        let st = equation.stencil();
        let (lo, hi) = (-(a as i32), b as i32);
        if let Some(k) = st.iter().find(|k| **k < lo || **k > hi) {
            return Err(Error::InvalidScheme(format!(
                "offset {k} outside the stencil {lo}..{hi}"
            )));
        }
        if !st.contains(&lo) || !st.contains(&hi) {
            return Err(Error::InvalidScheme(format!(
                "equation does not reach both ends of the stencil {lo}..{hi}"
            )));
        }
        if !equation.u_offsets().contains(&hi) {
            return Err(Error::InvalidScheme(format!(
                "equation does not involve u[{hi}]"
            )));
        }
        Ok(Scheme {
            name: name.to_string(),
            a,
            b,
            equation,
            lattice,
            solved: None,
            functions: BTreeMap::new(),
        })
    }

    pub fn with_function(mut self, name: &str, f: Builtin) -> Self {
        self.functions.insert(name.to_string(), f);
        self
    }

    pub fn leading(&self) -> Symbol {
        Symbol::u(self.b as i32)
    }

    pub fn solved(&self) -> Option<&Expr> {
        self.solved.as_ref()
    }

    /// Install a user-supplied solved form after checking that it annihilates
    /// the equation.
    pub fn set_solved(&mut self, g: Expr) -> Result<()> {
        if g.contains(&self.leading()) {
            return Err(Error::InvalidScheme(format!(
                "solved form contains {}",
                self.leading()
            )));
        }
        let rest = normalize(&self.equation.substitute(&self.leading(), &g))?;
        if !rest.is_zero() && !self.annihilated_numerically(&g)? {
            return Err(Error::InvalidScheme(
                "solved form does not satisfy the equation".into(),
            ));
        }
        self.solved = Some(g);
        Ok(())
    }

    fn annihilated_numerically(&self, g: &Expr) -> Result<bool> {
        use crate::expr::{sample_residual, SampleBox, SampleConfig};
        let residual = self
            .lattice
            .localize(&self.equation.substitute(&self.leading(), g));
        let mut domain = SampleBox::new(self.binding(0.1));
        for s in residual.free_symbols() {
            if matches!(s, Symbol::Lattice(..)) {
                domain.set_range(s, 0.0, 1.0);
            }
        }
        let stats = sample_residual(&residual, &domain, &SampleConfig::default())?;
        Ok(stats.max_scaled <= 1e-10)
    }

    /// Solve `E = 0` for the leading value `u[b]`, which must enter affinely.
    pub fn solve_for_leading(&mut self) -> Result<Expr> {
        if let Some(g) = &self.solved {
            return Ok(g.clone());
        }
        let lead = self.leading();
        let coeff = differentiate(&self.equation, &lead);
        if !normalize(&differentiate(&coeff, &lead))?.is_zero() {
            return Err(Error::UnsupportedScheme(format!(
                "equation is not affine in {lead}; supply the solved form explicitly"
            )));
        }
        if normalize(&coeff)?.is_zero() {
            return Err(Error::UnsupportedScheme(format!(
                "coefficient of {lead} vanishes"
            )));
        }
        let rest = self.equation.substitute(&lead, &Expr::zero());
        let g = normalize(&(-rest / coeff))?;
        if g.contains(&lead) {
            return Err(Error::UnsupportedScheme(format!(
                "coefficient of {lead} depends on {lead}"
            )));
        }
        self.solved = Some(g.clone());
        Ok(g)
    }

    /// Replace function symbols backed by polynomial builtins with their
    /// explicit expansions, so the scheme becomes rational in `u`.
    pub fn inline_polynomials(&self) -> Result<Scheme> {
        let mut polys = BTreeMap::new();
        for (name, f) in &self.functions {
            if let Builtin::Poly(c) = f {
                let exact = c
                    .iter()
                    .map(|v| rational_from_decimal(*v).map(Expr::Const))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| {
                        Error::InvalidScheme(format!("non-finite coefficient in `{name}`"))
                    })?;
                polys.insert(name.clone(), exact);
            }
        }
        if polys.is_empty() {
            return Ok(self.clone());
        }
        let expand = |e: &Expr| {
            e.map(&mut |node| match node {
                Expr::Func(r, arg) if polys.contains_key(&r.name) => {
                    let mut out = Expr::zero();
                    for (i, c) in polys[&r.name].iter().enumerate().skip(r.order as usize) {
                        let falling: i64 = (0..r.order as i64).map(|j| i as i64 - j).product();
                        out = out
                            + Expr::int(falling)
                                * c.clone()
                                * arg.as_ref().clone().pow(i as i32 - r.order as i32);
                    }
                    out
                }
                other => other,
            })
        };
        let mut s = self.clone();
        s.equation = expand(&self.equation);
        s.solved = self.solved.as_ref().map(expand);
        s.functions.retain(|name, _| !polys.contains_key(name));
        Ok(s)
    }

    /// Binding with `h` and the scheme's function evaluators.
    pub fn binding(&self, h: f64) -> Binding {
        let mut b = Binding::new().with(Symbol::param("h"), h);
        for (name, f) in &self.functions {
            b.set_function(name, Arc::new(f.clone()));
        }
        b
    }

    fn bind_window(&self, b: &mut Binding, values: &[f64], n: usize, xs: &[f64]) {
        let a = self.a as i32;
        for k in -a..=self.b as i32 {
            let idx = n as i64 + k as i64;
            if idx >= 0 && (idx as usize) < values.len() {
                b.set(Symbol::u(k), values[idx as usize]);
            }
            if idx >= 0 && (idx as usize) < xs.len() {
                b.set(Symbol::x(k), xs[idx as usize]);
            }
        }
    }

    /// Iterate the solved form from `a + b` initial values for `steps` new
    /// values. Overflow, NaN or a domain error truncates the trajectory and
    /// flags it divergent.
    pub fn iterate_trajectory(
        &self,
        init: &[f64],
        steps: usize,
        bind: &Binding,
    ) -> Result<Trajectory> {
        let g = self.solved.as_ref().ok_or_else(|| {
            Error::UnsupportedScheme("no solved form; call solve_for_leading".into())
        })?;
        let width = (self.a + self.b) as usize;
        if init.len() != width {
            return Err(Error::InvalidArgument(format!(
                "{} initial values given, the stencil needs {width}",
                init.len()
            )));
        }
        let total = width + steps;
        let xs = (0..total)
            .map(|n| self.lattice.point(n, bind))
            .collect::<Result<Vec<_>>>()?;
        let mut values = init.to_vec();
        let mut b = bind.clone();
        let mut divergent = false;
        while values.len() < total {
            let n = values.len() - self.b as usize;
            self.bind_window(&mut b, &values, n, &xs);
            match evaluate(g, &b) {
                Ok(v) if v.is_finite() && v.abs() <= DIVERGENCE_BOUND => values.push(v),
                _ => {
                    divergent = true;
                    break;
                }
            }
        }
        let xs = xs[..values.len()].to_vec();
        Ok(Trajectory {
            values,
            x: xs,
            a: self.a,
            b: self.b,
            divergent,
        })
    }

    /// Largest `|E|` over all complete windows of `t`, absolute and scaled
    /// by the rounding magnitude of each evaluation.
    pub fn residual_stats(&self, t: &Trajectory, bind: &Binding) -> Result<(f64, f64)> {
        let mut b = bind.clone();
        let (mut abs, mut scaled) = (0.0f64, 0.0f64);
        for n in t.windows(self.a, self.b) {
            self.bind_window(&mut b, &t.values, n, &t.x);
            let (v, m) = crate::expr::evaluate_with_magnitude(&self.equation, &b)?;
            abs = abs.max(v.abs());
            scaled = scaled.max(v.abs() / (1.0 + m));
        }
        Ok((abs, scaled))
    }

    /// `max_n |E(window n)|`.
    pub fn residual(&self, t: &Trajectory, bind: &Binding) -> Result<f64> {
        Ok(self.residual_stats(t, bind)?.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub values: Vec<f64>,
    pub x: Vec<f64>,
    pub a: u32,
    pub b: u32,
    pub divergent: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Base indices `n` whose window `[n-a, n+b]` lies inside the trajectory.
    pub fn windows(&self, a: u32, b: u32) -> std::ops::Range<usize> {
        let (a, b) = (a as usize, b as usize);
        if self.values.len() < a + b + 1 {
            return 0..0;
        }
        a..self.values.len() - b
    }
}
