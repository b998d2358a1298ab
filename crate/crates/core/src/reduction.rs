//! Invariants of λ-symmetries with `φ̃ = 1` and reduction of three-point
//! schemes to first-order recurrences.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz_solver::nice_rational;
use crate::error::{Error, Result};
use crate::expr::poly::Atom;
use crate::expr::sample::DEFAULT_SEED;
use crate::expr::{
    differentiate, evaluate_with_magnitude, normalize, shift, Binding, Expr, RatFun, Symbol,
};
use crate::lambda_prolong::{apply_field, lambda_prolong, ChiMultiplier, DiscreteVectorField};
use crate::par;
use crate::scheme::{Scheme, Trajectory};

/// The variable of a reduced map.
pub fn reduced_var() -> Symbol {
    Symbol::param("v")
}

fn depends_on_u0(a: &Atom) -> bool {
    match a {
        Atom::Sym(s) => *s == Symbol::u(0),
        Atom::Opaque(e) => e.contains(&Symbol::u(0)),
    }
}

/// `P` with `∂P/∂u[0] = χ` and no constant term. `χ` must be a polynomial in
/// `u[0]` whose `u[0]`-dependent terms are powers of `u[0]` or single
/// derivatives `f'(u[0])` of function symbols.
pub fn antiderivative(chi: &ChiMultiplier) -> Result<Expr> {
    let rf = RatFun::from_expr(chi.chi())?;
    if rf.denominator().atoms().iter().any(depends_on_u0) {
        return Err(Error::UnsupportedAntiderivative(format!(
            "`{}` is not polynomial in u[0]",
            chi.chi()
        )));
    }
    let u0 = Atom::Sym(Symbol::u(0));
    let mut out = Expr::zero();
    for (mono, c) in rf.numerator().terms() {
        let (dep, rest) = mono.split(&depends_on_u0);
        let integrated = match dep.factors() {
            [] => Expr::u(0),
            [(a, k)] if *a == u0 => Expr::u(0).pow(*k as i32 + 1) / Expr::int(*k as i64 + 1),
            [(Atom::Opaque(Expr::Func(r, arg)), 1)] if r.order > 0 && **arg == Expr::u(0) => {
                Expr::func(&r.name, r.offset, r.order - 1, Expr::u(0))
            }
            _ => {
                return Err(Error::UnsupportedAntiderivative(format!(
                    "no antiderivative for the term `{}`",
                    dep.to_expr()
                )))
            }
        };
        out = out + Expr::Const(c.clone()) * rest.to_expr() * integrated;
    }
    let p = normalize(&(out / rf.denominator().to_expr()))?;
    if !normalize(&(differentiate(&p, &Symbol::u(0)) - chi.chi().clone()))?.is_zero() {
        return Err(Error::UnsupportedAntiderivative(format!(
            "derivative check failed for `{p}`"
        )));
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantForm {
    pub chi: ChiMultiplier,
    pub p: Expr,
    /// `u[1] - P(u[0])`
    pub v: Expr,
}

/// Two-point invariant of the λ-prolonged field `∂u[0] + χ ∂u[1]`.
pub fn invariant(chi: &ChiMultiplier) -> Result<InvariantForm> {
    let p = antiderivative(chi)?;
    let v = normalize(&(Expr::u(1) - p.clone()))?;
    let field = lambda_prolong(&DiscreteVectorField::vertical(Expr::one())?, chi, 0, 1)?;
    let image = apply_field(&field, &v)?;
    if !image.is_zero() {
        return Err(Error::InvariantCheck(format!(
            "the field maps `{v}` to `{image}`"
        )));
    }
    Ok(InvariantForm {
        chi: chi.clone(),
        p,
        v,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionMethod {
    Symbolic,
    Fitted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationStatus {
    Pass,
    Fail,
    /// No trajectory produced a single checkable pair.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub status: VerificationStatus,
    pub trials: usize,
    pub steps: usize,
    /// Trajectories truncated by blow-up; their finite prefixes are checked.
    pub divergent: usize,
    /// Number of `(v_n, v_{n+1})` pairs compared.
    pub pairs: usize,
    pub max_abs_dev: f64,
    /// max of `|v_{n+1} - R(v_n)| / (1 + s)` with `s` the rounding scale.
    pub max_scaled_dev: f64,
    /// Same two measures for `|v_n - v_0|`.
    pub conservation_abs: f64,
    pub conservation_scaled: f64,
    pub tol: f64,
    pub h: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedMap {
    /// `R` in [`reduced_var`] and `h`.
    pub r: Expr,
    pub method: ReductionMethod,
    /// Present for fitted maps, which are only returned after verification.
    pub verification: Option<VerificationReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReduceOptions {
    pub h: f64,
    pub trials: usize,
    pub steps: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions {
            h: 0.1,
            trials: 20,
            steps: 100,
            tol: 1e-10,
            seed: DEFAULT_SEED,
        }
    }
}

/// Window values with `|u| ≤` this bound are used for fitting.
const FIT_BOUND: f64 = 1e3;
const FIT_TOL: f64 = 1e-8;
const MAX_FIT_DEGREE: usize = 4;

fn three_point(s: &Scheme) -> Result<Scheme> {
    if (s.a, s.b) != (1, 1) {
        return Err(Error::UnsupportedScheme(format!(
            "reduction needs the stencil -1..1, found -{}..{}",
            s.a, s.b
        )));
    }
    let mut s = s.clone();
    if s.solved().is_none() {
        s.solve_for_leading()?;
    }
    Ok(s)
}

/// Rewrite `v[n+1]` on shell as a function of `v[n]` alone: symbolically by
/// substituting `u[0] = v + P(u[-1])`, otherwise by a verified least-squares
/// fit of degree at most 4.
pub fn reduce_order(s: &Scheme, inv: &InvariantForm, opts: &ReduceOptions) -> Result<ReducedMap> {
    let s = three_point(s)?;
    let g = s.solved().expect("solved form").clone();
    let w = normalize(&inv.v.substitute(&Symbol::u(1), &g))?;
    let back = Expr::sym(reduced_var()) + shift(&inv.p, -1)?;
    let r = normalize(&w.substitute(&Symbol::u(0), &back))?;
    let window = [
        Symbol::u(-1),
        Symbol::u(0),
        Symbol::u(1),
        Symbol::x(0),
        Symbol::x(-1),
        Symbol::x(1),
    ];
    if !window.iter().any(|v| r.contains(v)) {
        return Ok(ReducedMap {
            r,
            method: ReductionMethod::Symbolic,
            verification: None,
        });
    }
    let r = fit_map(&s, inv, opts)?;
    let fresh = ReduceOptions {
        seed: opts.seed.wrapping_add(1),
        ..opts.clone()
    };
    let report = verify_reduction(&s, inv, &r, fresh.trials, fresh.steps, fresh.tol, &fresh)?;
    if report.status != VerificationStatus::Pass {
        return Err(Error::NotReducible(format!(
            "fitted map `{r}` fails on fresh trajectories (deviation {:.3e})",
            report.max_scaled_dev
        )));
    }
    Ok(ReducedMap {
        r,
        method: ReductionMethod::Fitted,
        verification: Some(report),
    })
}

/// `(v_n, scale)` pairs, window sizes, divergence flag.
type Run = (Vec<(f64, f64)>, Vec<f64>, bool);

struct Sampled {
    /// `(v_n, scale)` along each trajectory.
    runs: Vec<Vec<(f64, f64)>>,
    /// Largest `|u|` in the window of each `v_n`.
    sizes: Vec<Vec<f64>>,
    divergent: usize,
}

/// `(v[n], magnitude)` on consecutive windows of `t`, stopping at the
/// first window where `v` is not finite.
pub fn invariant_along(inv: &InvariantForm, t: &Trajectory, bind: &Binding) -> Vec<(f64, f64)> {
    let mut b = bind.clone();
    let mut out = Vec::new();
    for n in 0..t.len().saturating_sub(1) {
        b.set(Symbol::u(0), t.values[n]);
        b.set(Symbol::u(1), t.values[n + 1]);
        b.set(Symbol::x(0), t.x[n]);
        b.set(Symbol::x(1), t.x[n + 1]);
        match evaluate_with_magnitude(&inv.v, &b) {
            Ok(v) if v.0.is_finite() && v.1.is_finite() => out.push(v),
            _ => break,
        }
    }
    out
}

fn sample_invariant(s: &Scheme, inv: &InvariantForm, opts: &ReduceOptions) -> Result<Sampled> {
    let bind = s.binding(opts.h);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let inits: Vec<Vec<f64>> = (0..opts.trials)
        .map(|_| (0..(s.a + s.b)).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    let runs = par::map(inits, |init| -> Result<Run> {
        let t = s.iterate_trajectory(&init, opts.steps, &bind)?;
        let vs = invariant_along(inv, &t, &bind);
        let sizes = (0..vs.len())
            .map(|n| t.values[n].abs().max(t.values[n + 1].abs()))
            .collect();
        Ok((vs, sizes, t.divergent))
    });
    let mut out = Sampled {
        runs: Vec::new(),
        sizes: Vec::new(),
        divergent: 0,
    };
    for r in runs {
        let (vs, sizes, divergent) = r?;
        out.runs.push(vs);
        out.sizes.push(sizes);
        out.divergent += divergent as usize;
    }
    Ok(out)
}

fn fit_map(s: &Scheme, inv: &InvariantForm, opts: &ReduceOptions) -> Result<Expr> {
    let data = sample_invariant(s, inv, opts)?;
    let mut pairs = Vec::new();
    for (run, sizes) in data.runs.iter().zip(&data.sizes) {
        for n in 0..run.len().saturating_sub(1) {
            if sizes[n].max(sizes[n + 1]) <= FIT_BOUND {
                pairs.push((run[n].0, run[n + 1].0));
            }
        }
    }
    if pairs.len() < 2 * (MAX_FIT_DEGREE + 1) {
        return Err(Error::NotReducible(format!(
            "only {} bounded pairs to fit",
            pairs.len()
        )));
    }
    let y = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.1));
    let mut best = f64::INFINITY;
    for degree in 0..=MAX_FIT_DEGREE {
        let a = DMatrix::from_fn(pairs.len(), degree + 1, |i, j| pairs[i].0.powi(j as i32));
        let Ok(coeffs) = a.clone().svd(true, true).solve(&y, 1e-14) else {
            continue;
        };
        let fitted = &a * &coeffs;
        let dev = pairs
            .iter()
            .zip(fitted.iter())
            .map(|((_, yv), f)| (yv - f).abs() / (1.0 + yv.abs()))
            .fold(0.0, f64::max);
        best = best.min(dev);
        if dev <= FIT_TOL {
            let v = Expr::sym(reduced_var());
            let mut r = Expr::zero();
            for (j, c) in coeffs.iter().enumerate() {
                r = r + Expr::Const(nice_rational(*c)) * v.clone().pow(j as i32);
            }
            return Ok(normalize(&r)?);
        }
    }
    Err(Error::NotReducible(format!(
        "no polynomial of degree ≤ {MAX_FIT_DEGREE} maps v[n] to v[n+1] (best relative deviation {best:.3e})"
    )))
}

/// Iterate `trials` random trajectories with `u` in `[0, 1]^2` and compare
/// `v[n+1]` with `R(v[n])` on every finite window.
pub fn verify_reduction(
    s: &Scheme,
    inv: &InvariantForm,
    r: &Expr,
    trials: usize,
    steps: usize,
    tol: f64,
    opts: &ReduceOptions,
) -> Result<VerificationReport> {
    let s = three_point(s)?;
    let opts = ReduceOptions {
        trials,
        steps,
        tol,
        ..opts.clone()
    };
    let data = sample_invariant(&s, inv, &opts)?;
    let base = Binding::new().with(Symbol::param("h"), opts.h);
    let mut report = VerificationReport {
        status: VerificationStatus::Inconclusive,
        trials,
        steps,
        divergent: data.divergent,
        pairs: 0,
        max_abs_dev: 0.0,
        max_scaled_dev: 0.0,
        conservation_abs: 0.0,
        conservation_scaled: 0.0,
        tol,
        h: opts.h,
        seed: opts.seed,
    };
    for run in &data.runs {
        let Some(&(v0, m0)) = run.first() else {
            continue;
        };
        for (v, m) in run {
            let d = (v - v0).abs();
            report.conservation_abs = report.conservation_abs.max(d);
            report.conservation_scaled = report.conservation_scaled.max(d / (1.0 + m.max(m0)));
        }
        for w in run.windows(2) {
            let b = base.clone().with(reduced_var(), w[0].0);
            let (rv, rm) = evaluate_with_magnitude(r, &b)?;
            let d = (w[1].0 - rv).abs();
            report.pairs += 1;
            report.max_abs_dev = report.max_abs_dev.max(d);
            report.max_scaled_dev = report.max_scaled_dev.max(d / (1.0 + w[1].1.max(rm)));
        }
    }
    if report.pairs > 0 {
        report.status = if report.max_scaled_dev <= tol {
            VerificationStatus::Pass
        } else {
            VerificationStatus::Fail
        };
    }
    Ok(report)
}
