//! Search for λ-symmetries under a polynomial ansatz.
//!
//! The determining residual with template coefficients is cleared of
//! denominators and split by monomials in the window variables; each
//! coefficient must vanish. Affine systems are solved exactly over Q(h),
//! others by elimination with exact univariate roots, and only then by a
//! multi-start Levenberg-Marquardt iteration at numeric `h`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_integer::{Integer, Roots};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::determining::{
    check_symmetry, default_domain, determining_expression, CheckReport, DeterminingExpression,
};
use crate::error::{Error, ExprError, Result};
use crate::expr::poly::{gcd, Atom, Monomial, Poly};
use crate::expr::ratfun::substitute_poly;
use crate::expr::sample::DEFAULT_SEED;
use crate::expr::{
    differentiate, evaluate, normalize, rational_from_decimal, rational_to_f64, Binding, Expr,
    RatFun, SampleBox, SampleConfig, Symbol,
};
use crate::lambda_prolong::{ChiMultiplier, DiscreteVectorField};
use crate::par;
use crate::scheme::Scheme;

pub const MAX_DEGREE: usize = 3;
pub const MAX_UNKNOWNS: usize = 12;
const MAX_BRANCHES: usize = 256;
/// Rational-root search gives up on integer coefficients beyond this size.
const MAX_ROOT_SEARCH: u64 = 1_000_000_000_000;

/// Templates `χ = Σ c_i u[0]^i` and `φ = Σ p_j u[0]^j` (or `φ = 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct Ansatz {
    pub chi: Expr,
    pub phi: Expr,
    pub chi_unknowns: Vec<String>,
    pub phi_unknowns: Vec<String>,
}

impl Ansatz {
    pub fn unknowns(&self) -> Vec<String> {
        self.chi_unknowns
            .iter()
            .chain(&self.phi_unknowns)
            .cloned()
            .collect()
    }
}

fn template(prefix: &str, d: usize) -> (Expr, Vec<String>) {
    let names: Vec<String> = (0..=d).map(|i| format!("{prefix}{i}")).collect();
    let mut e = Expr::zero();
    for (i, n) in names.iter().enumerate() {
        e = e + Expr::param(n) * Expr::u(0).pow(i as i32);
    }
    (e, names)
}

pub fn build_ansatz(d: usize, with_phi: bool, d_phi: usize) -> Result<Ansatz> {
    for deg in [Some(d), with_phi.then_some(d_phi)].into_iter().flatten() {
        if deg > MAX_DEGREE {
            return Err(Error::DegreeLimit {
                degree: deg,
                limit: MAX_DEGREE,
            });
        }
    }
    let (chi, chi_unknowns) = template("c", d);
    let (phi, phi_unknowns) = if with_phi {
        template("p", d_phi)
    } else {
        (Expr::one(), Vec::new())
    };
    Ok(Ansatz {
        chi,
        phi,
        chi_unknowns,
        phi_unknowns,
    })
}

/// One polynomial condition on the unknowns with the window monomials whose
/// coefficients produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Equation {
    pub poly: Poly,
    pub origin: Vec<String>,
}

#[derive(Clone, Debug)]
pub enum Equations {
    /// Coefficients of window monomials, polynomial in the unknowns and `h`.
    Exact(Vec<Equation>),
    /// The residual at sample points, used when the unknowns sit inside
    /// exp/log/function atoms.
    Sampled {
        residual: Expr,
        points: Vec<Binding>,
    },
}

#[derive(Clone, Debug)]
pub struct CoefficientSystem {
    pub unknowns: Vec<String>,
    pub equations: Equations,
}

impl CoefficientSystem {
    pub fn exact(unknowns: &[String], polys: Vec<Poly>) -> Self {
        CoefficientSystem {
            unknowns: unknowns.to_vec(),
            equations: Equations::Exact(
                polys
                    .into_iter()
                    .map(|poly| Equation {
                        poly,
                        origin: Vec::new(),
                    })
                    .collect(),
            ),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.equations, Equations::Exact(_))
    }

    pub fn len(&self) -> usize {
        match &self.equations {
            Equations::Exact(e) => e.len(),
            Equations::Sampled { points, .. } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn atoms(&self) -> Vec<Atom> {
        self.unknowns
            .iter()
            .map(|n| Atom::Sym(Symbol::param(n)))
            .collect()
    }
}

/// Split the cleared residual into coefficient equations; falls back to
/// `3 × unknowns` sampled equations drawn from `fallback` when an unknown
/// occurs inside an opaque atom.
pub fn extract_coefficient_system(
    det: &DeterminingExpression,
    unknowns: &[String],
    fallback: &SampleBox,
    cfg: &SampleConfig,
) -> Result<CoefficientSystem> {
    if unknowns.len() > MAX_UNKNOWNS {
        return Err(Error::TooManyUnknowns(unknowns.len()));
    }
    let unknown_syms: BTreeSet<Symbol> = unknowns.iter().map(|n| Symbol::param(n)).collect();
    let rf = RatFun::from_expr(&det.residual)?;
    let hidden = rf
        .numerator()
        .atoms()
        .into_iter()
        .chain(rf.denominator().atoms())
        .any(|a| matches!(&a, Atom::Opaque(e) if e.free_symbols().iter().any(|s| unknown_syms.contains(s))));
    if hidden {
        let want = SampleConfig {
            samples: 3 * unknowns.len().max(1),
            ..*cfg
        };
        let (points, _) = fallback.collect(&want, |b| Ok(b.clone()))?;
        return Ok(CoefficientSystem {
            unknowns: unknowns.to_vec(),
            equations: Equations::Sampled {
                residual: det.raw.clone(),
                points,
            },
        });
    }
    let keep = |a: &Atom| !matches!(a, Atom::Sym(Symbol::Param(_)));
    let mut equations: Vec<Equation> = Vec::new();
    for (mono, coeff) in rf.numerator().collect_by(&keep) {
        let poly = coeff.monic();
        let origin = mono.to_expr().to_string();
        match equations.iter_mut().find(|e| e.poly == poly) {
            Some(e) => e.origin.push(origin),
            None => equations.push(Equation {
                poly,
                origin: vec![origin],
            }),
        }
    }
    Ok(CoefficientSystem {
        unknowns: unknowns.to_vec(),
        equations: Equations::Exact(equations),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Linear,
    Triangular,
    Newton,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub values: BTreeMap<String, Expr>,
    pub method: SolveMethod,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Numeric spacing for the Newton path.
    pub h: f64,
    pub starts: usize,
    pub seed: u64,
    pub dedup: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            h: 0.1,
            starts: 32,
            seed: DEFAULT_SEED,
            dedup: 1e-8,
        }
    }
}

/// All verified solutions, sorted by their numeric values at `opts.h`.
/// Free unknowns of an underdetermined system are set to zero.
pub fn solve_coefficient_system(
    sys: &CoefficientSystem,
    opts: &SolveOptions,
) -> Result<Vec<Solution>> {
    if sys.unknowns.len() > MAX_UNKNOWNS {
        return Err(Error::TooManyUnknowns(sys.unknowns.len()));
    }
    let atoms = sys.atoms();
    if let Equations::Exact(eqs) = &sys.equations {
        let polys: Vec<Poly> = eqs.iter().map(|e| e.poly.clone()).collect();
        let exact = if is_affine(&polys, &atoms) {
            Some((
                linear_solve(&polys, &atoms)?
                    .into_iter()
                    .collect::<Vec<_>>(),
                SolveMethod::Linear,
            ))
        } else {
            triangular_solve(&polys, &atoms)?.map(|s| (s, SolveMethod::Triangular))
        };
        if let Some((sols, method)) = exact {
            let mut out = Vec::new();
            for asg in sols {
                if verify_exact(&polys, &asg)? {
                    out.push(Solution {
                        values: sys
                            .unknowns
                            .iter()
                            .zip(&atoms)
                            .map(|(n, a)| (n.clone(), asg[a].to_expr()))
                            .collect(),
                        method,
                    });
                }
            }
            sort_solutions(&mut out, opts.h);
            return Ok(out);
        }
    }
    newton_solve(sys, opts)
}

fn unknown_degree(m: &Monomial, atoms: &[Atom]) -> u32 {
    atoms.iter().map(|a| m.degree_in(a)).sum()
}

fn is_affine(polys: &[Poly], atoms: &[Atom]) -> bool {
    polys
        .iter()
        .all(|p| p.terms().all(|(m, _)| unknown_degree(m, atoms) <= 1))
}

fn verify_exact(polys: &[Poly], asg: &BTreeMap<Atom, RatFun>) -> Result<bool> {
    for p in polys {
        if !substitute_poly(p, asg)?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

fn numeric_values(s: &Solution, h: f64) -> Vec<f64> {
    let b = Binding::new().with(Symbol::param("h"), h);
    s.values
        .values()
        .map(|e| evaluate(e, &b).unwrap_or(f64::NAN))
        .collect()
}

fn sort_solutions(sols: &mut [Solution], h: f64) {
    sols.sort_by(|a, b| {
        let (va, vb) = (numeric_values(a, h), numeric_values(b, h));
        va.iter()
            .zip(&vb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

/// Gaussian elimination over rational functions in the parameters.
fn linear_solve(polys: &[Poly], atoms: &[Atom]) -> Result<Option<BTreeMap<Atom, RatFun>>> {
    let n = atoms.len();
    let mut rows: Vec<Vec<RatFun>> = Vec::new();
    for p in polys {
        let mut row = vec![RatFun::zero(); n + 1];
        for (m, c) in p.collect_by(&|a| atoms.contains(a)) {
            let col = atoms
                .iter()
                .position(|a| m == Monomial::atom(a.clone(), 1))
                .unwrap_or(n);
            row[col] = RatFun::from_poly(c);
        }
        rows.push(row);
    }
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(i) = (r..rows.len()).find(|i| !rows[*i][col].is_zero()) else {
            continue;
        };
        rows.swap(r, i);
        let inv = rows[r][col].recip()?;
        rows[r] = rows[r].iter().map(|v| v.mul(&inv)).collect();
        for i in 0..rows.len() {
            if i != r && !rows[i][col].is_zero() {
                let f = rows[i][col].clone();
                rows[i] = rows[i]
                    .iter()
                    .zip(&rows[r])
                    .map(|(a, b)| a.sub(&b.mul(&f)))
                    .collect();
            }
        }
        pivots.push(col);
        r += 1;
    }
    if rows[r..].iter().any(|row| !row[n].is_zero()) {
        return Ok(None);
    }
    let mut out: BTreeMap<Atom, RatFun> =
        atoms.iter().map(|a| (a.clone(), RatFun::zero())).collect();
    for (i, col) in pivots.iter().enumerate() {
        out.insert(atoms[*col].clone(), rows[i][n].neg());
    }
    Ok(Some(out))
}

fn unknowns_in(p: &Poly, atoms: &[Atom]) -> Vec<Atom> {
    atoms
        .iter()
        .filter(|a| p.contains_atom(a))
        .cloned()
        .collect()
}

fn assign(asg: &mut BTreeMap<Atom, RatFun>, a: Atom, v: RatFun) -> Result<()> {
    let single = BTreeMap::from([(a.clone(), v.clone())]);
    for value in asg.values_mut() {
        *value = value.substitute(&single)?;
    }
    asg.insert(a, v);
    Ok(())
}

fn reduce(eqs: &[Poly], asg: &BTreeMap<Atom, RatFun>) -> Result<Vec<Poly>> {
    let mut out: Vec<Poly> = Vec::new();
    for p in eqs {
        let q = substitute_poly(p, asg)?.numerator().monic();
        if !q.is_zero() && !out.contains(&q) {
            out.push(q);
        }
    }
    out.sort_by_key(|p| p.len());
    Ok(out)
}

/// Exhaustive elimination; `None` when some branch cannot be resolved
/// exactly.
fn triangular_solve(eqs: &[Poly], atoms: &[Atom]) -> Result<Option<Vec<BTreeMap<Atom, RatFun>>>> {
    let mut out = Vec::new();
    let mut budget = MAX_BRANCHES;
    if branch(eqs, BTreeMap::new(), atoms, &mut out, &mut budget)? {
        Ok(Some(out))
    } else {
        Ok(None)
    }
}

fn branch(
    eqs: &[Poly],
    mut asg: BTreeMap<Atom, RatFun>,
    atoms: &[Atom],
    out: &mut Vec<BTreeMap<Atom, RatFun>>,
    budget: &mut usize,
) -> Result<bool> {
    if *budget == 0 {
        return Ok(false);
    }
    *budget -= 1;
    let eqs = reduce(eqs, &asg)?;
    if eqs.iter().any(|p| unknowns_in(p, atoms).is_empty()) {
        return Ok(true);
    }
    if eqs.is_empty() {
        for a in atoms {
            if !asg.contains_key(a) {
                assign(&mut asg, a.clone(), RatFun::zero())?;
            }
        }
        out.push(asg);
        return Ok(true);
    }
    for p in &eqs {
        for a in unknowns_in(p, atoms) {
            if p.degree_in(&a) != 1 {
                continue;
            }
            let cs = p.coefficients_in(&a);
            let lead = &cs[&1];
            if unknowns_in(lead, atoms).is_empty() {
                let rest = cs.get(&0).cloned().unwrap_or_default();
                let v = RatFun::from_poly(rest.neg()).div(&RatFun::from_poly(lead.clone()))?;
                assign(&mut asg, a, v)?;
                return branch(&eqs, asg, atoms, out, budget);
            }
        }
    }
    let mut univariate: Vec<(&Poly, Atom)> = eqs
        .iter()
        .filter_map(|p| match unknowns_in(p, atoms).as_slice() {
            [a] => Some((p, a.clone())),
            _ => None,
        })
        .collect();
    univariate.sort_by_key(|(p, a)| p.degree_in(a));
    for (p, a) in univariate {
        if let Some(roots) = univariate_roots(p, &a)? {
            for r in roots {
                let mut next = asg.clone();
                assign(&mut next, a.clone(), r)?;
                if !branch(&eqs, next, atoms, out, budget)? {
                    return Ok(false);
                }
            }
            return Ok(true);
        }
    }
    Ok(false)
}

/// Distinct roots in Q(params) of `p`, univariate in `a`; `None` unless all
/// roots were found.
fn univariate_roots(p: &Poly, a: &Atom) -> Result<Option<Vec<RatFun>>> {
    let g = gcd(p, &p.derivative(a));
    let Some(mut q) = (if g.is_constant() {
        Some(p.clone())
    } else {
        p.exact_div(&g)
    }) else {
        return Ok(None);
    };
    let content = q.content_in(a);
    if !content.is_constant() {
        match q.exact_div(&content) {
            Some(v) => q = v,
            None => return Ok(None),
        }
    }
    let var = Poly::atom(a.clone());
    let mut roots = Vec::new();
    if !q.coefficients_in(a).contains_key(&0) {
        roots.push(RatFun::zero());
        q = match q.exact_div(&var) {
            Some(v) => v,
            None => return Ok(None),
        };
    }
    loop {
        let cs = q.coefficients_in(a);
        match q.degree_in(a) {
            0 => break,
            1 => {
                let c0 = cs.get(&0).cloned().unwrap_or_default();
                roots.push(RatFun::from_poly(c0.neg()).div(&RatFun::from_poly(cs[&1].clone()))?);
                break;
            }
            _ => {
                let Some(r) = find_root(&q, a)? else {
                    return Ok(None);
                };
                let factor = r.denominator().mul(&var).sub(r.numerator());
                q = match q.exact_div(&factor) {
                    Some(v) => v,
                    None => return Ok(None),
                };
                roots.push(r);
            }
        }
    }
    Ok(Some(roots))
}

fn is_root(q: &Poly, a: &Atom, r: &RatFun) -> Result<bool> {
    Ok(substitute_poly(q, &BTreeMap::from([(a.clone(), r.clone())]))?.is_zero())
}

fn constant_coefficients(q: &Poly, a: &Atom) -> Option<Vec<BigRational>> {
    let cs = q.coefficients_in(a);
    let deg = q.degree_in(a) as usize;
    (0..=deg)
        .map(|i| {
            cs.get(&(i as u32))
                .map_or(Some(BigRational::zero()), |c| c.as_constant())
        })
        .collect()
}

/// One root of `q` in Q or, when the only other atom is `h`, a root of the
/// form `r h^j` or a polynomial in `h` of degree at most 3.
fn find_root(q: &Poly, a: &Atom) -> Result<Option<RatFun>> {
    let others: BTreeSet<Atom> = q.atoms().into_iter().filter(|b| b != a).collect();
    if others.is_empty() {
        let coeffs = constant_coefficients(q, a).expect("constant coefficients");
        return Ok(rational_roots(&coeffs)
            .into_iter()
            .next()
            .map(RatFun::constant));
    }
    let h = Atom::Sym(Symbol::param("h"));
    if others.len() != 1 || !others.contains(&h) {
        return Ok(None);
    }
    let samples: Vec<BigRational> = [1, 2, 3, 5]
        .iter()
        .map(|v| BigRational::from_integer(BigInt::from(*v)))
        .collect();
    let mut root_sets = Vec::new();
    for hv in &samples {
        let at = substitute_poly(
            q,
            &BTreeMap::from([(h.clone(), RatFun::constant(hv.clone()))]),
        )?;
        let Some(coeffs) = constant_coefficients(at.numerator(), a) else {
            return Ok(None);
        };
        let mut r = rational_roots(&coeffs);
        r.sort();
        root_sets.push(r);
    }
    let hpoly = RatFun::from_poly(Poly::atom(h.clone()));
    let mut candidates = Vec::new();
    for r in &root_sets[0] {
        for j in -3..=3 {
            candidates.push(RatFun::constant(r.clone()).mul(&hpoly.powi(j)?));
        }
    }
    let m = root_sets[0].len();
    if m > 0 && root_sets.iter().all(|s| s.len() == m) {
        for i in 0..m {
            let pts: Vec<(BigRational, BigRational)> = samples
                .iter()
                .zip(&root_sets)
                .map(|(x, s)| (x.clone(), s[i].clone()))
                .collect();
            candidates.push(RatFun::from_poly(interpolate(&pts, &h)));
        }
    }
    for c in candidates {
        if is_root(q, a, &c)? {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

/// Lagrange interpolation through `pts` as a polynomial in `h`.
fn interpolate(pts: &[(BigRational, BigRational)], h: &Atom) -> Poly {
    let x = Poly::atom(h.clone());
    let mut out = Poly::zero();
    for (i, (xi, yi)) in pts.iter().enumerate() {
        let mut basis = Poly::constant(yi.clone());
        for (j, (xj, _)) in pts.iter().enumerate() {
            if i != j {
                let scale = (xi - xj).recip();
                basis = basis.mul(&x.sub(&Poly::constant(xj.clone())).scale(&scale));
            }
        }
        out = out.add(&basis);
    }
    out
}

fn divisors(n: &BigInt) -> Option<Vec<BigInt>> {
    let n = n.abs().to_u64()?;
    if n == 0 || n > MAX_ROOT_SEARCH {
        return None;
    }
    let mut out = Vec::new();
    for d in 1..=n.sqrt() {
        if n % d == 0 {
            out.push(BigInt::from(d));
            if d != n / d {
                out.push(BigInt::from(n / d));
            }
        }
    }
    Some(out)
}

/// Distinct rational roots of `Σ coeffs[i] x^i`.
fn rational_roots(coeffs: &[BigRational]) -> Vec<BigRational> {
    let lcm = coeffs
        .iter()
        .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let ints: Vec<BigInt> = coeffs
        .iter()
        .map(|c| (c * BigRational::from_integer(lcm.clone())).to_integer())
        .collect();
    let eval = |x: &BigRational| {
        ints.iter().rev().fold(BigRational::zero(), |acc, c| {
            acc * x + BigRational::from_integer(c.clone())
        })
    };
    let mut out = Vec::new();
    let low = ints.iter().position(|c| !c.is_zero());
    let Some(low) = low else { return out };
    if low > 0 {
        out.push(BigRational::zero());
    }
    let high = ints
        .iter()
        .rposition(|c| !c.is_zero())
        .expect("nonzero coefficient");
    if high == low {
        return out;
    }
    let (Some(ps), Some(qs)) = (divisors(&ints[low]), divisors(&ints[high])) else {
        return out;
    };
    let mut seen = BTreeSet::new();
    for p in &ps {
        for q in &qs {
            for sign in [1, -1] {
                let cand = BigRational::new(p * sign, q.clone());
                if seen.insert(cand.clone()) && eval(&cand).is_zero() {
                    out.push(cand);
                }
            }
        }
    }
    out
}

struct Residuals {
    unknowns: Vec<Symbol>,
    /// (value, gradient) expressions.
    funs: Vec<(Expr, Vec<Expr>)>,
    /// (function index, binding, scale) per residual component.
    rows: Vec<(usize, Binding, f64)>,
}

impl Residuals {
    fn new(sys: &CoefficientSystem, h: f64) -> Residuals {
        let unknowns: Vec<Symbol> = sys.unknowns.iter().map(|n| Symbol::param(n)).collect();
        let grads = |e: &Expr| {
            unknowns
                .iter()
                .map(|s| differentiate(e, s))
                .collect::<Vec<_>>()
        };
        let (funs, rows) = match &sys.equations {
            Equations::Exact(eqs) => {
                let base = Binding::new().with(Symbol::param("h"), h);
                let mut funs = Vec::new();
                let mut rows = Vec::new();
                for (i, e) in eqs.iter().enumerate() {
                    let expr = e.poly.to_expr();
                    let scale = e
                        .poly
                        .terms()
                        .map(|(_, c)| rational_to_f64(c).abs())
                        .fold(0.0, f64::max)
                        .max(f64::MIN_POSITIVE);
                    funs.push((expr.clone(), grads(&expr)));
                    rows.push((i, base.clone(), 1.0 / scale));
                }
                (funs, rows)
            }
            Equations::Sampled { residual, points } => {
                let funs = vec![(residual.clone(), grads(residual))];
                let rows = points.iter().map(|b| (0, b.clone(), 1.0)).collect();
                (funs, rows)
            }
        };
        Residuals {
            unknowns,
            funs,
            rows,
        }
    }

    fn eval(&self, x: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = self.unknowns.len();
        let mut f = DVector::zeros(self.rows.len());
        let mut j = DMatrix::zeros(self.rows.len(), n);
        for (r, (fi, b, scale)) in self.rows.iter().enumerate() {
            let mut b = b.clone();
            for (s, v) in self.unknowns.iter().zip(x.iter()) {
                b.set(s.clone(), *v);
            }
            let (value, grads) = &self.funs[*fi];
            f[r] = evaluate(value, &b).ok()? * scale;
            for (c, g) in grads.iter().enumerate() {
                j[(r, c)] = evaluate(g, &b).ok()? * scale;
            }
        }
        Some((f, j))
    }
}

/// Damped Gauss-Newton from `x0`; returns the end point and residual norm.
fn levenberg_marquardt(res: &Residuals, x0: Vec<f64>) -> Option<(Vec<f64>, f64)> {
    let n = x0.len();
    let mut x = DVector::from_vec(x0);
    let (mut f, mut j) = res.eval(&x)?;
    let mut cost = f.norm_squared();
    let mut mu = 1e-3;
    for _ in 0..400 {
        if cost < 1e-30 {
            break;
        }
        let jt = j.transpose();
        let a = &jt * &j;
        let g = &jt * &f;
        let mut damped = a.clone();
        for i in 0..n {
            damped[(i, i)] += mu * (a[(i, i)] + 1.0);
        }
        let Some(step) = damped.lu().solve(&(-g)) else {
            mu *= 10.0;
            continue;
        };
        let xn = &x + &step;
        match res.eval(&xn) {
            Some((fnew, jnew)) if fnew.norm_squared() < cost => {
                let small = step.norm() <= 1e-15 * (1.0 + x.norm());
                x = xn;
                f = fnew;
                j = jnew;
                cost = f.norm_squared();
                mu = (mu / 3.0).max(1e-15);
                if small {
                    break;
                }
            }
            _ => {
                mu *= 4.0;
                if mu > 1e15 {
                    break;
                }
            }
        }
    }
    Some((x.as_slice().to_vec(), cost.sqrt()))
}

/// Simplest rational within `1e-12` relative of `v` with a denominator of at
/// most `10^4`, else the shortest decimal.
pub fn nice_rational(v: f64) -> BigRational {
    let tol = 1e-12 * (1.0 + v.abs());
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut x = v;
    for _ in 0..40 {
        let a = x.floor();
        if a.abs() > 1e12 {
            break;
        }
        let a = a as i64;
        let (p2, q2) = (
            a.saturating_mul(p1).saturating_add(p0),
            a.saturating_mul(q1).saturating_add(q0),
        );
        if q2 > 10_000 {
            break;
        }
        if (p2 as f64 / q2 as f64 - v).abs() <= tol {
            return BigRational::new(BigInt::from(p2), BigInt::from(q2));
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = x - a as f64;
        if frac.abs() < 1e-300 {
            break;
        }
        x = 1.0 / frac;
    }
    rational_from_decimal(v).unwrap_or_else(BigRational::zero)
}

fn newton_solve(sys: &CoefficientSystem, opts: &SolveOptions) -> Result<Vec<Solution>> {
    let res = Residuals::new(sys, opts.h);
    let n = sys.unknowns.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts: Vec<Vec<f64>> = (0..opts.starts)
        .map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let accept = 1e-9 * (res.rows.len().max(1) as f64).sqrt();
    let ends = par::map(starts, |x0| levenberg_marquardt(&res, x0));
    let mut roots: Vec<Vec<f64>> = Vec::new();
    for (x, norm) in ends.into_iter().flatten() {
        if norm > accept || x.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let dup = roots.iter().any(|r| {
            r.iter()
                .zip(&x)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                <= opts.dedup
        });
        if !dup {
            roots.push(x);
        }
    }
    roots.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(roots
        .into_iter()
        .map(|x| Solution {
            values: sys
                .unknowns
                .iter()
                .zip(x)
                .map(|(name, v)| (name.clone(), Expr::Const(nice_rational(v))))
                .collect(),
            method: SolveMethod::Newton,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FindOptions {
    pub with_phi: bool,
    pub phi_degree: usize,
    /// Numeric spacing for sampling and the Newton path.
    pub h: f64,
    pub tol: f64,
    pub sample: SampleConfig,
    pub solve: SolveOptions,
}

impl Default for FindOptions {
    fn default() -> Self {
        FindOptions {
            with_phi: false,
            phi_degree: 0,
            h: 0.1,
            tol: 1e-10,
            sample: SampleConfig::default(),
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hit {
    pub phi: Expr,
    pub chi: Expr,
    pub lambda: Expr,
    pub coefficients: BTreeMap<String, Expr>,
    pub method: SolveMethod,
    pub report: CheckReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FindResult {
    pub degree: usize,
    /// Equations extracted over all φ normalizations.
    pub equations: usize,
    pub sampled: bool,
    pub hits: Vec<Hit>,
}

/// Normalizations of the φ template: the first nonzero coefficient is 1.
fn phi_charts(ansatz: &Ansatz) -> Vec<Vec<(Symbol, Expr)>> {
    if ansatz.phi_unknowns.is_empty() {
        return vec![Vec::new()];
    }
    (0..ansatz.phi_unknowns.len())
        .map(|k| {
            ansatz.phi_unknowns[..=k]
                .iter()
                .enumerate()
                .map(|(j, n)| {
                    (
                        Symbol::param(n),
                        if j == k { Expr::one() } else { Expr::zero() },
                    )
                })
                .collect()
        })
        .collect()
}

/// Ansatz, determining residual, coefficient system, solve, and an
/// independent check of every candidate. Only passing candidates are
/// returned.
pub fn find_lambda_symmetry(s: &Scheme, d: usize, opts: &FindOptions) -> Result<FindResult> {
    let mut s = s.inline_polynomials()?;
    s.solve_for_leading()?;
    let ansatz = build_ansatz(d, opts.with_phi, opts.phi_degree)?;
    let domain = default_domain(&s, opts.h);
    let solve = SolveOptions {
        h: opts.h,
        ..opts.solve.clone()
    };
    let mut result = FindResult {
        degree: d,
        equations: 0,
        sampled: false,
        hits: Vec::new(),
    };
    for chart in phi_charts(&ansatz) {
        let phi = ansatz.phi.substitute_all(&chart);
        let fixed: BTreeSet<&Symbol> = chart.iter().map(|(s, _)| s).collect();
        let unknowns: Vec<String> = ansatz
            .unknowns()
            .into_iter()
            .filter(|n| !fixed.contains(&Symbol::param(n)))
            .collect();
        let det = determining_expression(
            &s,
            &DiscreteVectorField::vertical(phi.clone())?,
            &ChiMultiplier::new(ansatz.chi.clone())?,
        )?;
        let sys = extract_coefficient_system(&det, &unknowns, &domain, &opts.sample)?;
        result.equations += sys.len();
        result.sampled |= !sys.is_exact();
        for sol in solve_coefficient_system(&sys, &solve)? {
            let subs: Vec<(Symbol, Expr)> = sol
                .values
                .iter()
                .map(|(n, v)| (Symbol::param(n), v.clone()))
                .collect();
            let chi = normalize(&ansatz.chi.substitute_all(&subs))?;
            let phi = normalize(&phi.substitute_all(&subs))?;
            if chi.is_zero() || phi.is_zero() {
                continue;
            }
            let multiplier = ChiMultiplier::new(chi.clone())?;
            let vf = DiscreteVectorField::vertical(phi.clone())?;
            let report = match check_symmetry(&s, &vf, &multiplier, &domain, opts.tol, &opts.sample)
            {
                Ok(r) => r,
                Err(Error::Expr(ExprError::SamplingExhausted { .. })) => continue,
                Err(e) => return Err(e),
            };
            if report.pass {
                result.hits.push(Hit {
                    phi,
                    chi,
                    lambda: multiplier.lambda(),
                    coefficients: sol.values.clone(),
                    method: sol.method,
                    report,
                });
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::fixtures;

    fn p(t: &str) -> Expr {
        parse(t).unwrap()
    }

    fn poly(t: &str) -> Poly {
        RatFun::from_expr(&p(t)).unwrap().numerator().clone()
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn system_for(scheme: &str, d: usize) -> CoefficientSystem {
        let s = fixtures::scheme(scheme)
            .unwrap()
            .inline_polynomials()
            .unwrap();
        let a = build_ansatz(d, false, 0).unwrap();
        let det = determining_expression(
            &s,
            &DiscreteVectorField::vertical(Expr::one()).unwrap(),
            &ChiMultiplier::new(a.chi.clone()).unwrap(),
        )
        .unwrap();
        extract_coefficient_system(
            &det,
            &a.unknowns(),
            &default_domain(&s, 0.1),
            &SampleConfig::default(),
        )
        .unwrap()
    }

    fn solve(sys: &CoefficientSystem) -> Vec<Solution> {
        solve_coefficient_system(sys, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn templates() {
        let a = build_ansatz(1, false, 0).unwrap();
        assert_eq!(a.chi, p("c0 + c1*u[0]"));
        assert!(a.phi.is_one());
        assert_eq!(build_ansatz(0, false, 0).unwrap().chi, p("c0"));
        let b = build_ansatz(2, true, 1).unwrap();
        assert_eq!(b.chi, p("c0 + c1*u[0] + c2*u[0]^2"));
        assert_eq!(b.phi, p("p0 + p1*u[0]"));
        assert_eq!(b.unknowns(), names(&["c0", "c1", "c2", "p0", "p1"]));
        assert!(matches!(
            build_ansatz(4, false, 0),
            Err(Error::DegreeLimit { .. })
        ));
    }

    #[test]
    fn example_two_linear_ansatz() {
        let sys = system_for("ex2", 1);
        assert!(sys.is_exact());
        let sols = solve(&sys);
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].values["c0"], Expr::one());
        assert_eq!(sols[0].values["c1"], Expr::h());
        assert_eq!(sols[0].method, SolveMethod::Triangular);
    }

    #[test]
    fn example_two_quadratic_and_constant_ansatz() {
        let sols = solve(&system_for("ex2", 2));
        assert_eq!(sols.len(), 1);
        assert!(sols[0].values["c2"].is_zero());
        assert_eq!(sols[0].values["c1"], Expr::h());
        assert!(solve(&system_for("ex2", 0)).is_empty());
    }

    #[test]
    fn trivial_scheme_gives_one_linear_equation() {
        let sys = system_for("trivial", 0);
        match &sys.equations {
            Equations::Exact(eqs) => {
                assert_eq!(eqs.len(), 1);
                assert_eq!(eqs[0].poly, poly("c0 - 1"));
            }
            _ => panic!("expected exact equations"),
        }
        let sols = solve(&sys);
        assert_eq!(sols.len(), 1);
        assert!(sols[0].values["c0"].is_one());
        assert_eq!(sols[0].method, SolveMethod::Linear);
    }

    #[test]
    fn inconsistent_and_underdetermined_linear_systems() {
        let sys = CoefficientSystem::exact(&names(&["c0"]), vec![poly("c0"), poly("c0 - 1")]);
        assert!(solve(&sys).is_empty());
        let sys = CoefficientSystem::exact(&names(&["c0", "c1"]), vec![poly("c0 + h*c1 - 2")]);
        let sols = solve(&sys);
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].values["c0"], Expr::int(2));
        assert!(sols[0].values["c1"].is_zero());
    }

    #[test]
    fn cubic_example_one_profile_solves_its_system() {
        let sys = system_for("ex1-cubic", 2);
        let known = [("c0", "1 + h"), ("c1", "-h"), ("c2", "0.9*h")];
        let asg: BTreeMap<Atom, RatFun> = known
            .iter()
            .map(|(n, v)| {
                (
                    Atom::Sym(Symbol::param(n)),
                    RatFun::from_expr(&p(v)).unwrap(),
                )
            })
            .collect();
        let Equations::Exact(eqs) = &sys.equations else {
            panic!()
        };
        for e in eqs {
            assert!(
                substitute_poly(&e.poly, &asg).unwrap().is_zero(),
                "{:?}",
                e.origin
            );
        }
        let sols = solve(&sys);
        assert_eq!(sols.len(), 1);
        for (n, v) in known {
            assert!(normalize(&(sols[0].values[n].clone() - p(v)))
                .unwrap()
                .is_zero());
        }
    }

    #[test]
    fn univariate_roots_in_h() {
        let c = Atom::Sym(Symbol::param("c0"));
        let roots = univariate_roots(&poly("(c0 - h)^2*(c0 + 2)*(2*c0 - 1 - h^2)"), &c)
            .unwrap()
            .unwrap();
        assert_eq!(roots.len(), 3);
        for r in [p("h"), p("-2"), p("(1 + h^2)/2")] {
            let r = RatFun::from_expr(&r).unwrap();
            assert!(roots.contains(&r), "{r:?}");
        }
        assert!(univariate_roots(&poly("c0^2 - 2"), &c).unwrap().is_none());
        assert_eq!(
            rational_roots(&[-6, 1, 1].map(|v| BigRational::from_integer(v.into()))).len(),
            2
        );
    }

    #[test]
    fn newton_path_for_unresolved_systems() {
        let sys = CoefficientSystem::exact(
            &names(&["c0", "c1"]),
            vec![poly("c0^2 + c1^2 - 5"), poly("c0*c1 - 2")],
        );
        let sols = solve(&sys);
        assert_eq!(sols.len(), 4);
        assert_eq!(sols[0].method, SolveMethod::Newton);
        let got: Vec<(Expr, Expr)> = sols
            .iter()
            .map(|s| (s.values["c0"].clone(), s.values["c1"].clone()))
            .collect();
        let want: Vec<(Expr, Expr)> = [(-2, -1), (-1, -2), (1, 2), (2, 1)]
            .iter()
            .map(|(a, b)| (Expr::int(*a), Expr::int(*b)))
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn sampled_mode_for_transcendental_templates() {
        let s = fixtures::scheme("trivial").unwrap();
        let det = determining_expression(
            &s,
            &DiscreteVectorField::vertical(Expr::one()).unwrap(),
            &ChiMultiplier::new(p("exp(c0*u[0])")).unwrap(),
        )
        .unwrap();
        let sys = extract_coefficient_system(
            &det,
            &names(&["c0"]),
            &default_domain(&s, 0.1),
            &SampleConfig::default(),
        )
        .unwrap();
        assert!(!sys.is_exact());
        assert_eq!(sys.len(), 3);
        let sols = solve(&sys);
        assert_eq!(sols.len(), 1);
        assert!(sols[0].values["c0"].is_zero());
    }

    #[test]
    fn nice_rationals() {
        assert_eq!(nice_rational(0.1), BigRational::new(1.into(), 10.into()));
        assert_eq!(
            nice_rational(-1.0000000000001),
            BigRational::from_integer((-1).into())
        );
        assert_eq!(
            nice_rational(std::f64::consts::PI),
            rational_from_decimal(std::f64::consts::PI).unwrap()
        );
    }

    #[test]
    fn find_on_fixtures() {
        let opts = FindOptions::default();
        let r = find_lambda_symmetry(&fixtures::scheme("ex2").unwrap(), 1, &opts).unwrap();
        assert_eq!(r.hits.len(), 1);
        assert_eq!(r.hits[0].chi, normalize(&p("1 + h*u[0]")).unwrap());
        assert!(r.hits[0].report.pass);
        assert!(
            find_lambda_symmetry(&fixtures::scheme("ex2").unwrap(), 0, &opts)
                .unwrap()
                .hits
                .is_empty()
        );
        let free = find_lambda_symmetry(&fixtures::scheme("free").unwrap(), 0, &opts).unwrap();
        assert_eq!(free.hits.len(), 1);
        assert!(free.hits[0].chi.is_one() && free.hits[0].phi.is_one());
    }

    #[test]
    fn joint_phi_search_is_normalized() {
        let opts = FindOptions {
            with_phi: true,
            phi_degree: 1,
            ..FindOptions::default()
        };
        let r = find_lambda_symmetry(&fixtures::scheme("ex2").unwrap(), 1, &opts).unwrap();
        assert!(r
            .hits
            .iter()
            .any(|h| h.phi.is_one() && h.chi == normalize(&p("1 + h*u[0]")).unwrap()));
        for h in &r.hits {
            assert!(h.report.pass);
        }
    }
}
