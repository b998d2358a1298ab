//! Continuous λ-prolongation on jet space and the `h → 0` limit of the
//! two-point discrete prolongation.
//!
//! Jet expressions use the continuous symbols `x`, `u`, `u1`, `u2`, ... and
//! any named parameters.

use serde::{Deserialize, Serialize};

use crate::determining::{symbolic_verdict, CheckReport};
use crate::error::{Error, Result};
use crate::expr::{
    differentiate, evaluate, normalize, sample_residual, Binding, Expr, LatticeVar, SampleBox,
    SampleConfig, Symbol,
};
use crate::lambda_prolong::ChiMultiplier;

fn cx() -> Symbol {
    Symbol::cont("x")
}

/// `D_x e = ∂_x e + Σ u_{k+1} ∂_{u_k} e`.
pub fn total_derivative(e: &Expr) -> Expr {
    let mut out = differentiate(e, &cx());
    for s in e.free_symbols() {
        if let Some(k) = s.jet_order() {
            out = out + Expr::sym(Symbol::jet(k + 1)) * differentiate(e, &s);
        }
    }
    out
}

fn check_symbols(e: &Expr, max_order: usize, what: &str) -> Result<()> {
    for s in e.free_symbols() {
        let ok = match &s {
            Symbol::Param(_) => true,
            Symbol::Cont(n) if n == "x" => true,
            Symbol::Cont(_) => s.jet_order().is_some_and(|k| k <= max_order),
            Symbol::Lattice(..) => false,
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "{what} may not depend on `{s}`"
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousVectorField {
    pub xi: Expr,
    pub phi: Expr,
}

impl ContinuousVectorField {
    pub fn new(xi: Expr, phi: Expr) -> Result<Self> {
        check_symbols(&xi, 0, "ξ")?;
        check_symbols(&phi, 0, "φ")?;
        Ok(ContinuousVectorField { xi, phi })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousLambda {
    pub lambda: Expr,
}

impl ContinuousLambda {
    pub fn new(lambda: Expr) -> Result<Self> {
        check_symbols(&lambda, 1, "λ")?;
        Ok(ContinuousLambda { lambda })
    }

    pub fn zero() -> Self {
        ContinuousLambda {
            lambda: Expr::zero(),
        }
    }
}

/// `u_m = f(x, u, u1, ..., u_{m-1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeSystem {
    pub order: usize,
    pub f: Expr,
}

impl OdeSystem {
    pub fn new(order: usize, f: Expr) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument(
                "ODE order must be at least 1".into(),
            ));
        }
        check_symbols(&f, order - 1, "the right-hand side")?;
        Ok(OdeSystem { order, f })
    }
}

/// `φ^{(k,λ)}` for `k = 1..=m`, each normalized.
pub fn continuous_lambda_prolong(
    vf: &ContinuousVectorField,
    lambda: &ContinuousLambda,
    m: usize,
) -> Result<Vec<Expr>> {
    let l = &lambda.lambda;
    let dxi = total_derivative(&vf.xi) + l.clone() * vf.xi.clone();
    let mut out = Vec::with_capacity(m);
    let mut prev = vf.phi.clone();
    for k in 0..m {
        let next = total_derivative(&prev) + l.clone() * prev.clone()
            - Expr::sym(Symbol::jet(k + 1)) * dxi.clone();
        prev = normalize(&next)?;
        out.push(prev.clone());
    }
    Ok(out)
}

/// `ξ ∂_x e + φ ∂_u e + Σ φ^{(k)} ∂_{u_k} e`.
pub fn apply_prolonged(vf: &ContinuousVectorField, coeffs: &[Expr], e: &Expr) -> Expr {
    let mut out = vf.xi.clone() * differentiate(e, &cx())
        + vf.phi.clone() * differentiate(e, &Symbol::jet(0));
    for (k, c) in coeffs.iter().enumerate() {
        out = out + c.clone() * differentiate(e, &Symbol::jet(k + 1));
    }
    out
}

/// `X^{(m,λ)}(u_m - f)` with `u_m := f`, not normalized.
pub fn ode_residual(
    ode: &OdeSystem,
    vf: &ContinuousVectorField,
    lambda: &ContinuousLambda,
) -> Result<Expr> {
    let m = ode.order;
    let coeffs = continuous_lambda_prolong(vf, lambda, m)?;
    let eq = Expr::sym(Symbol::jet(m)) - ode.f.clone();
    Ok(apply_prolonged(vf, &coeffs, &eq).substitute(&Symbol::jet(m), &ode.f))
}

/// `x, u, u1, ..., u_{m-1}` in `[0, 1]`.
pub fn jet_domain(m: usize) -> SampleBox {
    let mut b = SampleBox::new(Binding::new()).range(cx(), 0.0, 1.0);
    for k in 0..m {
        b.set_range(Symbol::jet(k), 0.0, 1.0);
    }
    b
}

pub fn check_ode_lambda_symmetry(
    ode: &OdeSystem,
    vf: &ContinuousVectorField,
    lambda: &ContinuousLambda,
    domain: &SampleBox,
    tol: f64,
    cfg: &SampleConfig,
) -> Result<CheckReport> {
    let raw = ode_residual(ode, vf, lambda)?;
    let residual = normalize(&raw)?;
    let verdict = symbolic_verdict(&residual);
    let numeric = sample_residual(&raw, domain, cfg)?;
    Ok(CheckReport::decide(
        verdict,
        residual.to_string(),
        numeric,
        tol,
    ))
}

/// Spacings `h0, h0/2, ...`.
pub fn halving(h0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|i| h0 / f64::powi(2.0, i as i32)).collect()
}

pub const RATIO_BAND: (f64, f64) = (1.6, 2.4);
/// Errors at or below this count as an exact limit.
pub const EXACT_LIMIT: f64 = 1e-12;
/// Minimum ratio of the χ consistency error between halvings (order > 1).
const CONSISTENCY_RATIO: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    /// `E(h_i) / E(h_{i+1})`; `None` when both are exact.
    pub ratios: Vec<Option<f64>>,
    /// `max |χ - e^{hλ}|` per level, when `χ` was given.
    pub consistency: Option<Vec<f64>>,
    pub consistent: bool,
    pub exact: bool,
    pub monotone: bool,
    pub pass: bool,
    pub diagnostics: Vec<String>,
    pub samples: usize,
    pub seed: u64,
}

/// u1-coefficient of the two-point discrete λ-prolongation at spacing `h`,
/// with `u[1] = u + h u1` and weight `e^{hλ(x,u,u1)}`.
pub fn discrete_u1_coefficient(vf: &ContinuousVectorField, lambda: &ContinuousLambda) -> Expr {
    let h = Expr::h();
    let u1 = Expr::sym(Symbol::jet(1));
    let forward = |e: &Expr| {
        e.substitute_all(&[
            (cx(), Expr::sym(cx()) + h.clone()),
            (
                Symbol::jet(0),
                Expr::sym(Symbol::jet(0)) + h.clone() * u1.clone(),
            ),
        ])
    };
    let weight = (h.clone() * lambda.lambda.clone()).exp();
    let dphi = (weight.clone() * forward(&vf.phi) - vf.phi.clone()) / h.clone();
    let dxi = (weight * forward(&vf.xi) - vf.xi.clone()) / h;
    dphi - dxi * u1
}

/// `(D_x + λ)φ - u1 (D_x + λ)ξ`.
pub fn continuous_u1_coefficient(
    vf: &ContinuousVectorField,
    lambda: &ContinuousLambda,
) -> Result<Expr> {
    Ok(continuous_lambda_prolong(vf, lambda, 1)?.remove(0))
}

/// χ in lattice variables rewritten on the jet: `u[0] → u`, `x[0] → x`.
fn chi_on_jet(chi: &ChiMultiplier) -> Expr {
    chi.chi().substitute_all(&[
        (Symbol::Lattice(LatticeVar::U, 0), Expr::sym(Symbol::jet(0))),
        (Symbol::Lattice(LatticeVar::X, 0), Expr::sym(cx())),
    ])
}

/// First-order convergence of the discrete u1-coefficient to the
/// continuous one over the halving sequence `h_list`, sampled on `domain`
/// (which must cover `x`, `u`, `u1`).
pub fn continuum_limit_check(
    vf: &ContinuousVectorField,
    chi: Option<&ChiMultiplier>,
    lambda: &ContinuousLambda,
    h_list: &[f64],
    domain: &SampleBox,
    cfg: &SampleConfig,
) -> Result<LimitReport> {
    if h_list.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "the limit check needs at least 3 spacings, got {}",
            h_list.len()
        )));
    }
    if h_list.iter().any(|h| !(h.is_finite() && *h > 0.0))
        || h_list
            .windows(2)
            .any(|w| (w[1] - w[0] / 2.0).abs() > 1e-12 * w[0])
    {
        return Err(Error::InvalidArgument(
            "spacings must be positive and halve at each level".into(),
        ));
    }
    let discrete = discrete_u1_coefficient(vf, lambda);
    let continuous = continuous_u1_coefficient(vf, lambda)?;
    let diff = discrete - continuous;
    let mismatch = chi.map(|c| chi_on_jet(c) - (Expr::h() * lambda.lambda.clone()).exp());
    let mut errors = Vec::new();
    let mut consistency = Vec::new();
    let mut samples = 0;
    for &h in h_list {
        let mut level = domain.clone();
        level.base.set(Symbol::param("h"), h);
        let stats = sample_residual(&diff, &level, cfg)?;
        samples = stats.samples;
        errors.push(stats.max_abs);
        if let Some(m) = &mismatch {
            consistency.push(sample_residual(m, &level, cfg)?.max_abs);
        }
    }
    let mut diagnostics = Vec::new();
    let consistent = match &mismatch {
        None => true,
        Some(_) => {
            let ok = consistency
                .windows(2)
                .all(|w| w[0] <= EXACT_LIMIT || w[0] / w[1] >= CONSISTENCY_RATIO);
            if !ok {
                diagnostics.push(format!(
                    "χ differs from e^(hλ) beyond O(h^2): {consistency:?}"
                ));
            }
            ok
        }
    };
    let exact = errors.iter().all(|e| *e <= EXACT_LIMIT);
    let ratios: Vec<Option<f64>> = errors
        .windows(2)
        .map(|w| (w[0].max(w[1]) > EXACT_LIMIT).then(|| w[0] / w[1].max(f64::MIN_POSITIVE)))
        .collect();
    let monotone = errors
        .windows(2)
        .all(|w| w[1] <= w[0] || w[0].max(w[1]) <= EXACT_LIMIT);
    if !monotone {
        diagnostics.push(format!("errors do not decrease with h: {errors:?}"));
    }
    let mut in_band = true;
    for (i, r) in ratios.iter().enumerate() {
        if let Some(r) = r {
            if !(RATIO_BAND.0..=RATIO_BAND.1).contains(r) {
                in_band = false;
                diagnostics.push(format!(
                    "ratio {r:.4} between h = {} and h = {} is outside [{}, {}]",
                    h_list[i],
                    h_list[i + 1],
                    RATIO_BAND.0,
                    RATIO_BAND.1
                ));
            }
        }
    }
    Ok(LimitReport {
        h: h_list.to_vec(),
        errors,
        ratios,
        consistency: mismatch.map(|_| consistency),
        consistent,
        exact,
        monotone,
        pass: consistent && monotone && (exact || in_band),
        diagnostics,
        samples,
        seed: cfg.seed,
    })
}

/// Value of `e` on the jet at `(x, u, u1)` with `h`.
pub fn evaluate_on_jet(e: &Expr, x: f64, u: f64, u1: f64, h: f64) -> Result<f64> {
    let b = Binding::new()
        .with(cx(), x)
        .with(Symbol::jet(0), u)
        .with(Symbol::jet(1), u1)
        .with(Symbol::param("h"), h);
    Ok(evaluate(e, &b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn p(t: &str) -> Expr {
        parse(t).unwrap()
    }

    fn same(a: &Expr, b: &str) -> bool {
        normalize(&(a.clone() - p(b))).unwrap().is_zero()
    }

    fn field(xi: &str, phi: &str) -> ContinuousVectorField {
        ContinuousVectorField::new(p(xi), p(phi)).unwrap()
    }

    fn lam(t: &str) -> ContinuousLambda {
        ContinuousLambda::new(p(t)).unwrap()
    }

    #[test]
    fn total_derivative_on_jets() {
        assert!(same(
            &total_derivative(&p("x*u^2 + u1")),
            "u^2 + 2*x*u*u1 + u2"
        ));
        assert!(same(&total_derivative(&p("exp(u)")), "exp(u)*u1"));
        assert!(same(&total_derivative(&p("g(x)")), "g'(x)"));
    }

    #[test]
    fn validation() {
        assert!(ContinuousVectorField::new(p("u1"), p("1")).is_err());
        assert!(ContinuousLambda::new(p("u2")).is_err());
        assert!(ContinuousLambda::new(p("u[0]")).is_err());
        assert!(OdeSystem::new(2, p("u2")).is_err());
        assert!(OdeSystem::new(2, p("x*u1 + h")).is_ok());
    }

    #[test]
    fn prolongation_examples() {
        let c = continuous_lambda_prolong(&field("0", "1"), &lam("c"), 2).unwrap();
        assert!(same(&c[0], "c") && same(&c[1], "c^2"));
        let fu = "(x + x^2)*exp(u)";
        let c = continuous_lambda_prolong(&field("0", "1"), &lam(fu), 2).unwrap();
        assert!(same(&c[0], fu));
        assert!(same(
            &c[1],
            &format!("({fu})^2 + u1*{fu} + (1 + 2*x)*exp(u)")
        ));
    }

    #[test]
    fn zero_lambda_is_the_classical_prolongation() {
        let vf = field("x*u", "u^2 + x");
        let c = continuous_lambda_prolong(&vf, &ContinuousLambda::zero(), 2).unwrap();
        // φ1 = Dφ - u1 Dξ, φ2 = Dφ1 - u2 Dξ
        assert!(same(&c[0], "1 + 2*u*u1 - u1*(u + x*u1)"));
        let dxi = "(u + x*u1)";
        let expected2 = normalize(&(total_derivative(&c[0]) - p(&format!("u2*{dxi}")))).unwrap();
        assert_eq!(c[1], expected2);
    }

    #[test]
    fn free_particle_translation() {
        let ode = OdeSystem::new(2, Expr::zero()).unwrap();
        let r = check_ode_lambda_symmetry(
            &ode,
            &field("1", "0"),
            &ContinuousLambda::zero(),
            &jet_domain(2),
            1e-12,
            &SampleConfig::default(),
        )
        .unwrap();
        assert!(r.pass);
        let bad = check_ode_lambda_symmetry(
            &ode,
            &field("0", "u^2"),
            &ContinuousLambda::zero(),
            &jet_domain(2),
            1e-12,
            &SampleConfig::default(),
        )
        .unwrap();
        assert!(!bad.pass);
    }

    #[test]
    fn limit_of_example_two_data_is_first_order() {
        let chi = ChiMultiplier::new(p("1 + h*u[0]")).unwrap();
        let r = continuum_limit_check(
            &field("0", "1"),
            Some(&chi),
            &lam("u"),
            &halving(0.1, 4),
            &jet_domain(2),
            &SampleConfig::default(),
        )
        .unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.consistent && !r.exact);
        // E(h) = max (e^{hu} - 1 - hu)/h over u in [0, 1], close to h/2.
        assert!((r.errors[0] - (0.1f64.exp() - 1.1) / 0.1).abs() < 1e-2 * r.errors[0]);
    }

    #[test]
    fn limit_with_nonzero_xi() {
        let r = continuum_limit_check(
            &field("x", "u"),
            None,
            &lam("u1"),
            &halving(0.1, 4),
            &jet_domain(2),
            &SampleConfig::default(),
        )
        .unwrap();
        assert!(r.pass, "{r:?}");
        // Leading term h u1^2 (u - x u1) / 2 at a fixed point.
        let d = discrete_u1_coefficient(&field("x", "u"), &lam("u1"))
            - continuous_u1_coefficient(&field("x", "u"), &lam("u1")).unwrap();
        let (x, u, u1, h) = (0.3, 0.8, 0.6, 1e-4);
        let e = evaluate_on_jet(&d, x, u, u1, h).unwrap();
        assert!((e / (h * u1 * u1 * (u - x * u1) / 2.0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn zero_lambda_limit_is_exact() {
        let r = continuum_limit_check(
            &field("0", "1"),
            Some(&ChiMultiplier::identity()),
            &ContinuousLambda::zero(),
            &halving(0.1, 4),
            &jet_domain(2),
            &SampleConfig::default(),
        )
        .unwrap();
        assert!(r.pass && r.exact);
        assert!(r.errors.iter().all(|e| *e <= EXACT_LIMIT));
        assert!(r.ratios.iter().all(Option::is_none));
    }

    #[test]
    fn limit_rejects_bad_inputs() {
        let vf = field("0", "1");
        let cfg = SampleConfig::default();
        assert!(continuum_limit_check(
            &vf,
            None,
            &lam("u"),
            &halving(0.1, 2),
            &jet_domain(2),
            &cfg
        )
        .is_err());
        assert!(continuum_limit_check(
            &vf,
            None,
            &lam("u"),
            &[0.1, 0.03, 0.01],
            &jet_domain(2),
            &cfg
        )
        .is_err());
        let inconsistent = ChiMultiplier::new(p("1 + 2*h*u[0]")).unwrap();
        let r = continuum_limit_check(
            &vf,
            Some(&inconsistent),
            &lam("u"),
            &halving(0.1, 4),
            &jet_domain(2),
            &cfg,
        )
        .unwrap();
        assert!(!r.consistent && !r.pass);
    }
}
