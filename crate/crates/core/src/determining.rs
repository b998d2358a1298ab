//! Determining equations of λ-symmetries and the η̃ compatibility equation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{
    differentiate, evaluate, normalize, sample_residual, shift, Binding, Expr, SampleBox,
    SampleConfig, SampleStats, Symbol,
};
use crate::lambda_prolong::{
    apply_field_raw, lambda_prolong_on, ChiMultiplier, DiscreteVectorField, XConvention,
};
use crate::scheme::{Lattice, Scheme, Trajectory};

/// On-shell determining residual: the prolonged field applied to the
/// equation, with `u[b]` replaced by the solved form.
#[derive(Clone, Debug, PartialEq)]
pub struct DeterminingExpression {
    pub scheme: String,
    pub xi: Expr,
    pub phi: Expr,
    pub chi: Expr,
    /// Before normalization; used for sampling.
    pub raw: Expr,
    pub residual: Expr,
}

fn solved_form(s: &Scheme) -> Result<Expr> {
    match s.solved() {
        Some(g) => Ok(g.clone()),
        None => s.clone().solve_for_leading(),
    }
}

pub fn determining_expression(
    s: &Scheme,
    vf: &DiscreteVectorField,
    chi: &ChiMultiplier,
) -> Result<DeterminingExpression> {
    determining_expression_with(s, vf, chi, XConvention::Weighted)
}

pub fn determining_expression_with(
    s: &Scheme,
    vf: &DiscreteVectorField,
    chi: &ChiMultiplier,
    convention: XConvention,
) -> Result<DeterminingExpression> {
    let g = solved_form(s)?;
    let field = lambda_prolong_on(vf, chi, s.a, s.b, &s.lattice, convention)?;
    let applied = apply_field_raw(&field, &s.equation)?;
    let raw = s.lattice.localize(&applied.substitute(&s.leading(), &g));
    let residual = normalize(&raw)?;
    Ok(DeterminingExpression {
        scheme: s.name.clone(),
        xi: vf.xi.clone(),
        phi: vf.phi.clone(),
        chi: chi.chi().clone(),
        raw,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolicVerdict {
    /// The residual normalizes to 0.
    Zero,
    /// Nonzero rational function without opaque atoms: not a symmetry.
    NonZero,
    /// Nonzero but contains exp/log/function atoms; sampling decides.
    Undecided,
}

pub fn symbolic_verdict(residual: &Expr) -> SymbolicVerdict {
    if residual.is_zero() {
        return SymbolicVerdict::Zero;
    }
    let mut opaque = false;
    residual.visit(&mut |e| {
        if matches!(e, Expr::Func(..) | Expr::Exp(_) | Expr::Log(_)) {
            opaque = true;
        }
    });
    if opaque {
        SymbolicVerdict::Undecided
    } else {
        SymbolicVerdict::NonZero
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub verdict: SymbolicVerdict,
    pub residual: String,
    pub numeric: SampleStats,
    pub tol: f64,
    pub pass: bool,
}

impl CheckReport {
    pub fn decide(
        verdict: SymbolicVerdict,
        residual: String,
        numeric: SampleStats,
        tol: f64,
    ) -> Self {
        let pass = verdict != SymbolicVerdict::NonZero && numeric.max_abs <= tol;
        CheckReport {
            verdict,
            residual,
            numeric,
            tol,
            pass,
        }
    }
}

/// Window values `u[-a..b-1]` and `x[0]` in `[0, 1]` with `h` and the
/// scheme's function evaluators fixed. On explicit points the `x[k]` are
/// the first lattice points.
pub fn default_domain(s: &Scheme, h: f64) -> SampleBox {
    let mut domain = SampleBox::new(s.binding(h));
    for k in -(s.a as i32)..s.b as i32 {
        domain.set_range(Symbol::u(k), 0.0, 1.0);
    }
    match &s.lattice {
        Lattice::Uniform { .. } => domain.set_range(Symbol::x(0), 0.0, 1.0),
        Lattice::Points(p) => {
            for k in -(s.a as i32)..=s.b as i32 {
                if let Some(v) = p.get((k + s.a as i32) as usize) {
                    domain.base.set(Symbol::x(k), *v);
                }
            }
        }
    }
    domain
}

/// Symbolic verdict plus sampled residual; passes when the residual is not
/// a provably nonzero rational function and every sample is within `tol`.
pub fn check_symmetry(
    s: &Scheme,
    vf: &DiscreteVectorField,
    chi: &ChiMultiplier,
    domain: &SampleBox,
    tol: f64,
    cfg: &SampleConfig,
) -> Result<CheckReport> {
    let det = determining_expression(s, vf, chi)?;
    let verdict = symbolic_verdict(&det.residual);
    let numeric = sample_residual(&det.raw, domain, cfg)?;
    Ok(CheckReport::decide(
        verdict,
        det.residual.to_string(),
        numeric,
        tol,
    ))
}

fn step_of(lattice: &Lattice) -> Expr {
    lattice.step(0)
}

/// `e^{sλ}(η[1] - ξ[1]λ) - (η - ξλ) + s(ξ ∂x[0]λ + φ ∂u[0]λ)` with
/// `s = x[1] - x[0]`.
pub fn eta_residual(vf: &DiscreteVectorField, lambda: &Expr, lattice: &Lattice) -> Result<Expr> {
    let eta = vf
        .eta
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("vector field has no eta component".into()))?;
    let s = step_of(lattice);
    let weight = (s.clone() * lambda.clone()).exp();
    let next = shift(eta, 1)? - shift(&vf.xi, 1)? * lambda.clone();
    let here = eta.clone() - vf.xi.clone() * lambda.clone();
    let transport = vf.xi.clone() * differentiate(lambda, &Symbol::x(0))
        + vf.phi.clone() * differentiate(lambda, &Symbol::u(0));
    Ok(weight * next - here + s * transport)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaPropagation {
    pub values: Vec<f64>,
    /// Largest `|eta_residual|` along the trajectory.
    pub max_residual: f64,
}

fn bind_pair(b: &mut Binding, t: &Trajectory, n: usize) {
    b.set(Symbol::u(0), t.values[n]);
    b.set(Symbol::u(1), t.values[n + 1]);
    b.set(Symbol::x(0), t.x[n]);
    b.set(Symbol::x(1), t.x[n + 1]);
}

/// Solve the η̃ equation forward along `t` from `η[0] = eta0`.
pub fn eta_propagate(
    eta0: f64,
    vf: &DiscreteVectorField,
    lambda: &Expr,
    t: &Trajectory,
    lattice: &Lattice,
    bind: &Binding,
) -> Result<EtaPropagation> {
    let s = lattice.localize(&step_of(lattice));
    let lambda = lattice.localize(lambda);
    let xi = lattice.localize(&vf.xi);
    let phi = lattice.localize(&vf.phi);
    let xi1 = shift(&xi, 1)?;
    let d_x = differentiate(&lambda, &Symbol::x(0));
    let d_u = differentiate(&lambda, &Symbol::u(0));
    let mut b = bind.clone();
    let mut values = vec![eta0];
    for n in 0..t.len().saturating_sub(1) {
        bind_pair(&mut b, t, n);
        let step = evaluate(&s, &b)?;
        let l = evaluate(&lambda, &b)?;
        let weight = (step * l).exp();
        if weight == 0.0 || !weight.is_finite() {
            return Err(Error::VanishingWeight(n));
        }
        let (xi0, phi0) = (evaluate(&xi, &b)?, evaluate(&phi, &b)?);
        let transport = xi0 * evaluate(&d_x, &b)? + phi0 * evaluate(&d_u, &b)?;
        let here = values[n] - xi0 * l;
        values.push(evaluate(&xi1, &b)? * l + (here - step * transport) / weight);
    }

    let placeholder = DiscreteVectorField {
        eta: Some(Expr::func("eta", Some(0), 0, Expr::u(0))),
        ..vf.clone()
    };
    let residual = lattice.localize(&eta_residual(&placeholder, &lambda, lattice)?);
    let seq: Arc<Vec<f64>> = Arc::new(values.clone());
    let mut max_residual = 0.0f64;
    for n in 0..values.len().saturating_sub(1) {
        bind_pair(&mut b, t, n);
        let seq = Arc::clone(&seq);
        b.set_function(
            "eta",
            Arc::new(move |off: Option<i32>, _: u32, _: f64| {
                seq[(n as i64 + off.unwrap_or(0) as i64) as usize]
            }),
        );
        max_residual = max_residual.max(evaluate(&residual, &b)?.abs());
    }
    Ok(EtaPropagation {
        values,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::fixtures;
    use crate::lambda_prolong::lambda_prolong;

    fn p(t: &str) -> Expr {
        parse(t).unwrap()
    }

    fn unit_phi() -> DiscreteVectorField {
        DiscreteVectorField::vertical(Expr::one()).unwrap()
    }

    fn chi(t: &str) -> ChiMultiplier {
        ChiMultiplier::new(p(t)).unwrap()
    }

    #[test]
    fn example_two_linear_multiplier_is_exact() {
        let s = fixtures::scheme("ex2").unwrap();
        let det = determining_expression(&s, &unit_phi(), &chi("1+h*u[0]")).unwrap();
        assert!(det.residual.is_zero(), "{}", det.residual);
        assert!(!det.raw.contains(&Symbol::u(1)));
        let none = determining_expression(&s, &unit_phi(), &ChiMultiplier::identity()).unwrap();
        assert_eq!(symbolic_verdict(&none.residual), SymbolicVerdict::NonZero);
    }

    #[test]
    fn determining_equation_reproduces_the_printed_form() {
        // chi[n] + 1/chi[n-1] - 2 = h(1 + h/2 u[-1]) u[-1]
        //   + h(u - 2v + h v (u - 3v/2) - h^2 v^3 / 2) / chi[n-1],  v = u[-1]
        let s = fixtures::scheme("ex2").unwrap();
        let c = ChiMultiplier::new(p("a + b*u[0] + c*u[0]^2")).unwrap();
        let det = determining_expression(&s, &unit_phi(), &c).unwrap();
        let cm = "(a + b*u[-1] + c*u[-1]^2)";
        let printed = p(&format!(
            "(a + b*u[0] + c*u[0]^2) + 1/{cm} - 2 - (1 + h/2*u[-1])*h*u[-1] \
             - h*(u[0] - 2*u[-1] + h*u[-1]*(u[0] - 3/2*u[-1]) - h^2/2*u[-1]^3)/{cm}"
        ));
        let ratio = normalize(&(det.residual.clone() * Expr::h().pow(2) - printed)).unwrap();
        assert!(ratio.is_zero(), "{ratio}");
    }

    #[test]
    fn translation_of_the_trivial_scheme() {
        let s = fixtures::scheme("trivial").unwrap();
        let det = determining_expression(&s, &unit_phi(), &ChiMultiplier::identity()).unwrap();
        assert!(det.residual.is_zero());
    }

    #[test]
    fn identity_multiplier_matches_the_unweighted_prolongation() {
        let s = fixtures::scheme("ex2").unwrap();
        let vf = DiscreteVectorField::vertical(p("u[0]^2 + 1")).unwrap();
        let det = determining_expression(&s, &vf, &ChiMultiplier::identity()).unwrap();
        let mut classical = Expr::zero();
        for k in -1..=1 {
            classical =
                classical + shift(&vf.phi, k).unwrap() * differentiate(&s.equation, &Symbol::u(k));
        }
        let classical = classical.substitute(&Symbol::u(1), s.solved().unwrap());
        assert!(normalize(&(det.residual - classical)).unwrap().is_zero());
        let f = lambda_prolong(&vf, &ChiMultiplier::identity(), 1, 1).unwrap();
        assert!(normalize(f.u_coeff(1).unwrap()).unwrap() == normalize(&p("u[1]^2+1")).unwrap());
    }

    #[test]
    fn checks_of_example_one_and_negative_controls() {
        let cfg = SampleConfig::default();
        for name in fixtures::EX1_VARIANTS {
            let s = fixtures::scheme(name).unwrap();
            let r = check_symmetry(
                &s,
                &unit_phi(),
                &chi("1+h*f'[0](u[0])"),
                &default_domain(&s, 0.1),
                1e-10,
                &cfg,
            )
            .unwrap();
            assert!(r.pass, "{name}: {r:?}");
            assert!(r.numeric.max_abs <= 1e-10);
        }
        let s = fixtures::scheme("ex2").unwrap();
        let dom = default_domain(&s, 0.1);
        let good = check_symmetry(&s, &unit_phi(), &chi("1+h*u[0]"), &dom, 1e-10, &cfg).unwrap();
        assert!(good.pass);
        assert_eq!(good.verdict, SymbolicVerdict::Zero);
        for bad in ["1", "1+2*h*u[0]"] {
            let r = check_symmetry(&s, &unit_phi(), &chi(bad), &dom, 1e-10, &cfg).unwrap();
            assert!(!r.pass);
            assert!(r.numeric.max_abs >= 1e-4, "{bad}: {}", r.numeric.max_abs);
        }
    }

    #[test]
    fn exponential_multiplier_is_undecided_but_passes() {
        let s = fixtures::scheme("ex2").unwrap();
        let c = ChiMultiplier::from_lambda(p("log(1+h*u[0])/h")).unwrap();
        let r = check_symmetry(
            &s,
            &unit_phi(),
            &c,
            &default_domain(&s, 0.1),
            1e-10,
            &SampleConfig::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, SymbolicVerdict::Undecided);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn eta_residual_special_cases() {
        let l = Lattice::uniform();
        let lam = p("u[0]^2 + x[0]");
        let c = DiscreteVectorField::vertical(Expr::zero())
            .unwrap()
            .with_eta(p("c"));
        let r = eta_residual(&c, &lam, &l).unwrap();
        let expected = ((Expr::h() * lam.clone()).exp() - Expr::one()) * p("c");
        assert!(normalize(&(r - expected)).unwrap().is_zero());

        let eta = Expr::func("g", Some(0), 0, Expr::u(0));
        let vf = unit_phi().with_eta(eta.clone());
        let r = eta_residual(&vf, &lam, &l).unwrap();
        let expected = (Expr::h() * lam.clone()).exp() * shift(&eta, 1).unwrap() - eta.clone()
            + Expr::h() * p("2*u[0]");
        assert!(normalize(&(r - expected)).unwrap().is_zero());

        let vf = DiscreteVectorField::vertical(Expr::zero())
            .unwrap()
            .with_eta(eta.clone());
        let r = eta_residual(&vf, &Expr::zero(), &l).unwrap();
        assert!(normalize(&(r - (shift(&eta, 1).unwrap() - eta)))
            .unwrap()
            .is_zero());
        assert!(eta_residual(&unit_phi(), &lam, &l).is_err());
    }

    #[test]
    fn eta_propagation() {
        let mut s = fixtures::scheme("ex2").unwrap();
        s.solve_for_leading().unwrap();
        let b = s.binding(0.1);
        let t = s.iterate_trajectory(&[0.5, 0.6], 20, &b).unwrap();

        let zero = DiscreteVectorField::vertical(Expr::zero()).unwrap();
        let r = eta_propagate(0.0, &zero, &Expr::zero(), &t, &s.lattice, &b).unwrap();
        assert!(r.values.iter().all(|v| *v == 0.0));

        let r = eta_propagate(0.0, &unit_phi(), &p("log(1+h*u[0])/h"), &t, &s.lattice, &b).unwrap();
        assert_eq!(r.values.len(), t.len());
        assert!(r.max_residual <= 1e-12, "{}", r.max_residual);

        let c = 0.7;
        let r = eta_propagate(1.3, &unit_phi(), &p("7/10"), &t, &s.lattice, &b).unwrap();
        for (n, v) in r.values.iter().enumerate() {
            let exact = 1.3 * (-(n as f64) * 0.1 * c).exp();
            assert!((v - exact).abs() <= 1e-12, "{n}: {v} vs {exact}");
        }
        assert!(r.max_residual <= 1e-12);
    }
}
