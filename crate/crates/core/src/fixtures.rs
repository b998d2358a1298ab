//! Built-in fixture corpus.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::continuum::{jet_domain, ContinuousLambda, ContinuousVectorField, OdeSystem};
use crate::error::{Error, Result};
use crate::expr::{Expr, SampleBox, Symbol};
use crate::scheme::Scheme;
use crate::scheme_file::parse_scheme;

/// Scheme files shipped with the crate, by name.
pub const SCHEME_FILES: &[(&str, &str)] = &[
    ("ex1-exp", include_str!("../fixtures/ex1-exp.scheme")),
    ("ex1-cubic", include_str!("../fixtures/ex1-cubic.scheme")),
    ("ex1-sin", include_str!("../fixtures/ex1-sin.scheme")),
    ("ex2", include_str!("../fixtures/ex2.scheme")),
    ("trivial", include_str!("../fixtures/trivial.scheme")),
    ("free", include_str!("../fixtures/free.scheme")),
];

/// The `f` variants of the first-derivative family.
pub const EX1_VARIANTS: &[&str] = &["ex1-exp", "ex1-cubic", "ex1-sin"];

pub fn scheme_text(name: &str) -> Option<&'static str> {
    SCHEME_FILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
}

/// Parsed fixture scheme with its solved form installed.
pub fn scheme(name: &str) -> Result<Scheme> {
    let text = scheme_text(name)
        .ok_or_else(|| Error::InvalidArgument(format!("no fixture named `{name}`")))?;
    parse_scheme(text)
}

/// An ODE with a known λ-symmetry and a sampling box avoiding its
/// singularities.
#[derive(Clone, Debug)]
pub struct ContinuousFixture {
    pub name: String,
    pub ode: OdeSystem,
    pub field: ContinuousVectorField,
    pub lambda: ContinuousLambda,
    pub domain: SampleBox,
}

fn jet(k: usize) -> Expr {
    Expr::sym(Symbol::jet(k))
}

fn cx() -> Expr {
    Expr::cont("x")
}

/// `u2 = D_x F` with `F = (x + x^2) e^u`, `ξ = 0`, `φ = 1`, `λ = F_u`.
pub fn conservation_law_ode() -> ContinuousFixture {
    let f = (cx() + cx().pow(2)) * jet(0).exp();
    let rhs = (Expr::one() + Expr::int(2) * cx()) * jet(0).exp() + f.clone() * jet(1);
    ContinuousFixture {
        name: "o1".into(),
        ode: OdeSystem::new(2, rhs).expect("valid ODE"),
        field: ContinuousVectorField::new(Expr::zero(), Expr::one()).expect("valid field"),
        lambda: ContinuousLambda::new(f).expect("valid λ"),
        domain: jet_domain(2),
    }
}

/// `u2 = u1^2/u + g p u^p u1 + g' u^(p+1)` for the polynomial
/// `g = Σ g[i] x^i`, with `ξ = 0`, `φ = 1`, `λ = (u1 + g p u^(p+1))/u`.
/// Sampled with `u` in `[0.5, 1.5]`.
pub fn power_law_ode(p: i32, g: &[BigRational]) -> ContinuousFixture {
    let mut gx = Expr::zero();
    let mut dg = Expr::zero();
    for (i, c) in g.iter().enumerate() {
        gx = gx + Expr::Const(c.clone()) * cx().pow(i as i32);
        if i > 0 {
            dg = dg + Expr::Const(c * BigInt::from(i)) * cx().pow(i as i32 - 1);
        }
    }
    let u = jet(0);
    let rhs = jet(1).pow(2) / u.clone()
        + gx.clone() * Expr::int(p.into()) * u.clone().pow(p) * jet(1)
        + dg * u.clone().pow(p + 1);
    let lambda = (jet(1) + gx * Expr::int(p.into()) * u.clone().pow(p + 1)) / u;
    let mut domain = jet_domain(2);
    domain.set_range(Symbol::jet(0), 0.5, 1.5);
    ContinuousFixture {
        name: format!("o3-p{p}"),
        ode: OdeSystem::new(2, rhs).expect("valid ODE"),
        field: ContinuousVectorField::new(Expr::zero(), Expr::one()).expect("valid field"),
        lambda: ContinuousLambda::new(lambda).expect("valid λ"),
        domain,
    }
}

/// Cubic coefficients `k/d` with `k` in `-5..=5` and `d` in `1..=4`, leading
/// coefficient nonzero.
pub fn random_cubic(seed: u64) -> Vec<BigRational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<BigRational> = (0..4)
        .map(|_| {
            BigRational::new(
                BigInt::from(rng.gen_range(-5..=5)),
                BigInt::from(rng.gen_range(1..=4)),
            )
        })
        .collect();
    if out[3] == BigRational::from_integer(BigInt::from(0)) {
        out[3] = BigRational::from_integer(BigInt::from(1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::check_ode_lambda_symmetry;
    use crate::determining::SymbolicVerdict;
    use crate::expr::SampleConfig;

    #[test]
    fn every_fixture_parses_and_solves() {
        for (name, _) in SCHEME_FILES {
            let s = scheme(name).unwrap();
            assert_eq!(&s.name, name);
            assert!(s.solved().is_some());
        }
        assert!(scheme("missing").is_err());
    }

    #[test]
    fn continuous_fixtures_have_their_lambda_symmetries() {
        let cfg = SampleConfig::default();
        let o1 = conservation_law_ode();
        let r = check_ode_lambda_symmetry(&o1.ode, &o1.field, &o1.lambda, &o1.domain, 1e-10, &cfg)
            .unwrap();
        assert!(r.pass && r.verdict == SymbolicVerdict::Zero, "{r:?}");
        for seed in 0..3 {
            let g = random_cubic(seed);
            assert!(!g[3].numer().eq(&BigInt::from(0)));
            let o3 = power_law_ode(2, &g);
            let r =
                check_ode_lambda_symmetry(&o3.ode, &o3.field, &o3.lambda, &o3.domain, 1e-10, &cfg)
                    .unwrap();
            assert!(r.pass, "{r:?}");
        }
        assert_ne!(random_cubic(0), random_cubic(1));
    }
}
