//! λ-prolongation of discrete vector fields.
//!
//! With `w[n+1] - w[n] = (x[n+1] - x[n]) λ[n]`, the prolonged coefficients
//! carry the factors `W(k) = exp(w[n+k] - w[n])`. On a uniform lattice these
//! are products of the multiplier `χ = exp(h λ)` and its shifts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{differentiate, normalize, shift, Expr, LatticeVar, Symbol};
use crate::scheme::Lattice;

/// Infinitesimal generator `ξ ∂x + φ ∂u` with the exponential factor
/// stripped, plus an optional `η` for the potential direction.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteVectorField {
    pub xi: Expr,
    pub phi: Expr,
    pub eta: Option<Expr>,
}

fn only_base_point(e: &Expr, what: &str) -> Result<()> {
    if e.stencil().iter().any(|k| *k != 0) {
        return Err(Error::InvalidArgument(format!(
            "{what} may depend on x[0], u[0] only: {e}"
        )));
    }
    Ok(())
}

impl DiscreteVectorField {
    pub fn new(xi: Expr, phi: Expr) -> Result<Self> {
        only_base_point(&xi, "xi")?;
        only_base_point(&phi, "phi")?;
        Ok(DiscreteVectorField { xi, phi, eta: None })
    }

    /// `φ ∂u` with `ξ = 0`.
    pub fn vertical(phi: Expr) -> Result<Self> {
        DiscreteVectorField::new(Expr::zero(), phi)
    }

    pub fn with_eta(mut self, eta: Expr) -> Self {
        self.eta = Some(eta);
        self
    }
}

/// The multiplier `χ = exp(h λ)`, stored as `χ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiMultiplier {
    chi: Expr,
    lambda: Option<Expr>,
}

impl ChiMultiplier {
    pub fn new(chi: Expr) -> Result<Self> {
        only_base_point(&chi, "chi")?;
        if normalize(&chi)?.is_zero() {
            return Err(Error::InvalidArgument("chi is identically zero".into()));
        }
        Ok(ChiMultiplier { chi, lambda: None })
    }

    /// `χ = exp(h λ)`.
    pub fn from_lambda(lambda: Expr) -> Result<Self> {
        only_base_point(&lambda, "lambda")?;
        Ok(ChiMultiplier {
            chi: (Expr::h() * lambda.clone()).exp(),
            lambda: Some(lambda),
        })
    }

    /// `χ = 1`, the standard prolongation.
    pub fn identity() -> Self {
        ChiMultiplier {
            chi: Expr::one(),
            lambda: Some(Expr::zero()),
        }
    }

    pub fn chi(&self) -> &Expr {
        &self.chi
    }

    /// `λ`, given or recovered as `log(χ)/h`.
    pub fn lambda(&self) -> Expr {
        match &self.lambda {
            Some(l) => l.clone(),
            None if self.chi.is_one() => Expr::zero(),
            None => self.chi.clone().log() / Expr::h(),
        }
    }
}

/// `W(k) = exp(w[n+k] - w[n])`.
pub fn potential_weight(chi: &ChiMultiplier, k: i32, lattice: &Lattice) -> Result<Expr> {
    let factor = |i: i32| -> Result<Expr> {
        match lattice {
            Lattice::Uniform { .. } => Ok(shift(chi.chi(), i)?),
            Lattice::Points(_) => Ok((lattice.step(i) * shift(&chi.lambda(), i)?).exp()),
        }
    };
    let mut w = Expr::one();
    if k > 0 {
        for i in 0..k {
            w = w * factor(i)?;
        }
    } else {
        for i in 0..-k {
            w = w / factor(-i - 1)?;
        }
    }
    Ok(w)
}

/// How the `∂x` part of the prolongation is weighted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum XConvention {
    /// `W(k) shift(ξ, k) ∂x[k]`, the same weights as the `∂u` part.
    #[default]
    Weighted,
    /// `ξ ∂x[k]` at every offset, unweighted and unshifted.
    AsPrinted,
}

/// Coefficients of `∂x[k]` and `∂u[k]` for `k` in `[lower, upper]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProlongedField {
    pub lower: i32,
    pub upper: i32,
    pub coeffs: BTreeMap<i32, (Expr, Expr)>,
}

impl ProlongedField {
    pub fn x_coeff(&self, k: i32) -> Option<&Expr> {
        self.coeffs.get(&k).map(|c| &c.0)
    }

    pub fn u_coeff(&self, k: i32) -> Option<&Expr> {
        self.coeffs.get(&k).map(|c| &c.1)
    }
}

/// λ-prolongation on a uniform lattice with the default x-part convention.
pub fn lambda_prolong(
    vf: &DiscreteVectorField,
    chi: &ChiMultiplier,
    a: u32,
    b: u32,
) -> Result<ProlongedField> {
    lambda_prolong_on(vf, chi, a, b, &Lattice::uniform(), XConvention::Weighted)
}

pub fn lambda_prolong_on(
    vf: &DiscreteVectorField,
    chi: &ChiMultiplier,
    a: u32,
    b: u32,
    lattice: &Lattice,
    convention: XConvention,
) -> Result<ProlongedField> {
    let (lower, upper) = (-(a as i32), b as i32);
    let mut coeffs = BTreeMap::new();
    for k in lower..=upper {
        let pair = if k == 0 {
            (vf.xi.clone(), vf.phi.clone())
        } else {
            let w = potential_weight(chi, k, lattice)?;
            let x = match convention {
                XConvention::Weighted => w.clone() * shift(&vf.xi, k)?,
                XConvention::AsPrinted => vf.xi.clone(),
            };
            (x, w * shift(&vf.phi, k)?)
        };
        coeffs.insert(k, pair);
    }
    Ok(ProlongedField {
        lower,
        upper,
        coeffs,
    })
}

/// `Σ_k [X_k ∂e/∂x[k] + U_k ∂e/∂u[k]]`, unnormalized.
pub fn apply_field_raw(p: &ProlongedField, e: &Expr) -> Result<Expr> {
    if let Some(&k) = e.stencil().iter().find(|k| **k < p.lower || **k > p.upper) {
        return Err(Error::StencilOverflow {
            offset: k,
            lower: p.lower,
            upper: p.upper,
        });
    }
    let mut out = Expr::zero();
    for s in e.free_symbols() {
        let Symbol::Lattice(var, k) = s else { continue };
        let (xc, uc) = &p.coeffs[&k];
        let c = match var {
            LatticeVar::X => xc,
            LatticeVar::U => uc,
        };
        if c.is_zero() {
            continue;
        }
        out = out + c.clone() * differentiate(e, &s);
    }
    Ok(out)
}

/// [`apply_field_raw`] followed by normalization.
pub fn apply_field(p: &ProlongedField, e: &Expr) -> Result<Expr> {
    Ok(normalize(&apply_field_raw(p, e)?)?)
}
