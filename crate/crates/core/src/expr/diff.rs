use super::{Expr, Symbol};

/// Exact partial derivative with respect to `v`.
///
/// Function symbols differentiate to their derivative symbols through the
/// chain rule: `d/du[0] f[0](u[0]) = f'[0](u[0])`.
pub fn differentiate(e: &Expr, v: &Symbol) -> Expr {
    if !e.contains(v) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Sym(s) => {
            if s == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Func(r, arg) => {
            let mut next = r.clone();
            next.order += 1;
            Expr::Func(next, arg.clone()) * differentiate(arg, v)
        }
        Expr::Neg(a) => -differentiate(a, v),
        Expr::Exp(a) => e.clone() * differentiate(a, v),
        Expr::Log(a) => differentiate(a, v) / (**a).clone(),
        Expr::Add(a, b) => differentiate(a, v) + differentiate(b, v),
        Expr::Sub(a, b) => differentiate(a, v) - differentiate(b, v),
        Expr::Mul(a, b) => {
            differentiate(a, v) * (**b).clone() + (**a).clone() * differentiate(b, v)
        }
        Expr::Div(a, b) => {
            let da = differentiate(a, v);
            let db = differentiate(b, v);
            if db.is_zero() {
                return da / (**b).clone();
            }
            (da * (**b).clone() - (**a).clone() * db) / (**b).clone().pow(2)
        }
        Expr::Pow(a, n) => {
            Expr::int(i64::from(*n)) * (**a).clone().pow(n - 1) * differentiate(a, v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{normalize, parse};

    fn d(text: &str, v: Symbol) -> Expr {
        differentiate(&parse(text).unwrap(), &v)
    }

    fn same(a: &Expr, b: &str) {
        assert_eq!(
            normalize(a).unwrap(),
            normalize(&parse(b).unwrap()).unwrap(),
            "{a} vs {b}"
        );
    }

    #[test]
    fn power_rule_prints_compactly() {
        assert_eq!(d("u[0]^2", Symbol::u(0)).to_string(), "2*u[0]");
    }

    #[test]
    fn function_symbol_chain_rule() {
        assert_eq!(d("f[0](u[0])", Symbol::u(0)), parse("f'[0](u[0])").unwrap());
        same(&d("f[1](u[1]^2)", Symbol::u(1)), "2*u[1]*f'[1](u[1]^2)");
        assert!(d("f[0](u[0])", Symbol::u(1)).is_zero());
    }

    #[test]
    fn affine_twice_is_zero() {
        let once = d("a+b*u[0]", Symbol::u(0));
        let twice = differentiate(&once, &Symbol::u(0));
        assert!(normalize(&twice).unwrap().is_zero());
    }

    #[test]
    fn quotient_exp_log() {
        same(&d("1/(1+h*u[0])", Symbol::u(0)), "-h/(1+h*u[0])^2");
        same(&d("log(1+h*u[0])/h", Symbol::u(0)), "1/(1+h*u[0])");
        let e = d("exp(h*u[0])", Symbol::u(0));
        same(&e, "h*exp(h*u[0])");
    }

    #[test]
    fn continuous_variables() {
        same(&d("(x+x^2)*exp(u)", Symbol::cont("u")), "(x+x^2)*exp(u)");
        same(&d("(x+x^2)*exp(u)", Symbol::cont("x")), "(1+2*x)*exp(u)");
    }
}
