//! Pseudo-random sampling of expressions over a box of symbol values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, evaluate_with_magnitude, Binding, Expr, Symbol};
use crate::error::ExprError;
use crate::par;

pub const DEFAULT_SEED: u64 = 0x5eed_1a3b_da7a;
pub const DEFAULT_SAMPLES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub samples: usize,
    pub seed: u64,
    /// Rejected points (domain errors) tolerated before giving up.
    pub max_rejections: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            max_rejections: 20 * DEFAULT_SAMPLES,
        }
    }
}

impl SampleConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self.max_rejections = 20 * samples.max(1);
        self
    }
}

/// Interval per sampled symbol, on top of a base binding for fixed values
/// (parameters, function evaluators).
#[derive(Clone, Debug, Default)]
pub struct SampleBox {
    pub ranges: Vec<(Symbol, f64, f64)>,
    pub base: Binding,
}

impl SampleBox {
    pub fn new(base: Binding) -> Self {
        SampleBox {
            ranges: Vec::new(),
            base,
        }
    }

    pub fn range(mut self, s: Symbol, lo: f64, hi: f64) -> Self {
        self.set_range(s, lo, hi);
        self
    }

    pub fn set_range(&mut self, s: Symbol, lo: f64, hi: f64) {
        self.ranges.retain(|(t, _, _)| *t != s);
        self.ranges.push((s, lo, hi));
    }

    pub fn fix(mut self, s: Symbol, v: f64) -> Self {
        self.ranges.retain(|(t, _, _)| *t != s);
        self.base.set(s, v);
        self
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Binding {
        let mut b = self.base.clone();
        for (s, lo, hi) in &self.ranges {
            let v = if hi > lo {
                rng.gen_range(*lo..*hi)
            } else {
                *lo
            };
            b.set(s.clone(), v);
        }
        b
    }

    /// Evaluate `f` at `cfg.samples` accepted points. Points where `f` fails
    /// with a domain error are rejected and redrawn; any other error aborts.
    pub fn collect<T, F>(&self, cfg: &SampleConfig, f: F) -> Result<(Vec<T>, usize), ExprError>
    where
        T: Send,
        F: Fn(&Binding) -> Result<T, ExprError> + Sync + Send,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut accepted = Vec::with_capacity(cfg.samples);
        let mut rejected = 0usize;
        while accepted.len() < cfg.samples {
            let want = cfg.samples - accepted.len();
            let points: Vec<Binding> = (0..want).map(|_| self.draw(&mut rng)).collect();
            for r in par::map(points, |b| f(&b)) {
                match r {
                    Ok(v) => accepted.push(v),
                    Err(ExprError::Domain { .. }) => rejected += 1,
                    Err(e) => return Err(e),
                }
            }
            if rejected > cfg.max_rejections {
                return Err(ExprError::SamplingExhausted {
                    accepted: accepted.len(),
                    wanted: cfg.samples,
                    rejected,
                });
            }
        }
        Ok((accepted, rejected))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub max_abs: f64,
    pub mean_abs: f64,
    /// max of |r| / (1 + rounding scale of r)
    pub max_scaled: f64,
    pub samples: usize,
    pub rejected: usize,
    pub seed: u64,
}

impl SampleStats {
    pub fn empty(seed: u64) -> Self {
        SampleStats {
            max_abs: 0.0,
            mean_abs: 0.0,
            max_scaled: 0.0,
            samples: 0,
            rejected: 0,
            seed,
        }
    }
}

/// Residual statistics of `e` over the box.
pub fn sample_residual(
    e: &Expr,
    domain: &SampleBox,
    cfg: &SampleConfig,
) -> Result<SampleStats, ExprError> {
    let (values, rejected) = domain.collect(cfg, |b| evaluate_with_magnitude(e, b))?;
    let mut stats = SampleStats::empty(cfg.seed);
    stats.samples = values.len();
    stats.rejected = rejected;
    let mut total = 0.0;
    for (v, m) in values {
        stats.max_abs = stats.max_abs.max(v.abs());
        stats.max_scaled = stats.max_scaled.max(v.abs() / (1.0 + m));
        total += v.abs();
    }
    if stats.samples > 0 {
        stats.mean_abs = total / stats.samples as f64;
    }
    Ok(stats)
}

/// Numeric identity test: `|e1 - e2| <= tol * (1 + |e1|)` at every sample.
pub fn equivalent(
    e1: &Expr,
    e2: &Expr,
    domain: &SampleBox,
    tol: f64,
    cfg: &SampleConfig,
) -> Result<bool, ExprError> {
    let (pairs, _) = domain.collect(cfg, |b| Ok((evaluate(e1, b)?, evaluate(e2, b)?)))?;
    Ok(pairs
        .iter()
        .all(|(a, b)| (a - b).abs() <= tol * (1.0 + a.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Builtin};
    use std::sync::Arc;

    fn unit_box() -> SampleBox {
        SampleBox::new(Binding::new().with(Symbol::param("h"), 0.1))
            .range(Symbol::u(0), 0.0, 1.0)
            .range(Symbol::u(1), 0.0, 1.0)
    }

    #[test]
    fn exponential_of_lambda_matches_chi() {
        let lam = parse("log(1+h*u[0])/h").unwrap();
        let lhs = (Expr::h() * lam).exp();
        let rhs = parse("1+h*u[0]").unwrap();
        assert!(equivalent(&lhs, &rhs, &unit_box(), 1e-12, &SampleConfig::default()).unwrap());
    }

    #[test]
    fn distinct_variables_are_not_equivalent() {
        let cfg = SampleConfig::default();
        assert!(!equivalent(&Expr::u(0), &Expr::u(1), &unit_box(), 1e-10, &cfg).unwrap());
    }

    #[test]
    fn rejects_singular_points_and_reports_exhaustion() {
        let b = SampleBox::new(Binding::new()).range(Symbol::u(0), -1.0, 1.0);
        let e = parse("log(u[0])").unwrap();
        let stats = sample_residual(&e, &b, &SampleConfig::default()).unwrap();
        assert_eq!(stats.samples, DEFAULT_SAMPLES);
        assert!(stats.rejected > 0);

        let never = SampleBox::new(Binding::new()).range(Symbol::u(0), -2.0, -1.0);
        assert!(matches!(
            sample_residual(&e, &never, &SampleConfig::default()),
            Err(ExprError::SamplingExhausted { .. })
        ));
    }

    #[test]
    fn unbound_symbol_is_not_a_rejection() {
        let e = parse("u[0] + q").unwrap();
        assert_eq!(
            sample_residual(&e, &unit_box(), &SampleConfig::default()),
            Err(ExprError::Unbound("q".into()))
        );
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let e = parse("u[0]*u[1] - 0.3").unwrap();
        let cfg = SampleConfig::default().with_seed(7);
        let a = sample_residual(&e, &unit_box(), &cfg).unwrap();
        let b = sample_residual(&e, &unit_box(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn function_symbols_sample_through_evaluators() {
        let mut b = unit_box();
        b.base.set_function("f", Arc::new(Builtin::Exp));
        let e = parse("f'[0](u[0]) - f[0](u[0])").unwrap();
        let stats = sample_residual(&e, &b, &SampleConfig::default()).unwrap();
        assert_eq!(stats.max_abs, 0.0);
    }
}
