//! Report-producing front ends for `check`, `find`, `reduce`, `limit` and
//! `evolve`, shared by the command-line tool and the browser demo.
//!
//! Errors returned here are usage or input errors. Mathematical failures
//! (a symmetry that does not hold, a map that does not reduce) come back as
//! reports with `pass == false`. Wall-clock time is left to the caller.

use crate::ansatz_solver::{find_lambda_symmetry, FindOptions, SolveOptions};
use crate::continuum::{
    continuum_limit_check, halving, jet_domain, ContinuousLambda, ContinuousVectorField,
};
use crate::determining::{check_symmetry, default_domain};
use crate::error::{Error, Result};
use crate::expr::sample::{DEFAULT_SAMPLES, DEFAULT_SEED};
use crate::expr::{parse, Expr, SampleConfig};
use crate::lambda_prolong::{ChiMultiplier, DiscreteVectorField};
use crate::reduction::{
    invariant, invariant_along, reduce_order, verify_reduction, ReduceOptions, VerificationStatus,
};
use crate::report::{FindSection, Inputs, ReductionSection, RunReport};
use crate::scheme::Scheme;

/// Parse a command-line expression, naming the flag it came from.
pub fn parse_flag(flag: &str, text: &str) -> Result<Expr> {
    parse(text).map_err(|e| Error::InvalidArgument(format!("{flag}: {e}")))
}

fn sample_config(samples: usize, seed: u64) -> SampleConfig {
    SampleConfig::default()
        .with_samples(samples)
        .with_seed(seed)
}

/// `χ` from exactly one of `--chi` and `--lambda`.
pub fn multiplier(chi: Option<&str>, lambda: Option<&str>) -> Result<ChiMultiplier> {
    match (chi, lambda) {
        (Some(c), None) => ChiMultiplier::new(parse_flag("--chi", c)?),
        (None, Some(l)) => ChiMultiplier::from_lambda(parse_flag("--lambda", l)?),
        _ => Err(Error::InvalidArgument(
            "give exactly one of --chi and --lambda".into(),
        )),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckArgs {
    pub xi: String,
    pub phi: String,
    pub chi: Option<String>,
    pub lambda: Option<String>,
    pub h: f64,
    pub tol: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for CheckArgs {
    fn default() -> Self {
        CheckArgs {
            xi: "0".into(),
            phi: "1".into(),
            chi: None,
            lambda: None,
            h: 0.1,
            tol: 1e-10,
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
        }
    }
}

pub fn check(s: &Scheme, args: &CheckArgs) -> Result<RunReport> {
    let chi = multiplier(args.chi.as_deref(), args.lambda.as_deref())?;
    let phi = parse_flag("--phi", &args.phi)?;
    let vf = DiscreteVectorField::new(parse_flag("--xi", &args.xi)?, phi.clone())?;
    let cfg = sample_config(args.samples, args.seed);
    let r = check_symmetry(s, &vf, &chi, &default_domain(s, args.h), args.tol, &cfg)?;
    let mut report = RunReport::new(
        "check",
        Some(&s.name),
        Inputs {
            phi: Some(phi.to_string()),
            chi: Some(chi.chi().to_string()),
            lambda: Some(chi.lambda().to_string()),
            h: Some(args.h),
            tol: Some(args.tol),
            samples: Some(args.samples),
            seed: args.seed,
        },
    );
    report.check("symmetry", r.pass);
    report.symmetry = Some(r);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FindArgs {
    pub degree: usize,
    pub with_phi: bool,
    pub phi_degree: usize,
    pub h: f64,
    pub tol: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for FindArgs {
    fn default() -> Self {
        FindArgs {
            degree: 1,
            with_phi: false,
            phi_degree: 0,
            h: 0.1,
            tol: 1e-10,
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
        }
    }
}

/// An empty result is a passing run; its section says so explicitly.
pub fn find(s: &Scheme, args: &FindArgs) -> Result<RunReport> {
    let opts = FindOptions {
        with_phi: args.with_phi,
        phi_degree: args.phi_degree,
        h: args.h,
        tol: args.tol,
        sample: sample_config(args.samples, args.seed),
        solve: SolveOptions {
            h: args.h,
            seed: args.seed,
            ..SolveOptions::default()
        },
    };
    let r = find_lambda_symmetry(s, args.degree, &opts)?;
    let mut report = RunReport::new(
        "find",
        Some(&s.name),
        Inputs {
            h: Some(args.h),
            tol: Some(args.tol),
            samples: Some(args.samples),
            seed: args.seed,
            ..Inputs::default()
        },
    );
    for (i, hit) in r.hits.iter().enumerate() {
        report.check(&format!("hit {} verified", i + 1), hit.report.pass);
    }
    let mut section = FindSection::from(&r);
    section.with_phi = args.with_phi;
    report.find = Some(section);
    report.check("search", true);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReduceArgs {
    pub chi: Option<String>,
    pub lambda: Option<String>,
    pub h: f64,
    pub trials: usize,
    pub steps: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for ReduceArgs {
    fn default() -> Self {
        let d = ReduceOptions::default();
        ReduceArgs {
            chi: None,
            lambda: None,
            h: d.h,
            trials: d.trials,
            steps: d.steps,
            tol: d.tol,
            seed: d.seed,
        }
    }
}

pub fn reduce(s: &Scheme, args: &ReduceArgs) -> Result<RunReport> {
    let chi = multiplier(args.chi.as_deref(), args.lambda.as_deref())?;
    let inv = invariant(&chi)?;
    let opts = ReduceOptions {
        h: args.h,
        trials: args.trials,
        steps: args.steps,
        tol: args.tol,
        seed: args.seed,
    };
    let mut report = RunReport::new(
        "reduce",
        Some(&s.name),
        Inputs {
            phi: Some("1".into()),
            chi: Some(chi.chi().to_string()),
            lambda: Some(chi.lambda().to_string()),
            h: Some(args.h),
            tol: Some(args.tol),
            samples: None,
            seed: args.seed,
        },
    );
    let mut section = ReductionSection {
        invariant: inv.v.to_string(),
        antiderivative: inv.p.to_string(),
        reduced_map: None,
        method: None,
        verification: None,
        error: None,
    };
    match reduce_order(s, &inv, &opts) {
        Ok(m) => {
            let v = verify_reduction(s, &inv, &m.r, args.trials, args.steps, args.tol, &opts)?;
            report.check("reduction", true);
            report.check("verification", v.status == VerificationStatus::Pass);
            section.reduced_map = Some(m.r.to_string());
            section.method = Some(m.method);
            section.verification = Some(v);
        }
        Err(e @ Error::NotReducible(_)) => {
            report.check("reduction", false);
            section.error = Some(e.to_string());
        }
        Err(e) => return Err(e),
    }
    report.reduction = Some(section);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitArgs {
    pub xi: String,
    pub phi: String,
    pub lambda: String,
    /// Discrete multiplier compared against `e^{hλ}`.
    pub chi: Option<String>,
    pub h_start: f64,
    pub levels: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for LimitArgs {
    fn default() -> Self {
        LimitArgs {
            xi: "0".into(),
            phi: "1".into(),
            lambda: "u".into(),
            chi: None,
            h_start: 0.1,
            levels: 4,
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
        }
    }
}

pub fn limit(args: &LimitArgs) -> Result<RunReport> {
    let vf = ContinuousVectorField::new(
        parse_flag("--xi", &args.xi)?,
        parse_flag("--phi", &args.phi)?,
    )?;
    let lambda = ContinuousLambda::new(parse_flag("--lambda", &args.lambda)?)?;
    let chi = args
        .chi
        .as_deref()
        .map(|c| ChiMultiplier::new(parse_flag("--chi", c)?))
        .transpose()?;
    let cfg = sample_config(args.samples, args.seed);
    let r = continuum_limit_check(
        &vf,
        chi.as_ref(),
        &lambda,
        &halving(args.h_start, args.levels),
        &jet_domain(2),
        &cfg,
    )?;
    let mut report = RunReport::new(
        "limit",
        None,
        Inputs {
            phi: Some(vf.phi.to_string()),
            chi: chi.as_ref().map(|c| c.chi().to_string()),
            lambda: Some(lambda.lambda.to_string()),
            h: Some(args.h_start),
            tol: None,
            samples: Some(args.samples),
            seed: args.seed,
        },
    );
    report.check("first-order convergence", r.pass);
    if r.consistency.is_some() {
        report.check("chi consistent with exp(h*lambda)", r.consistent);
    }
    report.limit = Some(r);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveRow {
    pub n: usize,
    pub u: f64,
    /// Invariant on the window starting at `n`, when a multiplier was given
    /// and the window is finite.
    pub v: Option<f64>,
}

/// Iterate `s` from `init` and pair each value with the invariant of `chi`.
pub fn evolve(
    s: &Scheme,
    init: &[f64],
    steps: usize,
    h: f64,
    chi: Option<&str>,
) -> Result<Vec<EvolveRow>> {
    let bind = s.binding(h);
    let t = s.iterate_trajectory(init, steps, &bind)?;
    let vs = match chi {
        Some(c) => invariant_along(
            &invariant(&ChiMultiplier::new(parse_flag("--chi", c)?)?)?,
            &t,
            &bind,
        ),
        None => Vec::new(),
    };
    Ok(t.values
        .iter()
        .enumerate()
        .map(|(n, &u)| EvolveRow {
            n,
            u,
            v: vs.get(n).map(|v| v.0),
        })
        .collect())
}
