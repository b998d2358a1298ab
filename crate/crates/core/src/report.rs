//! Versioned run reports shared by the command-line tool and the browser
//! demo.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::ansatz_solver::{FindResult, SolveMethod};
use crate::continuum::LimitReport;
use crate::determining::CheckReport;
use crate::reduction::{ReductionMethod, VerificationReport, VerificationStatus};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub phi: Option<String>,
    pub chi: Option<String>,
    pub lambda: Option<String>,
    pub h: Option<f64>,
    pub tol: Option<f64>,
    pub samples: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedCheck {
    pub name: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitEntry {
    pub phi: String,
    pub chi: String,
    pub lambda: String,
    pub coefficients: BTreeMap<String, String>,
    pub method: SolveMethod,
    pub report: CheckReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FindSection {
    pub degree: usize,
    pub with_phi: bool,
    pub equations: usize,
    pub sampled: bool,
    pub hits: Vec<HitEntry>,
    /// Set when the search came back empty.
    pub none_found: Option<String>,
}

impl From<&FindResult> for FindSection {
    fn from(r: &FindResult) -> Self {
        let hits: Vec<HitEntry> = r
            .hits
            .iter()
            .map(|h| HitEntry {
                phi: h.phi.to_string(),
                chi: h.chi.to_string(),
                lambda: h.lambda.to_string(),
                coefficients: h
                    .coefficients
                    .iter()
                    .map(|(k, v)| (k.clone(), v.to_string()))
                    .collect(),
                method: h.method,
                report: h.report.clone(),
            })
            .collect();
        FindSection {
            degree: r.degree,
            with_phi: false,
            equations: r.equations,
            sampled: r.sampled,
            none_found: hits
                .is_empty()
                .then(|| format!("none found up to degree {}", r.degree)),
            hits,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionSection {
    pub invariant: String,
    pub antiderivative: String,
    pub reduced_map: Option<String>,
    pub method: Option<ReductionMethod>,
    pub verification: Option<VerificationReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub scheme: Option<String>,
    pub inputs: Inputs,
    pub checks: Vec<NamedCheck>,
    pub symmetry: Option<CheckReport>,
    pub find: Option<FindSection>,
    pub reduction: Option<ReductionSection>,
    pub limit: Option<LimitReport>,
    pub pass: bool,
    pub wall_clock_ms: f64,
}

impl RunReport {
    pub fn new(command: &str, scheme: Option<&str>, inputs: Inputs) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            scheme: scheme.map(str::to_string),
            inputs,
            checks: Vec::new(),
            symmetry: None,
            find: None,
            reduction: None,
            limit: None,
            pass: true,
            wall_clock_ms: 0.0,
        }
    }

    /// Record a sub-verdict; the report passes only if every check does.
    pub fn check(&mut self, name: &str, pass: bool) {
        self.checks.push(NamedCheck {
            name: name.to_string(),
            pass,
        });
        self.pass = self.checks.iter().all(|c| c.pass);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {}{}",
            self.command,
            if self.pass { "PASS" } else { "FAIL" },
            self.scheme
                .as_ref()
                .map(|s| format!(" [{s}]"))
                .unwrap_or_default()
        );
        for (label, v) in [
            ("phi", &self.inputs.phi),
            ("chi", &self.inputs.chi),
            ("lambda", &self.inputs.lambda),
        ] {
            if let Some(v) = v {
                let _ = writeln!(out, "  {label:<8}{v}");
            }
        }
        if let Some(s) = &self.symmetry {
            write_check(&mut out, "  ", s);
        }
        if let Some(f) = &self.find {
            match &f.none_found {
                Some(msg) => {
                    let _ = writeln!(out, "  {msg}");
                }
                None => {
                    for (i, h) in f.hits.iter().enumerate() {
                        let _ = writeln!(out, "  hit {}: phi = {}, chi = {}", i + 1, h.phi, h.chi);
                        let _ = writeln!(out, "         lambda = {}", h.lambda);
                        write_check(&mut out, "         ", &h.report);
                    }
                }
            }
        }
        if let Some(r) = &self.reduction {
            let _ = writeln!(out, "  v       {}", r.invariant);
            if let Some(m) = &r.reduced_map {
                let _ = writeln!(out, "  R(v)    {m}");
            }
            if let Some(e) = &r.error {
                let _ = writeln!(out, "  {e}");
            }
            if let Some(v) = &r.verification {
                let status = match v.status {
                    VerificationStatus::Pass => "pass",
                    VerificationStatus::Fail => "fail",
                    VerificationStatus::Inconclusive => "inconclusive",
                };
                let _ = writeln!(
                    out,
                    "  verification {status}: {} trials ({} divergent), {} pairs, max dev {:.3e} (scaled {:.3e}), conservation {:.3e} (scaled {:.3e})",
                    v.trials, v.divergent, v.pairs, v.max_abs_dev, v.max_scaled_dev, v.conservation_abs, v.conservation_scaled
                );
            }
        }
        if let Some(l) = &self.limit {
            for (i, (h, e)) in l.h.iter().zip(&l.errors).enumerate() {
                let ratio = match l.ratios.get(i).copied().flatten() {
                    Some(r) => format!("  ratio {r:.4}"),
                    None => String::new(),
                };
                let _ = writeln!(out, "  h = {h:<10} E = {e:.6e}{ratio}");
            }
            for d in &l.diagnostics {
                let _ = writeln!(out, "  {d}");
            }
        }
        for c in &self.checks {
            let _ = writeln!(out, "  [{}] {}", if c.pass { "ok" } else { "FAIL" }, c.name);
        }
        out
    }
}

fn write_check(out: &mut String, indent: &str, c: &CheckReport) {
    let _ = writeln!(
        out,
        "{indent}verdict {:?}, max residual {:.3e} over {} samples (seed {}), tol {:.1e}",
        c.verdict, c.numeric.max_abs, c.numeric.samples, c.numeric.seed, c.tol
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::determining::SymbolicVerdict;
    use crate::expr::SampleStats;

    #[test]
    fn json_round_trip() {
        let mut r = RunReport::new(
            "check",
            Some("ex2"),
            Inputs {
                chi: Some("1 + h*u[0]".into()),
                seed: 7,
                ..Inputs::default()
            },
        );
        r.symmetry = Some(CheckReport::decide(
            SymbolicVerdict::Zero,
            "0".into(),
            SampleStats::empty(7),
            1e-10,
        ));
        r.check("symmetry", true);
        r.wall_clock_ms = 0.1 + 0.2;
        r.symmetry.as_mut().unwrap().numeric.max_abs = 1.0290980061727611e-16;
        let back = RunReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_json().contains("\"schema_version\": 1"));
        assert!(r.to_text().starts_with("check PASS [ex2]"));
    }

    #[test]
    fn any_failed_check_fails_the_report() {
        let mut r = RunReport::new("find", None, Inputs::default());
        r.check("a", true);
        r.check("b", false);
        r.check("c", true);
        assert!(!r.pass);
    }
}
