//! Browser bindings. Every operation takes strings and returns a JSON run
//! report; input errors surface as thrown JS errors.

use lambdasym::commands::{self, CheckArgs, FindArgs, ReduceArgs};
use lambdasym::fixtures;
use lambdasym::scheme::Scheme;
use lambdasym::scheme_file::parse_scheme;
use wasm_bindgen::prelude::*;

type Out = Result<String, String>;

/// A fixture name or the text of a scheme file.
fn load(scheme: &str) -> Result<Scheme, String> {
    match fixtures::scheme_text(scheme.trim()) {
        Some(_) => fixtures::scheme(scheme.trim()),
        None => parse_scheme(scheme),
    }
    .map_err(|e| e.to_string())
}

fn chi_or_lambda(text: &str) -> (Option<String>, Option<String>) {
    match text.trim().strip_prefix("lambda:") {
        Some(l) => (None, Some(l.trim().to_string())),
        None => (Some(text.trim().to_string()), None),
    }
}

pub fn check_json(scheme: &str, phi: &str, chi: &str, h: f64, seed: u64) -> Out {
    let (chi, lambda) = chi_or_lambda(chi);
    let args = CheckArgs {
        phi: phi.to_string(),
        chi,
        lambda,
        h,
        seed,
        ..CheckArgs::default()
    };
    commands::check(&load(scheme)?, &args)
        .map(|r| r.to_json())
        .map_err(|e| e.to_string())
}

pub fn find_json(scheme: &str, degree: usize, h: f64, seed: u64) -> Out {
    let args = FindArgs {
        degree,
        h,
        seed,
        ..FindArgs::default()
    };
    commands::find(&load(scheme)?, &args)
        .map(|r| r.to_json())
        .map_err(|e| e.to_string())
}

pub fn reduce_json(scheme: &str, chi: &str, h: f64, trials: usize, steps: usize, seed: u64) -> Out {
    let (chi, lambda) = chi_or_lambda(chi);
    let args = ReduceArgs {
        chi,
        lambda,
        h,
        trials,
        steps,
        seed,
        ..ReduceArgs::default()
    };
    commands::reduce(&load(scheme)?, &args)
        .map(|r| r.to_json())
        .map_err(|e| e.to_string())
}

fn thrown(r: Out) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// Names of the built-in schemes.
#[wasm_bindgen(js_name = fixtureNames)]
pub fn fixture_names() -> Vec<String> {
    fixtures::SCHEME_FILES
        .iter()
        .map(|(n, _)| n.to_string())
        .collect()
}

#[wasm_bindgen(js_name = fixtureText)]
pub fn fixture_text(name: &str) -> Option<String> {
    fixtures::scheme_text(name).map(str::to_string)
}

/// `chi` may be prefixed with `lambda:` to give λ instead.
#[wasm_bindgen]
pub fn check(scheme: &str, phi: &str, chi: &str, h: f64, seed: u64) -> Result<String, JsError> {
    thrown(check_json(scheme, phi, chi, h, seed))
}

#[wasm_bindgen]
pub fn find(scheme: &str, degree: usize, h: f64, seed: u64) -> Result<String, JsError> {
    thrown(find_json(scheme, degree, h, seed))
}

#[wasm_bindgen]
pub fn reduce(
    scheme: &str,
    chi: &str,
    h: f64,
    trials: usize,
    steps: usize,
    seed: u64,
) -> Result<String, JsError> {
    thrown(reduce_json(scheme, chi, h, trials, steps, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use lambdasym::report::RunReport;

    fn report(r: Out) -> RunReport {
        RunReport::from_json(&r.unwrap()).unwrap()
    }

    #[test]
    fn operations_round_trip_through_json() {
        assert!(report(check_json("ex2", "1", "1+h*u[0]", 0.1, 1)).pass);
        assert!(report(check_json("ex2", "1", "lambda: log(1+h*u[0])/h", 0.1, 1)).pass);
        assert!(!report(check_json("ex2", "1", "1", 0.1, 1)).pass);
        let f = report(find_json("ex2", 1, 0.1, 1)).find.unwrap();
        assert_eq!(f.hits.len(), 1);
        assert!(report(reduce_json("ex2", "1+h*u[0]", 0.1, 5, 50, 1)).pass);
    }

    #[test]
    fn scheme_text_is_accepted() {
        let text = fixture_text("trivial").unwrap();
        assert!(report(find_json(&text, 0, 0.1, 1)).pass);
        assert!(fixture_names().contains(&"ex2".to_string()));
    }

    #[test]
    fn input_errors_are_messages() {
        assert!(check_json("ex2", "1", "1+", 0.1, 1)
            .unwrap_err()
            .contains("column"));
        assert!(check_json("name = x\nequation = u[1] = \n", "1", "1", 0.1, 1).is_err());
    }
}
