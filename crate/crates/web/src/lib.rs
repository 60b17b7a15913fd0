//! Browser bindings for `qpoly`.
//!
//! Every export takes plain strings and returns a JSON document. Failures
//! come back as `{"error": "..."}` so the page never has to catch exceptions.

use qpoly::cli::{format_rational, parse_rational};
use qpoly::{minkowski_reduce, Budget, Coset, IntegralLattice, LocalOptions, QuadPoly, Result, TriangularForm};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest sieve bound the page may ask for.
pub const MAX_BOUND: u64 = 5000;
/// Largest bound for the regularity check, which is far costlier than the sieve.
pub const MAX_REGULAR_BOUND: u64 = 500;

fn budget() -> Budget {
    Budget { max_points: 2_000_000, max_sieve: MAX_BOUND }
}

fn respond(result: Result<Value>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn int_list(text: &str) -> Result<Vec<i128>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| qpoly::Error::InvalidArgument(format!("bad integer `{s}`"))))
        .collect()
}

/// Represented values, truant and regularity of `Σ αᵢ xᵢ(xᵢ+1)/2`.
#[wasm_bindgen]
pub fn triangular(coeffs: &str, bound: u32) -> String {
    respond(triangular_report(coeffs, bound as u64))
}

fn triangular_report(coeffs: &str, bound: u64) -> Result<Value> {
    let d = TriangularForm::new(int_list(coeffs)?)?;
    let bound = bound.clamp(1, MAX_BOUND);
    let budget = budget();
    let set = d.represented_set(bound, &budget)?;
    let missing: Vec<u64> = (0..=bound).filter(|&m| !set.contains(m)).collect();
    let regular_bound = bound.min(MAX_REGULAR_BOUND);
    let verdict = d.is_regular_up_to(regular_bound, &LocalOptions { max_exp: None, budget })?;
    Ok(json!({
        "form": d.to_string(),
        "bound": bound,
        "missing": missing,
        "represented": set.count(),
        "truant": set.first_missing(),
        "eight": d.theorem_of_eight(),
        "regular_bound": regular_bound,
        "regularity": verdict,
    }))
}

/// Canonical Minkowski-reduced representative of a ternary polynomial.
#[wasm_bindgen]
pub fn reduce(form: &str) -> String {
    respond(reduce_report(form))
}

fn reduce_report(form: &str) -> Result<Value> {
    let f: QuadPoly = form.parse()?;
    let r = minkowski_reduce(&f)?;
    let completion = f.complete_with(budget().max_points)?;
    Ok(json!({
        "form": f.to_string(),
        "reduced": r.reduced.to_string(),
        "minimum": format_rational(&completion.int_min),
        "transform": r.transform,
    }))
}

/// Whether the coset `L + v` contains a vector of norm `target`.
///
/// `gram` is the doubled Gram matrix as JSON and `shift` a comma separated list of rationals.
#[wasm_bindgen]
pub fn coset(gram: &str, shift: &str, target: &str) -> String {
    respond(coset_report(gram, shift, target))
}

fn coset_report(gram: &str, shift: &str, target: &str) -> Result<Value> {
    let gram: Vec<Vec<i128>> =
        serde_json::from_str(gram).map_err(|e| qpoly::Error::InvalidArgument(format!("bad gram matrix: {e}")))?;
    let shift = shift.split(',').map(parse_rational).collect::<Result<Vec<_>>>()?;
    let a = parse_rational(target)?;
    let c = Coset::new(IntegralLattice::new(gram)?, shift)?;
    let witness = c.represents_with(a, budget().max_points)?;
    Ok(json!({
        "target": format_rational(&a),
        "represented": witness.is_some(),
        "witness": witness,
        "norm": witness.as_ref().map(|w| format_rational(&c.value(w))),
    }))
}
