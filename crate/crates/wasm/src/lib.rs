//! JSON-returning wrappers around liftchroma for the static demo page in `www/`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use liftchroma::asymptotics::{sscm_series, walk_count_cj};
use liftchroma::coloring::{chromatic_bounds, Budget};
use liftchroma::lift::{count_cycles, expand, sample_lift};
use liftchroma::thresholds::{classify, ell_threshold, u_threshold};
use liftchroma::BaseGraph;

/// Node budget for the in-browser colouring search.
const DEMO_BUDGET: Budget = Budget(2_000_000);
const MAX_DEMO_VERTICES: usize = 5_000;

fn graph(spec: &str) -> Result<BaseGraph, JsError> {
    match spec.trim() {
        s if s.eq_ignore_ascii_case("petersen") => Ok(BaseGraph::petersen()),
        s => {
            let m = s.trim_start_matches(['K', 'k']).parse::<usize>().map_err(|_| JsError::new("graph must be Km or petersen"))?;
            BaseGraph::complete(m).map_err(|e| JsError::new(&e.to_string()))
        }
    }
}

fn render(v: Value) -> String {
    v.to_string()
}

fn js<E: std::fmt::Display>(e: E) -> JsError {
    JsError::new(&e.to_string())
}

/// u_k and l_k for k = 3..=k_max.
#[wasm_bindgen]
pub fn thresholds_json(k_max: usize) -> Result<String, JsError> {
    let rows = (3..=k_max.max(3))
        .map(|k| Ok(json!({ "k": k, "u_k": u_threshold(k).map_err(js)?, "l_k": ell_threshold(k).map_err(js)? })))
        .collect::<Result<Vec<_>, JsError>>()?;
    Ok(render(Value::Array(rows)))
}

#[wasm_bindgen]
pub fn classify_json(d: usize) -> Result<String, JsError> {
    let c = classify(d).map_err(js)?;
    Ok(render(json!({ "d": c.d, "k": c.k, "kind": c.kind, "bounds": c.bounds, "values": c.values() })))
}

/// Samples an n-lift, brackets its chromatic number and counts short cycles.
#[wasm_bindgen]
pub fn sample_lift_json(graph_spec: &str, n: usize, seed: u64) -> Result<String, JsError> {
    let g = graph(graph_spec)?;
    if n == 0 || n * g.num_vertices() > MAX_DEMO_VERTICES {
        return Err(JsError::new(&format!("need 1 <= n and n|V| <= {MAX_DEMO_VERTICES}")));
    }
    let lift = sample_lift(&g, n, seed).map_err(js)?;
    let lg = expand(&lift);
    let bounds = chromatic_bounds(&lg, DEMO_BUDGET);
    let cycles = (3..=5).map(|j| count_cycles(&lg, j).map_err(js)).collect::<Result<Vec<_>, _>>()?;
    let window = classify(g.degree()).ok().map(|c| c.values());
    Ok(render(json!({
        "vertices": lg.num_vertices(),
        "edges": lg.num_edges(),
        "chromatic_lower": bounds.lower,
        "chromatic_upper": bounds.upper,
        "predicted_window": window,
        "cycles": { "3": cycles[0], "4": cycles[1], "5": cycles[2] },
    })))
}

/// log(C2/C1^2) against the partial sums of the cycle series.
#[wasm_bindgen]
pub fn sscm_json(graph_spec: &str, k: usize) -> Result<String, JsError> {
    let g = graph(graph_spec)?;
    let check = sscm_series(&g, k, 1e-10).map_err(js)?;
    let walks = (1..=6).map(|j| walk_count_cj(&g, j).map_err(js)).collect::<Result<Vec<_>, _>>()?;
    Ok(render(json!({
        "lhs": check.lhs,
        "partial": check.partial,
        "closed_form": check.closed_form,
        "gap": check.gap,
        "terms": check.terms,
        "walk_counts": walks,
    })))
}
