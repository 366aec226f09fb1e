//! wasm-bindgen entry points for `www/index.html`.
//!
//! Each export returns a JSON string; the `*_json` functions behind them are
//! plain Rust so they can be tested natively.

use localworlds::audit::locality_audit;
use localworlds::correlations::CorrelationSpec;
use localworlds::hv_search::{enumerate_divergent_worlds, enumerate_single_world, many_worlds_witness};
use localworlds::spacetime::{rest_frame_cascade, Event, WorldLine};
use localworlds::worlds::{ghz_scenario, run_scenario, EventKind, EventSpec, Scenario, SystemSpec};
use localworlds::Setting;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_COPIES: usize = 20_000;

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

/// Branching cascade between an object at rest at x = 0 and one leaving
/// x = 1 with velocity `v`.
pub fn cascade_json(v: f64, depth: usize) -> Result<Value, String> {
    let l1 = WorldLine::new(0.0, 0.0).map_err(|e| e.to_string())?;
    let l2 = WorldLine::new(1.0, v).map_err(|e| e.to_string())?;
    let c = rest_frame_cascade(l1, l2, &Event::new("E1", 0.0, 0.0), depth.clamp(1, 64), -1e6).map_err(|e| e.to_string())?;
    Ok(json!({ "cascade": c, "text": c.to_string() }))
}

/// Splits `n` copies of a qubit with `p(+1) = p_up` by measuring it along z.
pub fn born_json(p_up: f64, n: usize) -> Result<Value, String> {
    if !(0.0..=1.0).contains(&p_up) {
        return Err("probability must lie in [0, 1]".into());
    }
    if n == 0 || n > MAX_COPIES {
        return Err(format!("copies must be between 1 and {MAX_COPIES}"));
    }
    let scenario = Scenario {
        name: "born".into(),
        n,
        seed: 0,
        systems: vec![SystemSpec::at_rest("q", 0.0), SystemSpec::at_rest("A", 0.0)],
        events: vec![
            EventSpec {
                id: "S".into(),
                t: 0.0,
                x: 0.0,
                kind: EventKind::Source {
                    participants: vec!["q".into()],
                    state: None,
                    amplitudes: Some(vec![[p_up.sqrt(), 0.0], [(1.0 - p_up).sqrt(), 0.0]]),
                },
            },
            EventSpec::measurement("M", 1.0, 0.0, "A", "q", Setting::Z),
        ],
    };
    let run = run_scenario(&scenario).map_err(|e| e.to_string())?;
    let m = &run.stats.measurements[0];
    Ok(json!({ "up": m.up, "down": m.down, "quota_up": n as f64 * p_up }))
}

/// Runs the three-party scenario with a settings word such as `"YYX"` and
/// audits the trace.
pub fn ghz_json(settings: &str, n: usize) -> Result<Value, String> {
    let word = Setting::parse_word(settings)?;
    let settings: [Setting; 3] = word.try_into().map_err(|_| "give exactly three settings".to_string())?;
    if n == 0 || n > MAX_COPIES {
        return Err(format!("copies must be between 1 and {MAX_COPIES}"));
    }
    let scenario = ghz_scenario(settings, n);
    let run = run_scenario(&scenario).map_err(|e| e.to_string())?;
    let audit = locality_audit(&run.trace, &scenario).map_err(|e| e.to_string())?;
    Ok(json!({
        "statistics": run.stats.to_string(),
        "summary": run.stats.summary_lines(),
        "audit_pass": audit.pass,
        "audit": audit.to_string(),
    }))
}

/// Hidden-variable search over the GHZ constraints.
pub fn search_json(mode: &str) -> Result<Value, String> {
    let spec = CorrelationSpec::ghz();
    let report = match mode {
        "single-world" => enumerate_single_world(&spec),
        "divergent" => enumerate_divergent_worlds(&spec, 4),
        "multivalued" => many_worlds_witness(&spec),
        other => return Err(format!("unknown mode {other}")),
    }
    .map_err(|e| e.to_string())?;
    Ok(json!({ "satisfiable": report.satisfiable, "text": report.to_string() }))
}

#[wasm_bindgen]
pub fn cascade(v: f64, depth: usize) -> Result<String, JsValue> {
    to_js(cascade_json(v, depth))
}

#[wasm_bindgen]
pub fn born(p_up: f64, n: usize) -> Result<String, JsValue> {
    to_js(born_json(p_up, n))
}

#[wasm_bindgen]
pub fn ghz(settings: &str, n: usize) -> Result<String, JsValue> {
    to_js(ghz_json(settings, n))
}

#[wasm_bindgen]
pub fn search(mode: &str) -> Result<String, JsValue> {
    to_js(search_json(mode))
}
