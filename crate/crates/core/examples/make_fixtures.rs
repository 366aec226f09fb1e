//! Regenerates the locality-violating trace fixtures in `tests/fixtures`.
//!
//!     cargo run -p localworlds --example make_fixtures

use std::path::Path;

use localworlds::audit::mutations::{leak_outcome, leak_record};
use localworlds::worlds::{epr_scenario, ghz_scenario, run_scenario};
use localworlds::Setting::{X, Y, Z};

pub const FIXTURE_N: usize = 8;

/// (file name, trace text) for every shipped fixture.
pub fn fixtures() -> Vec<(&'static str, String)> {
    let epr = run_scenario(&epr_scenario(Z, Z, FIXTURE_N)).expect("epr runs").trace;
    let ghz = run_scenario(&ghz_scenario([Y, Y, X], FIXTURE_N)).expect("ghz runs").trace;
    vec![
        ("epr_leak_record.trace.jsonl", leak_record(&epr, "M_A", "M_B")),
        ("epr_leak_outcome.trace.jsonl", leak_outcome(&epr, "M_A", "A", "M_B")),
        ("ghz_leak_record.trace.jsonl", leak_record(&ghz, "M_A", "M_C")),
        ("ghz_leak_outcome.trace.jsonl", leak_outcome(&ghz, "M_B", "B", "M_C")),
    ]
    .into_iter()
    .map(|(name, t)| (name, t.expect("mutation applies").to_jsonl()))
    .collect()
}

#[allow(dead_code)]
fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::create_dir_all(&dir).expect("create fixture dir");
    for (name, text) in fixtures() {
        std::fs::write(dir.join(name), text).expect("write fixture");
        println!("wrote {name}");
    }
}
