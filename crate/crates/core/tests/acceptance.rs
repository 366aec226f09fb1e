//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the test
//! harness so the lines always print; exits nonzero if any criterion fails.
//!
//!     cargo test -p localworlds --test acceptance

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use localworlds::audit::{audit_trace, locality_audit, no_signaling_check};
use localworlds::correlations::{both_measured_state, chsh_value, epr_state, ghz_state, reduced_state_insufficiency, CorrelationSpec};
use localworlds::hilbert::{born_distribution, expectation, Observable, Outcome, StateVector};
use localworlds::hv_search::{
    chsh_classical_bound, derive_contradiction_trace, enumerate_divergent_worlds, enumerate_single_world, many_worlds_witness,
};
use localworlds::worlds::{run_scenario, EventKind, EventSpec, RunOutput, Scenario, TraceLog};
use localworlds::Setting::{X, Y, Z};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = fn() -> (bool, String);

struct Verdict {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn corpus(name: &str) -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Scenario::from_toml(&fs::read_to_string(path).unwrap()).unwrap()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn ghz_correlations() -> (bool, String) {
    let ((pass, detail), took) = timed(|| {
        let spec = CorrelationSpec::ghz().with_parties(vec!["a", "b", "c"]).unwrap();
        let psi = ghz_state();
        let mut parts = Vec::new();
        let mut pass = true;
        for con in &spec.constraints {
            let obs: Vec<Observable> = con.settings.iter().map(|s| s.observable()).collect();
            let pairs = [("a", &obs[0]), ("b", &obs[1]), ("c", &obs[2])];
            let e = expectation(&psi, &pairs).unwrap();
            let bad: f64 = born_distribution(&psi, &pairs)
                .unwrap()
                .iter()
                .filter(|(t, _)| Outcome::product(t.iter().copied()) != con.product)
                .map(|(_, p)| p)
                .sum();
            pass &= (e - f64::from(con.product)).abs() < 1e-10 && bad < 1e-12;
            parts.push(format!("{con}: E = {e:+.12}, violating support {bad:.1e}"));
        }
        (pass, parts.join("; "))
    });
    (pass && took < Duration::from_secs(1), format!("{detail} ({took:?})"))
}

fn single_world() -> (bool, String) {
    let ((report, chain), took) = timed(|| {
        let spec = CorrelationSpec::ghz();
        (enumerate_single_world(&spec).unwrap(), derive_contradiction_trace(&spec).unwrap())
    });
    let closing = chain
        .steps
        .iter()
        .rev()
        .find(|s| s.text.starts_with("λ_X^A = ") && !s.text.contains("contradicts"))
        .map(|s| s.text.clone())
        .unwrap_or_default();
    let pass = !report.satisfiable
        && report.total_searched == 64
        && chain.is_contradiction()
        && closing.contains("= -l")
        && chain.steps.len() >= 7
        && took < Duration::from_secs(1);
    (pass, format!("{} of {} tables; chain closes with \"{closing}\" ({took:?})", report.verdict(), report.total_searched))
}

fn divergent() -> (bool, String) {
    let (report, took) = timed(|| enumerate_divergent_worlds(&CorrelationSpec::ghz(), 4).unwrap());
    let pass = !report.satisfiable && report.total_searched == 4096 && took < Duration::from_secs(10);
    (pass, format!("{}, {} world-indexed tables searched ({took:?})", report.verdict(), report.total_searched))
}

fn multivalued() -> (bool, String) {
    let report = many_worlds_witness(&CorrelationSpec::ghz()).unwrap();
    let both = report.witnesses.first().is_some_and(|w| w.cells.iter().all(|c| c.entries.len() == 2));
    (report.satisfiable && both, format!("witness: {}", report.witnesses.first().map(|w| w.to_string()).unwrap_or_default()))
}

fn epr_run() -> (bool, String) {
    let s = corpus("epr.scn");
    let run = run_scenario(&s).unwrap();
    let (a, b) = (run.stats.measurement("M_A").unwrap(), run.stats.measurement("M_B").unwrap());
    let f = run.stats.meeting("F").unwrap();
    let same = f.counts.iter().filter(|(t, _)| t[0] == t[1]).map(|(_, c)| c).sum::<usize>();
    let audit = locality_audit(&run.trace, &s).unwrap();
    let every_event = run.trace.events.iter().all(|e| audit.passes_at(&e.id));
    let pass = s.n == 1000
        && (a.up, a.down, b.up, b.down) == (500, 500, 500, 500)
        && same == 1000
        && f.pairs() == 1000
        && audit.pass
        && every_event;
    (
        pass,
        format!(
            "M_A {}/{}, M_B {}/{}, same outcome in {same}/{} pairings, audit {}",
            a.up,
            a.down,
            b.up,
            b.down,
            f.pairs(),
            if audit.pass { "pass" } else { "FAIL" }
        ),
    )
}

fn ghz_runs() -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (file, word, product) in
        [("ghz_xxx.scn", "XXX", -1i8), ("ghz_yyx.scn", "YYX", 1), ("ghz_xyy.scn", "XYY", 1), ("ghz_yxy.scn", "YXY", 1)]
    {
        let s = corpus(file);
        let run = run_scenario(&s).unwrap();
        let full: Vec<_> = run.stats.meetings.iter().filter(|m| m.events.len() == 3).collect();
        let ok_products = !full.is_empty()
            && full.iter().all(|m| m.settings == word && m.pairs() == s.n && m.product_counts().keys().all(|p| *p == product));
        let audit = locality_audit(&run.trace, &s).unwrap().pass;
        pass &= ok_products && audit;
        parts.push(format!(
            "{word}={product:+}: {} meetings at 100% {}, audit {}",
            full.len(),
            if ok_products { "yes" } else { "no" },
            if audit { "pass" } else { "FAIL" }
        ));
    }
    (pass, parts.join("; "))
}

fn no_signaling() -> (bool, String) {
    let a = corpus("epr.scn");
    let mut b = corpus("epr_remote_x.scn");
    b.name = a.name.clone();
    let report = no_signaling_check(&a, &b, &["A"]).unwrap();
    let (ra, rb) = (run_scenario(&a).unwrap(), run_scenario(&b).unwrap());
    let partition = |r: &RunOutput| {
        (0..a.n).map(|c| r.ensemble.life("A", c).unwrap().log.iter().map(|l| l.value).collect::<Vec<_>>()).collect::<Vec<_>>()
    };
    let identical = partition(&ra) == partition(&rb);
    (
        report.pass && identical,
        format!("Bob Z vs X: Alice's per-copy outcomes identical = {identical}, check {}", if report.pass { "pass" } else { "FAIL" }),
    )
}

fn born() -> (bool, String) {
    let s = corpus("born_07.scn");
    let m = run_scenario(&s).unwrap().stats.measurement("M").unwrap().clone();
    let exact = m.up == 700 && m.down == 300;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let amps: Vec<Complex64> = (0..2).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let psi = StateVector::normalized(vec!["q"], amps.clone()).unwrap();
        let mut scenario = s.clone();
        scenario.events[0] = EventSpec {
            kind: EventKind::Source {
                participants: vec!["q".into()],
                state: None,
                amplitudes: Some(amps.iter().map(|a| [a.re, a.im]).collect()),
            },
            ..s.events[0].clone()
        };
        let setting = [X, Y, Z][i % 3];
        if let EventKind::Measurement { setting: slot, .. } = &mut scenario.events[1].kind {
            *slot = Some(setting);
        }
        let p = born_distribution(&psi, &[("q", &setting.observable())]).unwrap().probability(&[Outcome::Up]);
        let m = run_scenario(&scenario).unwrap().stats.measurement("M").unwrap().clone();
        worst = worst.max((m.up as f64 - 1000.0 * p).abs()).max((m.down as f64 - 1000.0 * (1.0 - p)).abs());
    }
    (exact && worst <= 1.0, format!("p = 0.7 gives {}/{}; worst |class - Np| over 100 random states = {worst:.4}", m.up, m.down))
}

fn insufficiency() -> (bool, String) {
    let psi = both_measured_state();
    let x = Observable::x();
    let up = |l: &str, r: &str| StateVector::eigenstate(l, &x, Outcome::Up).tensor(&StateVector::eigenstate(r, &x, Outcome::Up)).unwrap();
    let r = reduced_state_insufficiency(&psi, &["a", "A"], &["b", "B"], &up("a", "A"), &up("b", "B")).unwrap();
    let pass = (r.lhs - 0.25).abs() < 1e-12 && (r.rhs - 0.5).abs() < 1e-12 && (r.gap - 0.25).abs() < 1e-12;
    (pass, format!("lhs = {:.15}, rhs = {:.15}, gap = {:.15}", r.lhs, r.rhs, r.gap))
}

fn chsh() -> (bool, String) {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};
    let bound = chsh_classical_bound();
    let s = chsh_value(
        &epr_state(),
        &Observable::spin(0.0, 0.0),
        &Observable::spin(FRAC_PI_2, 0.0),
        &Observable::spin(-FRAC_PI_4, 0.0),
        &Observable::spin(FRAC_PI_4, 0.0),
    )
    .unwrap();
    (bound == 2.0 && (s - 2.0 * SQRT_2).abs() < 1e-9, format!("classical bound {bound}, quantum {s:.12}"))
}

fn mutation_power() -> (bool, String) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut names = Vec::new();
    let mut pass = true;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let trace = TraceLog::from_jsonl(&fs::read_to_string(&path).unwrap()).unwrap();
        let failed = audit_trace(&trace).map(|r| !r.pass).unwrap_or(true);
        pass &= failed;
        names.push(format!("{} {}", path.file_name().unwrap().to_string_lossy(), if failed { "rejected" } else { "ACCEPTED" }));
    }
    names.sort();
    (pass && !names.is_empty(), names.join(", "))
}

fn determinism() -> (bool, String) {
    let s = corpus("ghz_yyx.scn");
    let (a, b) = (run_scenario(&s).unwrap().trace.to_jsonl(), run_scenario(&s).unwrap().trace.to_jsonl());
    (a == b, format!("{} bytes, identical = {}", a.len(), a == b))
}

fn main() {
    let checks: Vec<(u32, &'static str, Criterion)> = vec![
        (1, "GHZ correlations", ghz_correlations),
        (2, "single world: no value table", single_world),
        (3, "divergent worlds: no value table", divergent),
        (4, "multivalued witness", multivalued),
        (5, "local worlds, EPR", epr_run),
        (6, "local worlds, GHZ", ghz_runs),
        (7, "no signaling", no_signaling),
        (8, "Born proportions", born),
        (9, "reduced-state insufficiency", insufficiency),
        (10, "CHSH contrast", chsh),
        (11, "mutation power", mutation_power),
        (12, "determinism", determinism),
    ];
    let results: Vec<Verdict> = checks
        .into_iter()
        .map(|(id, title, f)| {
            let (pass, detail) = f();
            Verdict { id, title, pass, detail }
        })
        .collect();
    for r in &results {
        println!("{} {:>2} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.id, r.title, r.detail);
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
