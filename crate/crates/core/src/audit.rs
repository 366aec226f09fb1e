//! Checks run against serialized traces.
//!
//! The locality audit rebuilds every post-event record from the pre-event
//! records of the participants and the event's own payload, re-derives the
//! pairings and outcome splits, and checks that nothing a record or a life
//! carries comes from outside the event's past light cone. It shares only the
//! linear algebra and the coupling unitary with the simulator; merge, replay,
//! pairing and rounding are reimplemented here.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::hilbert::{apply, born_distribution, Observable, Outcome, Setting, StateVector};
use crate::spacetime::{interval_class, Event, IntervalClass};
use crate::worlds::{
    coupling_unitary, ready_state, run_scenario, source_state, EventKind, EventSpec, GroupRecord, LifeKeys, LocalRecord, RecordOp,
    RecordSnapshot, Scenario, ScenarioError, TraceError, TraceEvent, TraceLog,
};

const SUPPORT: f64 = 1e-12;
const TIE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("trace integrity: {0}")]
    Integrity(String),
    #[error("scenarios are not comparable: {0}")]
    Comparison(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub check: String,
    pub subject: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl AuditReport {
    fn new() -> Self {
        AuditReport { checks: Vec::new(), pass: true }
    }

    fn record(&mut self, check: &str, subject: &str, failures: Vec<String>, ok_detail: &str) {
        let pass = failures.is_empty();
        self.pass &= pass;
        let detail = if pass { ok_detail.to_string() } else { failures.join("; ") };
        self.checks.push(Check { check: check.into(), subject: subject.into(), pass, detail });
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Whether every check about `subject` passed.
    pub fn passes_at(&self, subject: &str) -> bool {
        self.checks.iter().filter(|c| c.subject == subject).all(|c| c.pass)
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {:<12} {:<10} {}", if c.pass { "PASS" } else { "FAIL" }, c.check, c.subject, c.detail)?;
        }
        writeln!(f, "overall: {}", if self.pass { "PASS" } else { "FAIL" })
    }
}

fn point(ev: &EventSpec) -> Event {
    Event::new(ev.id.clone(), ev.t, ev.x)
}

fn causally_before(cause: &Event, effect: &Event) -> bool {
    cause.t <= effect.t && interval_class(cause, effect) != IntervalClass::Spacelike
}

fn history_key(op: &RecordOp) -> (f64, String) {
    (op.t(), op.event().to_string())
}

/// Independent replay: sources tensor in, couplings add a ready pointer and
/// apply the coupling unitary.
fn rebuild(history: &[RecordOp]) -> Result<StateVector, String> {
    let mut psi = StateVector::empty();
    for op in history {
        psi = match op {
            RecordOp::Source { labels, amplitudes, .. } => {
                let amps: Vec<Complex64> = amplitudes.iter().map(|a| Complex64::new(a[0], a[1])).collect();
                psi.tensor(&StateVector::new(labels.clone(), amps).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?
            }
            RecordOp::Couple { system, pointer, setting, .. } => {
                let with_pointer =
                    if psi.contains(pointer) { psi } else { psi.tensor(&ready_state(pointer)).map_err(|e| e.to_string())? };
                let u = coupling_unitary(system, pointer, *setting).map_err(|e| e.to_string())?;
                apply(&u, &with_pointer).map_err(|e| e.to_string())?
            }
        };
    }
    Ok(psi)
}

/// Largest remainder with ties to the lower index; zero weights stay zero.
fn hamilton(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut shares: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = total - shares.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a].fract(), quotas[b].fract());
        if (ra - rb).abs() <= TIE {
            a.cmp(&b)
        } else {
            rb.total_cmp(&ra)
        }
    });
    let mut i = 0;
    while left > 0 && !order.is_empty() {
        shares[order[i % order.len()]] += 1;
        left -= 1;
        i += 1;
    }
    shares
}

fn expected_groups(
    keys: &[Vec<&BTreeMap<String, Outcome>>],
    events: &[String],
    dist: &[(Vec<Outcome>, f64)],
    n: usize,
) -> Vec<GroupRecord> {
    let weights: Vec<f64> = dist.iter().map(|(_, p)| if *p >= SUPPORT { *p } else { 0.0 }).collect();
    let quota = hamilton(n, &weights);
    let fits =
        |key: &BTreeMap<String, Outcome>, tuple: &[Outcome]| events.iter().zip(tuple).all(|(e, o)| key.get(e).is_none_or(|v| v == o));
    let mut free: Vec<BTreeSet<usize>> = keys.iter().map(|k| (0..k.len()).collect()).collect();
    let mut groups = Vec::new();
    let grab = |tuple: &Vec<Outcome>, free: &mut Vec<BTreeSet<usize>>| {
        let picks: Option<Vec<usize>> = keys.iter().zip(free.iter()).map(|(k, f)| f.iter().copied().find(|&i| fits(k[i], tuple))).collect();
        if let Some(p) = &picks {
            for (f, i) in free.iter_mut().zip(p) {
                f.remove(i);
            }
        }
        picks
    };
    for ((tuple, _), q) in dist.iter().zip(quota) {
        for _ in 0..q {
            let Some(members) = grab(tuple, &mut free) else { break };
            groups.push(GroupRecord { tuple: tuple.clone(), members, outcome: None });
        }
    }
    for ((tuple, _), w) in dist.iter().zip(&weights) {
        if *w <= 0.0 {
            continue;
        }
        while let Some(members) = grab(tuple, &mut free) {
            groups.push(GroupRecord { tuple: tuple.clone(), members, outcome: None });
        }
    }
    groups.sort_by(|a, b| (&a.tuple, &a.members).cmp(&(&b.tuple, &b.members)));
    groups
}

/// Locality audit against the scenario embedded in the trace header.
pub fn audit_trace(trace: &TraceLog) -> Result<AuditReport, AuditError> {
    let scenario = trace.header.definition.clone();
    locality_audit(trace, &scenario)
}

/// Recomputes every event of `trace` from local data only and reports one
/// check per property per event.
pub fn locality_audit(trace: &TraceLog, scenario: &Scenario) -> Result<AuditReport, AuditError> {
    scenario.validate()?;
    if trace.header.scenario_digest != scenario.digest() {
        return Err(AuditError::Integrity("trace header digest does not match the scenario".into()));
    }
    if trace.header.n != scenario.n || trace.header.seed != scenario.seed {
        return Err(AuditError::Integrity("trace header ensemble size or seed differs from the scenario".into()));
    }
    let ordered = scenario.ordered_events();
    let trace_ids: Vec<&str> = trace.events.iter().map(|e| e.id.as_str()).collect();
    let scenario_ids: Vec<&str> = ordered.iter().map(|e| e.id.as_str()).collect();
    if trace_ids != scenario_ids {
        return Err(AuditError::Integrity(format!("trace events {trace_ids:?} do not follow the scenario order {scenario_ids:?}")));
    }
    let n = scenario.n;
    let points: BTreeMap<&str, Event> = scenario.events.iter().map(|e| (e.id.as_str(), point(e))).collect();
    let mut current: BTreeMap<String, RecordSnapshot> = BTreeMap::new();
    let mut keys_now: BTreeMap<String, Vec<BTreeMap<String, Outcome>>> = BTreeMap::new();
    let empty = LocalRecord::empty().snapshot();
    let mut report = AuditReport::new();

    for (te, spec) in trace.events.iter().zip(&ordered) {
        let here = point(spec);
        let subject = te.id.as_str();
        let participants = spec.participants();
        let k = participants.len();
        if te.inputs.len() != k || te.outputs.len() != k || te.lives.len() != k {
            return Err(AuditError::Integrity(format!("event {subject}: expected {k} input, output and life entries")));
        }

        // event payload agrees with the scenario
        let mut fails = Vec::new();
        if te.kind != spec.kind_name() || te.t != spec.t || te.x != spec.x || te.participants != participants {
            fails.push("event fields differ from the scenario".to_string());
        }
        let setting = match &spec.kind {
            EventKind::Measurement { setting, choose, .. } => match (te.setting, setting) {
                (Some(s), Some(want)) if s == *want => Some(s),
                (Some(s), None) if choose.contains(&s) => Some(s),
                _ => {
                    fails.push("measurement setting is not allowed by the scenario".into());
                    te.setting
                }
            },
            _ => None,
        };
        report.record("event", subject, fails, "matches scenario");

        // participants are where their world lines put them
        let mut fails = Vec::new();
        for p in &participants {
            let sys = scenario.system(p).expect("validated");
            let x = sys.position(spec.t);
            if (x - spec.x).abs() > 1e-9 {
                fails.push(format!("{p} at x = {x}"));
            }
        }
        report.record("co-location", subject, fails, "all participants at the event");

        // inputs are the records each participant carried out of its last event
        let mut fails = Vec::new();
        for (p, input) in participants.iter().zip(&te.inputs) {
            let expect = current.get(p).unwrap_or(&empty);
            if input != expect {
                fails.push(format!("{p} input record is not the record it carried"));
            }
            if input.digest != input.recomputed_digest() {
                fails.push(format!("{p} input digest mismatch"));
            }
        }
        for (p, out) in participants.iter().zip(&te.outputs) {
            if out.digest != out.recomputed_digest() {
                fails.push(format!("{p} output digest mismatch"));
            }
        }
        report.record("chain", subject, fails, "records continue along world lines");

        // nothing in an output record comes from outside the past light cone
        let mut fails = Vec::new();
        for (p, out) in participants.iter().zip(&te.outputs) {
            let mut seen = BTreeSet::new();
            for id in out.provenance.iter().map(String::as_str).chain(out.history.iter().map(|op| op.event())) {
                if !seen.insert(id) {
                    continue;
                }
                match points.get(id) {
                    Some(cause) if causally_before(cause, &here) => {}
                    Some(_) => fails.push(format!("provenance outside past light cone: {p}'s record reflects {id}")),
                    None => fails.push(format!("{p}'s record cites unknown event {id}")),
                }
            }
            let hist: BTreeSet<&str> = out.history.iter().map(|op| op.event()).collect();
            let prov: BTreeSet<&str> = out.provenance.iter().map(String::as_str).collect();
            if hist != prov {
                fails.push(format!("{p}'s provenance does not list its history"));
            }
        }
        report.record("provenance", subject, fails, "within past light cone");

        // local recomputation of the post-event record
        let mut ops: Vec<RecordOp> = Vec::new();
        for input in &te.inputs {
            for op in &input.history {
                if !ops.iter().any(|o| o.event() == op.event()) {
                    ops.push(op.clone());
                }
            }
        }
        let mut fails = Vec::new();
        match &spec.kind {
            EventKind::Source { participants, state, amplitudes } => {
                match source_state(participants, state.as_deref(), amplitudes.as_deref()) {
                    Ok(psi) => ops.push(RecordOp::Source {
                        event: spec.id.clone(),
                        t: spec.t,
                        labels: participants.clone(),
                        amplitudes: psi.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
                    }),
                    Err(e) => fails.push(e),
                }
            }
            EventKind::Measurement { system, .. } => {
                let pointer = te.pointer.clone().unwrap_or_default();
                let taken = te.inputs.iter().any(|r| r.labels.contains(&pointer))
                    || scenario.system(&pointer).is_some() && pointer != participants[0];
                if pointer.is_empty() || taken {
                    fails.push(format!("pointer label {pointer:?} is not fresh"));
                }
                if let Some(s) = setting {
                    ops.push(RecordOp::Couple { event: spec.id.clone(), t: spec.t, system: system.clone(), pointer, setting: s });
                }
            }
            EventKind::Meeting { .. } => {}
        }
        ops.sort_by(|a, b| {
            let (ka, kb) = (history_key(a), history_key(b));
            ka.0.total_cmp(&kb.0).then(ka.1.cmp(&kb.1))
        });
        let rebuilt = rebuild(&ops);
        let psi = match &rebuilt {
            Ok(psi) => Some(psi.clone()),
            Err(e) => {
                fails.push(format!("replay failed: {e}"));
                None
            }
        };
        if let Some(psi) = &psi {
            let amps: Vec<[f64; 2]> = psi.amplitudes().iter().map(|a| [a.re, a.im]).collect();
            for (p, out) in participants.iter().zip(&te.outputs) {
                if out.labels != psi.labels() || out.amplitudes != amps || out.history != ops {
                    fails.push(format!("{p}'s post-event record differs from the local recomputation"));
                }
            }
        }
        report.record("recompute", subject, fails, "post-event record recomputed bit-exactly from local data");

        // life knowledge: only from partners at this event and from this event
        let mut fails = Vec::new();
        let lives: Vec<&LifeKeys> = te.lives.iter().collect();
        let shape_ok = lives.iter().zip(&participants).all(|(l, p)| {
            &l.system == p && l.pre.len() == n && l.post.len() == n && l.pre.iter().chain(&l.post).all(|&i| i < l.keys.len())
        });
        if !shape_ok {
            return Err(AuditError::Integrity(format!("event {subject}: malformed life keys")));
        }
        for (p, l) in participants.iter().zip(&lives) {
            let carried = keys_now.get(p).cloned().unwrap_or_else(|| vec![BTreeMap::new(); n]);
            if (0..n).any(|c| *l.pre_key(c) != carried[c]) {
                fails.push(format!("{p}'s pre-event knowledge is not what its lives carried"));
            }
        }
        let mut grouped: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); k];
        for (gi, g) in te.groups.iter().enumerate() {
            if g.members.len() != k || g.members.iter().any(|&c| c >= n) {
                return Err(AuditError::Integrity(format!("event {subject}: malformed group")));
            }
            for (p, &c) in g.members.iter().enumerate() {
                if grouped[p].insert(c, gi).is_some() {
                    fails.push(format!("{} copy {c} is in two groups", participants[p]));
                }
            }
        }
        for (p, l) in lives.iter().enumerate() {
            for c in 0..n {
                let post = l.post_key(c);
                let mut allowed: BTreeMap<String, Outcome> = BTreeMap::new();
                if let Some(&gi) = grouped[p].get(&c) {
                    let g = &te.groups[gi];
                    for (q, &m) in g.members.iter().enumerate() {
                        allowed.extend(lives[q].pre_key(m).iter().map(|(e, o)| (e.clone(), *o)));
                    }
                    if let Some(o) = g.outcome {
                        allowed.insert(spec.id.clone(), o);
                    }
                } else {
                    allowed = l.pre_key(c).clone();
                }
                for (e, o) in post {
                    match points.get(e.as_str()) {
                        Some(cause) if !causally_before(cause, &here) => {
                            fails.push(format!("provenance outside past light cone: {} copy {c} knows {e}", participants[p]));
                        }
                        None => fails.push(format!("{} copy {c} knows unknown event {e}", participants[p])),
                        _ => {
                            if allowed.get(e) != Some(o) {
                                fails.push(format!("{} copy {c} learned {e} from no partner", participants[p]));
                            }
                        }
                    }
                }
                if post.len() != allowed.len() {
                    fails.push(format!("{} copy {c} did not merge its partners' knowledge", participants[p]));
                }
            }
        }
        fails.dedup();
        fails.truncate(20);
        report.record("life-keys", subject, fails, "knowledge only from co-present lives");

        // pairings and outcome splits, re-derived
        if let Some(psi) = &psi {
            let mut fails = Vec::new();
            let measured: Vec<(String, String, Setting)> = ops
                .iter()
                .filter_map(|op| match op {
                    RecordOp::Couple { event, pointer, setting, .. } if *event != spec.id => {
                        Some((event.clone(), pointer.clone(), *setting))
                    }
                    _ => None,
                })
                .collect();
            let events: Vec<String> = measured.iter().map(|m| m.0.clone()).collect();
            if te.known_events != events {
                fails.push("known events differ from the measurements in the record".into());
            }
            let obs: Vec<Observable> = measured.iter().map(|m| m.2.observable()).collect();
            let targets: Vec<(&str, &Observable)> = measured.iter().zip(&obs).map(|(m, o)| (m.1.as_str(), o)).collect();
            let dist: Vec<(Vec<Outcome>, f64)> = match born_distribution(psi, &targets) {
                Ok(d) => d.iter().map(|(t, p)| (t.clone(), p)).collect(),
                Err(e) => return Err(AuditError::Integrity(format!("event {subject}: {e}"))),
            };
            for g in &te.groups {
                let p = dist.iter().find(|(t, _)| *t == g.tuple).map(|d| d.1).unwrap_or(0.0);
                if p < SUPPORT {
                    fails.push(format!("pairing with zero joint probability: {:?}", g.tuple.iter().map(|o| o.value()).collect::<Vec<_>>()));
                    break;
                }
            }
            let pre: Vec<Vec<&BTreeMap<String, Outcome>>> = lives.iter().map(|l| (0..n).map(|c| l.pre_key(c)).collect()).collect();
            let mut expect = expected_groups(&pre, &events, &dist, n);
            if let (Some(s), Some(pointer)) = (setting, te.pointer.as_deref()) {
                let so = s.observable();
                let mut full_targets = targets.clone();
                full_targets.push((pointer, &so));
                let full = born_distribution(psi, &full_targets).map_err(|e| AuditError::Integrity(e.to_string()))?;
                // cumulative rounding over classes in tuple order
                let (mut acc, mut given, mut start) = (0.0f64, 0usize, 0usize);
                while start < expect.len() {
                    let tuple = expect[start].tuple.clone();
                    let size = expect[start..].iter().take_while(|g| g.tuple == tuple).count();
                    let mut up = tuple.clone();
                    up.push(Outcome::Up);
                    let mut down = tuple;
                    down.push(Outcome::Down);
                    let (pu, pd) = (full.probability(&up), full.probability(&down));
                    acc += size as f64 * if pu + pd > 0.0 { pu / (pu + pd) } else { 0.0 };
                    let target = ((acc + 0.5 + TIE).floor().max(0.0) as usize).max(given);
                    let ups = (target - given).min(size);
                    given += ups;
                    for (j, g) in expect[start..start + size].iter_mut().enumerate() {
                        g.outcome = Some(if j < ups { Outcome::Up } else { Outcome::Down });
                    }
                    start += size;
                }
                let marginal = born_distribution(psi, &[(pointer, &so)]).map_err(|e| AuditError::Integrity(e.to_string()))?;
                let ups = te.groups.iter().filter(|g| g.outcome == Some(Outcome::Up)).count();
                let downs = te.groups.iter().filter(|g| g.outcome == Some(Outcome::Down)).count();
                let mut born_fails = Vec::new();
                for (o, count) in [(Outcome::Up, ups), (Outcome::Down, downs)] {
                    let quota = n as f64 * marginal.probability(&[o]);
                    if (count as f64 - quota).abs() > 1.0 + TIE {
                        born_fails.push(format!("class {o} has {count} lives, Born quota {quota:.3}"));
                    }
                    let listed = te.classes.iter().find(|c| c.outcome == o).map(|c| c.count);
                    if listed != Some(count) {
                        born_fails.push(format!("class {o} count {listed:?} disagrees with groups ({count})"));
                    }
                }
                report.record(
                    "born",
                    subject,
                    born_fails,
                    &format!("+1: {ups}, -1: {downs}, N·p(+1) = {:.3}", n as f64 * marginal.probability(&[Outcome::Up])),
                );
            }
            if expect != te.groups {
                fails.push("groups differ from the largest-remainder pairing of local data".into());
            }
            report.record("pairing", subject, fails, &format!("{} groups, all with nonzero joint probability", te.groups.len()));
        }

        for (p, out) in participants.iter().zip(&te.outputs) {
            current.insert(p.clone(), out.clone());
        }
        for (p, l) in participants.iter().zip(&lives) {
            keys_now.insert(p.clone(), (0..n).map(|c| l.post_key(c).clone()).collect());
        }
    }
    Ok(report)
}

/// Runs two scenarios that differ only in one remote measurement setting and
/// checks that the local parties' outcome partitions and records at
/// measurements outside the changed event's future light cone are identical.
pub fn no_signaling_check(a: &Scenario, b: &Scenario, local: &[&str]) -> Result<AuditReport, AuditError> {
    if a.n != b.n {
        return Err(AuditError::Comparison(format!("ensemble sizes differ ({} vs {})", a.n, b.n)));
    }
    if a.seed != b.seed || a.systems != b.systems {
        return Err(AuditError::Comparison("seeds or systems differ".into()));
    }
    let ids_a: Vec<&str> = a.events.iter().map(|e| e.id.as_str()).collect();
    let ids_b: Vec<&str> = b.events.iter().map(|e| e.id.as_str()).collect();
    if ids_a != ids_b {
        return Err(AuditError::Comparison("event lists differ".into()));
    }
    let mut changed = Vec::new();
    for (ea, eb) in a.events.iter().zip(&b.events) {
        if ea == eb {
            continue;
        }
        let only_setting = match (&ea.kind, &eb.kind) {
            (EventKind::Measurement { measurer: m1, system: s1, .. }, EventKind::Measurement { measurer: m2, system: s2, .. }) => {
                m1 == m2 && s1 == s2 && ea.t == eb.t && ea.x == eb.x
            }
            _ => false,
        };
        if !only_setting {
            return Err(AuditError::Comparison(format!("event {} differs in more than its setting", ea.id)));
        }
        changed.push(ea);
    }
    if changed.len() > 1 {
        return Err(AuditError::Comparison(format!("{} events differ; expected one remote setting change", changed.len())));
    }
    for p in local {
        if a.system(p).is_none() {
            return Err(AuditError::Comparison(format!("unknown local party {p}")));
        }
        if changed.iter().any(|e| e.participants().iter().any(|x| x == p)) {
            return Err(AuditError::Comparison(format!("local party {p} takes part in the changed event")));
        }
    }
    let run_a = run_scenario(a)?;
    let run_b = run_scenario(b)?;
    let mut report = AuditReport::new();
    for ev in a.ordered_events() {
        let EventKind::Measurement { .. } = ev.kind else { continue };
        let parts = ev.participants();
        if !parts.iter().any(|p| local.contains(&p.as_str())) {
            continue;
        }
        if changed.iter().any(|c| causally_before(&point(c), &point(ev))) {
            continue;
        }
        let mut fails = Vec::new();
        let (ta, tb) = (run_a.trace.event(&ev.id).expect("ran"), run_b.trace.event(&ev.id).expect("ran"));
        if ta.outputs != tb.outputs {
            fails.push("post-measurement records differ".to_string());
        }
        if ta.classes != tb.classes {
            fails.push("class sizes differ".to_string());
        }
        for p in parts.iter().filter(|p| local.contains(&p.as_str())) {
            let outcomes = |run: &crate::worlds::RunOutput| -> Vec<Option<Outcome>> {
                run.ensemble
                    .system(p)
                    .expect("system")
                    .lives
                    .iter()
                    .map(|l| l.log.iter().find(|e| e.event == ev.id).map(|e| e.value))
                    .collect()
            };
            if outcomes(&run_a) != outcomes(&run_b) {
                fails.push(format!("{p}'s copies land in different classes"));
            }
        }
        let sizes: Vec<String> = ta.classes.iter().map(|c| format!("{}: {}", c.outcome, c.count)).collect();
        report.record("no-signaling", &ev.id, fails, &format!("identical partition ({})", sizes.join(", ")));
    }
    if report.checks.is_empty() {
        return Err(AuditError::Comparison("no local measurement outside the changed event's future light cone".into()));
    }
    Ok(report)
}

/// A perfect correlation found at a meeting and the event that explains it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PerfectCorrelation {
    pub meeting: String,
    pub parties: Vec<String>,
    pub events: Vec<String>,
    pub settings: String,
    pub product: i8,
    /// Latest event in the past light cones of all correlated measurements
    /// that every correlated record reflects; `None` if there is none.
    pub common_cause: Option<String>,
}

impl PerfectCorrelation {
    pub fn constraint(&self) -> String {
        format!("{}={}", self.settings, if self.product > 0 { "+1" } else { "-1" })
    }
}

impl fmt::Display for PerfectCorrelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}) {} at {}: common cause {}",
            self.parties.join(","),
            self.constraint(),
            self.meeting,
            self.common_cause.as_deref().unwrap_or("none found")
        )
    }
}

/// Scans meeting pairings for outcome products that never vary, keeping the
/// minimal sets whose members are not individually fixed, and locates a
/// common cause for each.
pub fn detect_perfect_correlations(trace: &TraceLog, scenario: &Scenario) -> Vec<PerfectCorrelation> {
    let points: BTreeMap<&str, Event> = scenario.events.iter().map(|e| (e.id.as_str(), point(e))).collect();
    let by_id: BTreeMap<&str, &TraceEvent> = trace.events.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut found: Vec<PerfectCorrelation> = Vec::new();
    for te in trace.events.iter().filter(|e| e.kind == "meeting" && !e.groups.is_empty()) {
        let m = te.known_events.len();
        if !(2..=16).contains(&m) {
            continue;
        }
        let constant = |mask: u32| -> Option<i8> {
            let mut value = None;
            for g in &te.groups {
                let p = Outcome::product((0..m).filter(|i| mask >> i & 1 == 1).map(|i| g.tuple[i]));
                match value {
                    None => value = Some(p),
                    Some(v) if v != p => return None,
                    _ => {}
                }
            }
            value
        };
        let mut masks: Vec<u32> = (1u32..1 << m).collect();
        masks.sort_by_key(|x| (x.count_ones(), *x));
        let mut fixed: Vec<u32> = Vec::new();
        for mask in masks {
            let Some(product) = constant(mask) else { continue };
            let has_fixed_subset = fixed.iter().any(|&f| f & !mask == 0);
            fixed.push(mask);
            if mask.count_ones() < 2 || has_fixed_subset {
                continue;
            }
            let events: Vec<String> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| te.known_events[i].clone()).collect();
            if found.iter().any(|c| c.events == events && c.product == product) {
                continue;
            }
            let measurements: Vec<&TraceEvent> = events.iter().filter_map(|e| by_id.get(e.as_str()).copied()).collect();
            let parties = measurements.iter().map(|t| t.participants[0].clone()).collect();
            let settings = measurements.iter().map(|t| t.setting.map(|s| s.as_char()).unwrap_or('?')).collect();
            let mut shared: Option<BTreeSet<String>> = None;
            for t in &measurements {
                let prov: BTreeSet<String> = t.outputs.first().map(|o| o.provenance.iter().cloned().collect()).unwrap_or_default();
                shared = Some(match shared {
                    None => prov,
                    Some(s) => s.intersection(&prov).cloned().collect(),
                });
            }
            let common_cause = shared
                .unwrap_or_default()
                .into_iter()
                .filter_map(|id| points.get(id.as_str()).map(|p| (id.clone(), p)))
                .filter(|(_, cause)| measurements.iter().all(|t| points.get(t.id.as_str()).is_some_and(|eff| causally_before(cause, eff))))
                .max_by(|a, b| a.1.t.total_cmp(&b.1.t).then_with(|| a.0.cmp(&b.0)))
                .map(|(id, _)| id);
            found.push(PerfectCorrelation { meeting: te.id.clone(), parties, events, settings, product, common_cause });
        }
    }
    found
}

/// Hand-made locality violations used as audit fixtures.
pub mod mutations {
    use super::*;

    fn reseal(s: &mut RecordSnapshot) {
        s.digest = s.recomputed_digest();
    }

    /// Gives every output record at `target` the operation of the remote
    /// event `leaked`, as if its record had reached `target` instantly.
    pub fn leak_record(trace: &TraceLog, target: &str, leaked: &str) -> Option<TraceLog> {
        let op = trace.event(leaked)?.outputs.first()?.history.iter().find(|op| op.event() == leaked)?.clone();
        let mut out = trace.clone();
        let ev = out.events.iter_mut().find(|e| e.id == target)?;
        for snap in &mut ev.outputs {
            let mut history = snap.history.clone();
            history.push(op.clone());
            let rec = LocalRecord::from_history(history).ok()?;
            *snap = rec.snapshot();
            reseal(snap);
        }
        Some(out)
    }

    /// Lets the lives of `participant` at `target` know the outcome each
    /// same-index copy got at the remote event `leaked`.
    pub fn leak_outcome(trace: &TraceLog, target: &str, participant: &str, leaked: &str) -> Option<TraceLog> {
        let remote = trace.event(leaked)?;
        let mut outcome_of = BTreeMap::new();
        for g in &remote.groups {
            outcome_of.insert(g.members[0], g.outcome?);
        }
        let mut out = trace.clone();
        let ev = out.events.iter_mut().find(|e| e.id == target)?;
        let lives = ev.lives.iter_mut().find(|l| l.system == participant)?;
        let n = lives.post.len();
        let mut post: Vec<BTreeMap<String, Outcome>> = (0..n).map(|c| lives.post_key(c).clone()).collect();
        for (c, key) in post.iter_mut().enumerate() {
            if let Some(o) = outcome_of.get(&c) {
                key.insert(leaked.to_string(), *o);
            }
        }
        let pre: Vec<BTreeMap<String, Outcome>> = (0..n).map(|c| lives.pre_key(c).clone()).collect();
        let mut keys: Vec<BTreeMap<String, Outcome>> = Vec::new();
        let mut intern = |k: &BTreeMap<String, Outcome>| match keys.iter().position(|x| x == k) {
            Some(i) => i,
            None => {
                keys.push(k.clone());
                keys.len() - 1
            }
        };
        let pre_idx = pre.iter().map(&mut intern).collect();
        let post_idx = post.iter().map(&mut intern).collect();
        lives.keys = keys;
        lives.pre = pre_idx;
        lives.post = post_idx;
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worlds::{epr_scenario, ghz_scenario};

    #[test]
    fn epr_passes() {
        let s = epr_scenario(Setting::Z, Setting::Z, 40);
        let run = run_scenario(&s).unwrap();
        let report = locality_audit(&run.trace, &s).unwrap();
        assert!(report.pass, "{report}");
        for id in ["S", "M_A", "M_B", "F"] {
            assert!(report.passes_at(id));
        }
    }

    #[test]
    fn hamilton_matches_module() {
        for (n, w) in [(1000usize, vec![0.7, 0.3]), (3, vec![0.5, 0.5]), (5, vec![1.0, 1.0, 1.0]), (7, vec![0.0, 0.2, 0.8])] {
            assert_eq!(hamilton(n, &w), crate::apportion::largest_remainder(n, &w).unwrap());
        }
    }

    #[test]
    fn leaks_fail() {
        let s = epr_scenario(Setting::Z, Setting::Z, 8);
        let run = run_scenario(&s).unwrap();
        let bad = mutations::leak_record(&run.trace, "M_A", "M_B").unwrap();
        let report = locality_audit(&bad, &s).unwrap();
        assert!(!report.pass);
        assert!(report.failures().any(|c| c.subject == "M_A" && c.detail.contains("provenance outside past light cone")));
        let bad = mutations::leak_outcome(&run.trace, "M_A", "A", "M_B").unwrap();
        let report = locality_audit(&bad, &s).unwrap();
        assert!(report.failures().any(|c| c.subject == "M_A" && c.check == "life-keys"));
    }

    #[test]
    fn tampered_amplitude_fails() {
        let s = epr_scenario(Setting::X, Setting::X, 8);
        let mut trace = run_scenario(&s).unwrap().trace;
        trace.events[1].outputs[0].amplitudes[0][0] += 1e-15;
        trace.events[1].outputs[0].digest = trace.events[1].outputs[0].recomputed_digest();
        let report = locality_audit(&trace, &s).unwrap();
        assert!(report.failures().any(|c| c.check == "recompute"));
    }

    #[test]
    fn wrong_scenario_is_integrity_error() {
        let s = epr_scenario(Setting::Z, Setting::Z, 8);
        let trace = run_scenario(&s).unwrap().trace;
        let other = epr_scenario(Setting::Z, Setting::X, 8);
        assert!(matches!(locality_audit(&trace, &other), Err(AuditError::Integrity(_))));
    }

    #[test]
    fn correlations_found() {
        let s = epr_scenario(Setting::Z, Setting::Z, 20);
        let run = run_scenario(&s).unwrap();
        let found = detect_perfect_correlations(&run.trace, &s);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].constraint(), "ZZ=+1");
        assert_eq!(found[0].parties, vec!["A", "B"]);
        assert_eq!(found[0].common_cause.as_deref(), Some("S"));

        let s = ghz_scenario([Setting::X; 3], 40);
        let run = run_scenario(&s).unwrap();
        let found = detect_perfect_correlations(&run.trace, &s);
        assert_eq!(found.len(), 1, "{found:?}");
        assert_eq!(found[0].constraint(), "XXX=-1");
        assert_eq!(found[0].common_cause.as_deref(), Some("S"));
    }

    #[test]
    fn no_signaling() {
        let a = epr_scenario(Setting::Z, Setting::Z, 50);
        let b = epr_scenario(Setting::Z, Setting::X, 50);
        let r = no_signaling_check(&a, &b, &["A"]).unwrap();
        assert!(r.pass, "{r}");
        let c = epr_scenario(Setting::Z, Setting::X, 60);
        assert!(matches!(no_signaling_check(&a, &c, &["A"]), Err(AuditError::Comparison(_))));
        let d = epr_scenario(Setting::X, Setting::X, 50);
        assert!(matches!(no_signaling_check(&a, &d, &["A"]), Err(AuditError::Comparison(_))));
    }
}
