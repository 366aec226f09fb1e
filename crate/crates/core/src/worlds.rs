//! Local-worlds simulator.
//!
//! Every point object (system) is carried by `N` lives that exist from the
//! start and only diverge. Each system holds one wave-field record: the joint
//! state of every subsystem whose history has reached it, plus the events that
//! produced it. Records change only at events, and only from the records of
//! the systems present there. Lives of the same system share the record and
//! differ in what outcomes they have seen.
//!
//! At each event the lives of the participants are grouped: a group holds one
//! life per participant, and groups are formed only for outcome combinations
//! the merged record allows, in Born proportions. Measurements then split the
//! groups by outcome, again in Born proportions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::apportion::{apportion_copies, ApportionError};
use crate::correlations;
use crate::hilbert::{apply, born_distribution, HilbertError, Observable, Operator, Outcome, Setting, StateVector};
use crate::spacetime::{in_past_light_cone, Event};

/// Participants must sit within this distance of the event.
pub const POSITION_TOLERANCE: f64 = 1e-9;
/// Probability within this of 1 counts as certain.
pub const CERTAINTY_TOLERANCE: f64 = 1e-12;
/// Outcome combinations below this probability are never paired.
pub const SUPPORT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_ENSEMBLE: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("ensemble size must be at least 1")]
    EmptyEnsemble,
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("invalid id {0:?}: ids must be nonempty and must not contain '~'")]
    InvalidId(String),
    #[error("{0} has non-finite coordinates")]
    NonFinite(String),
    #[error("event {event} names unknown system {system:?}")]
    UnknownSystem { event: String, system: String },
    #[error("event {event}: system {system} is at x = {actual}, not at the event position x = {expected}")]
    NotColocated { event: String, system: String, actual: f64, expected: f64 },
    #[error("event {later} depends on event {earlier} through system {system}, but {earlier} and {later} are spacelike separated")]
    Spacelike { earlier: String, later: String, system: String },
    #[error("event {event}: system {system} already has a history and cannot be prepared")]
    AlreadyPrepared { event: String, system: String },
    #[error("event {event}: system {system} has not been prepared by a source")]
    NotPrepared { event: String, system: String },
    #[error("event {event}: {reason}")]
    InvalidEvent { event: String, reason: String },
    #[error("event {event}: {source}")]
    Hilbert { event: String, source: HilbertError },
    #[error("event {event}: {source}")]
    Proportion { event: String, source: ApportionError },
}

fn hilbert_err(event: &str) -> impl Fn(HilbertError) -> ScenarioError + '_ {
    move |source| ScenarioError::Hilbert { event: event.to_string(), source }
}

/// A point object and its world line.
///
/// With `path` empty the object moves as `x + v t`. Otherwise it follows the
/// waypoints `[t, x]` piecewise linearly and rests before the first and after
/// the last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub id: String,
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub v: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<[f64; 2]>,
}

impl SystemSpec {
    pub fn at_rest(id: impl Into<String>, x: f64) -> Self {
        SystemSpec { id: id.into(), x, v: 0.0, path: Vec::new() }
    }

    pub fn moving(id: impl Into<String>, x: f64, v: f64) -> Self {
        SystemSpec { id: id.into(), x, v, path: Vec::new() }
    }

    pub fn with_path(id: impl Into<String>, path: Vec<[f64; 2]>) -> Self {
        SystemSpec { id: id.into(), x: 0.0, v: 0.0, path }
    }

    pub fn position(&self, t: f64) -> f64 {
        let p = &self.path;
        if p.is_empty() {
            return self.x + self.v * t;
        }
        if t <= p[0][0] {
            return p[0][1];
        }
        for w in p.windows(2) {
            let ([t0, x0], [t1, x1]) = (w[0], w[1]);
            if t <= t1 {
                if t1 == t0 {
                    return x1;
                }
                return x0 + (x1 - x0) * (t - t0) / (t1 - t0);
            }
        }
        p[p.len() - 1][1]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EventKind {
    /// Prepares fresh systems in a joint state: a named preset or explicit
    /// amplitudes `[re, im]` (normalized on load).
    Source {
        participants: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        amplitudes: Option<Vec<[f64; 2]>>,
    },
    /// `measurer` couples a pointer to `system` in the given setting. With
    /// `choose`, the setting is drawn from the list with the scenario seed.
    Measurement {
        measurer: String,
        system: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        setting: Option<Setting>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        choose: Vec<Setting>,
    },
    Meeting {
        participants: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub id: String,
    pub t: f64,
    pub x: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl EventSpec {
    pub fn source(id: &str, t: f64, x: f64, participants: &[&str], state: &str) -> Self {
        EventSpec {
            id: id.into(),
            t,
            x,
            kind: EventKind::Source { participants: strings(participants), state: Some(state.into()), amplitudes: None },
        }
    }

    pub fn measurement(id: &str, t: f64, x: f64, measurer: &str, system: &str, setting: Setting) -> Self {
        EventSpec {
            id: id.into(),
            t,
            x,
            kind: EventKind::Measurement { measurer: measurer.into(), system: system.into(), setting: Some(setting), choose: Vec::new() },
        }
    }

    pub fn meeting(id: &str, t: f64, x: f64, participants: &[&str]) -> Self {
        EventSpec { id: id.into(), t, x, kind: EventKind::Meeting { participants: strings(participants) } }
    }

    /// Systems present, measurer first for measurements.
    pub fn participants(&self) -> Vec<String> {
        match &self.kind {
            EventKind::Source { participants, .. } | EventKind::Meeting { participants } => participants.clone(),
            EventKind::Measurement { measurer, system, .. } => vec![measurer.clone(), system.clone()],
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            EventKind::Source { .. } => "source",
            EventKind::Measurement { .. } => "measurement",
            EventKind::Meeting { .. } => "meeting",
        }
    }

    pub fn point(&self) -> Event {
        Event::new(self.id.clone(), self.t, self.x)
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn default_n() -> usize {
    DEFAULT_ENSEMBLE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub systems: Vec<SystemSpec>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("scenario serializes")))
    }

    pub fn system(&self, id: &str) -> Option<&SystemSpec> {
        self.systems.iter().find(|s| s.id == id)
    }

    pub fn event(&self, id: &str) -> Option<&EventSpec> {
        self.events.iter().find(|e| e.id == id)
    }

    /// Events sorted by `(t, id)`.
    pub fn ordered_events(&self) -> Vec<&EventSpec> {
        let mut evs: Vec<&EventSpec> = self.events.iter().collect();
        evs.sort_by(|a, b| a.t.total_cmp(&b.t).then_with(|| a.id.cmp(&b.id)));
        evs
    }

    /// Checks ids, co-location, causal dependencies and event payloads.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n == 0 {
            return Err(ScenarioError::EmptyEnsemble);
        }
        let mut ids = BTreeSet::new();
        for id in self.systems.iter().map(|s| &s.id).chain(self.events.iter().map(|e| &e.id)) {
            if id.is_empty() || id.contains('~') {
                return Err(ScenarioError::InvalidId(id.clone()));
            }
            if !ids.insert(id.clone()) {
                return Err(ScenarioError::DuplicateId(id.clone()));
            }
        }
        for s in &self.systems {
            if !(s.x.is_finite() && s.v.is_finite() && s.path.iter().flatten().all(|c| c.is_finite())) {
                return Err(ScenarioError::NonFinite(s.id.clone()));
            }
        }
        let mut last: BTreeMap<&str, &EventSpec> = BTreeMap::new();
        let mut prepared: BTreeSet<&str> = BTreeSet::new();
        let mut measurers: BTreeSet<&str> = BTreeSet::new();
        for ev in self.ordered_events() {
            if !(ev.t.is_finite() && ev.x.is_finite()) {
                return Err(ScenarioError::NonFinite(ev.id.clone()));
            }
            let invalid = |reason: &str| ScenarioError::InvalidEvent { event: ev.id.clone(), reason: reason.to_string() };
            let participants = ev.participants();
            for (i, p) in participants.iter().enumerate() {
                if participants[..i].contains(p) {
                    return Err(invalid("participants must be distinct"));
                }
            }
            for p in &participants {
                let sys = self.system(p).ok_or_else(|| ScenarioError::UnknownSystem { event: ev.id.clone(), system: p.clone() })?;
                let actual = sys.position(ev.t);
                if (actual - ev.x).abs() > POSITION_TOLERANCE {
                    return Err(ScenarioError::NotColocated { event: ev.id.clone(), system: p.clone(), actual, expected: ev.x });
                }
                if let Some(prev) = last.get(p.as_str()) {
                    if !in_past_light_cone(&prev.point(), &ev.point()) {
                        return Err(ScenarioError::Spacelike { earlier: prev.id.clone(), later: ev.id.clone(), system: p.clone() });
                    }
                }
            }
            match &ev.kind {
                EventKind::Source { participants, state, amplitudes } => {
                    if participants.is_empty() {
                        return Err(invalid("a source needs at least one participant"));
                    }
                    for p in participants {
                        if last.contains_key(p.as_str()) || measurers.contains(p.as_str()) {
                            return Err(ScenarioError::AlreadyPrepared { event: ev.id.clone(), system: p.clone() });
                        }
                        prepared.insert(p);
                    }
                    source_state(participants, state.as_deref(), amplitudes.as_deref()).map_err(|reason| invalid(&reason))?;
                }
                EventKind::Measurement { measurer, system, setting, choose } => {
                    if setting.is_none() && choose.is_empty() {
                        return Err(invalid("a measurement needs a setting or a choose list"));
                    }
                    if setting.is_some() && !choose.is_empty() {
                        return Err(invalid("give either a setting or a choose list, not both"));
                    }
                    if !prepared.contains(system.as_str()) {
                        return Err(ScenarioError::NotPrepared { event: ev.id.clone(), system: system.clone() });
                    }
                    if prepared.contains(measurer.as_str()) {
                        return Err(invalid("a measurer cannot be a prepared system"));
                    }
                    measurers.insert(measurer);
                }
                EventKind::Meeting { participants } => {
                    if participants.len() < 2 {
                        return Err(invalid("a meeting needs at least two participants"));
                    }
                }
            }
            for p in ev.participants() {
                let key = self.systems.iter().find(|s| s.id == p).map(|s| s.id.as_str()).expect("checked");
                last.insert(key, ev);
            }
        }
        Ok(())
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Joint state a source prepares on `participants`.
pub fn source_state(participants: &[String], preset: Option<&str>, amplitudes: Option<&[[f64; 2]]>) -> Result<StateVector, String> {
    let k = participants.len();
    let relabel = |psi: StateVector, arity: usize| -> Result<StateVector, String> {
        if k != arity {
            return Err(format!("state preset needs {arity} participants, got {k}"));
        }
        StateVector::new(participants.to_vec(), psi.amplitudes().to_vec()).map_err(|e| e.to_string())
    };
    match (preset, amplitudes) {
        (Some(_), Some(_)) => Err("give either a state preset or amplitudes, not both".into()),
        (None, None) => Err("a source needs a state preset or amplitudes".into()),
        (None, Some(amps)) => {
            let amps: Vec<Complex64> = amps.iter().map(|[re, im]| c(*re, *im)).collect();
            StateVector::normalized(participants.to_vec(), amps).map_err(|e| e.to_string())
        }
        (Some(name), None) => {
            let single = |obs: Observable, o: Outcome| -> Result<StateVector, String> {
                let mut psi = StateVector::empty();
                for p in participants {
                    psi = psi.tensor(&StateVector::eigenstate(p, &obs, o)).map_err(|e| e.to_string())?;
                }
                Ok(psi)
            };
            match name {
                "epr" => relabel(correlations::epr_state(), 2),
                "ghz" => relabel(correlations::ghz_state(), 3),
                "source-pair" => relabel(correlations::source_pair_state(), 2),
                "up" => single(Observable::z(), Outcome::Up),
                "down" => single(Observable::z(), Outcome::Down),
                "plus" => single(Observable::x(), Outcome::Up),
                "minus" => single(Observable::x(), Outcome::Down),
                "plus-y" => single(Observable::y(), Outcome::Up),
                "minus-y" => single(Observable::y(), Outcome::Down),
                other => Err(format!("unknown state preset {other:?}")),
            }
        }
    }
}

/// One step in the making of a record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum RecordOp {
    Source { event: String, t: f64, labels: Vec<String>, amplitudes: Vec<[f64; 2]> },
    Couple { event: String, t: f64, system: String, pointer: String, setting: Setting },
}

impl RecordOp {
    pub fn event(&self) -> &str {
        match self {
            RecordOp::Source { event, .. } | RecordOp::Couple { event, .. } => event,
        }
    }

    pub fn t(&self) -> f64 {
        match self {
            RecordOp::Source { t, .. } | RecordOp::Couple { t, .. } => *t,
        }
    }
}

/// `(V† ⊗ V†) · CNOT · (V ⊗ I)` where `V` rotates the setting's eigenbasis
/// onto the computational basis: `|s⟩|0⟩ ↦ |s⟩|s⟩` for each eigenstate `|s⟩`.
pub fn coupling_unitary(system: &str, pointer: &str, setting: Setting) -> Result<Operator, HilbertError> {
    let v = setting.observable().to_computational();
    let v_op = Operator::single(system, v).tensor(&Operator::identity(vec![pointer])?)?;
    let back = Operator::single(system, v).tensor(&Operator::single(pointer, v))?.dagger();
    back.compose(&Operator::cnot(system, pointer)?)?.compose(&v_op)
}

/// The pointer's ready state `|↑_z⟩`.
pub fn ready_state(pointer: &str) -> StateVector {
    StateVector::eigenstate(pointer, &Observable::z(), Outcome::Up)
}

fn to_pairs(amps: &[Complex64]) -> Vec<[f64; 2]> {
    amps.iter().map(|a| [a.re, a.im]).collect()
}

fn replay(history: &[RecordOp]) -> Result<StateVector, HilbertError> {
    let mut state = StateVector::empty();
    for op in history {
        match op {
            RecordOp::Source { labels, amplitudes, .. } => {
                let psi = StateVector::new(labels.clone(), amplitudes.iter().map(|[re, im]| c(*re, *im)).collect())?;
                state = state.tensor(&psi)?;
            }
            RecordOp::Couple { system, pointer, setting, .. } => {
                if !state.contains(pointer) {
                    state = state.tensor(&ready_state(pointer))?;
                }
                state = apply(&coupling_unitary(system, pointer, *setting)?, &state)?;
            }
        }
    }
    Ok(state)
}

/// Wave-field value carried by a system: the joint state of every subsystem
/// whose history has reached it, with the events that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalRecord {
    value: StateVector,
    history: Vec<RecordOp>,
}

impl LocalRecord {
    pub fn empty() -> Self {
        LocalRecord { value: StateVector::empty(), history: Vec::new() }
    }

    /// Builds the record by replaying `history` (sorted by `(t, event)` first).
    pub fn from_history(mut history: Vec<RecordOp>) -> Result<Self, HilbertError> {
        history.sort_by(|a, b| a.t().total_cmp(&b.t()).then_with(|| a.event().cmp(b.event())));
        history.dedup_by(|a, b| a.event() == b.event());
        let value = replay(&history)?;
        Ok(LocalRecord { value, history })
    }

    /// Union of the histories of `records`, replayed.
    pub fn merge(records: &[&LocalRecord]) -> Result<Self, HilbertError> {
        LocalRecord::from_history(records.iter().flat_map(|r| r.history.iter().cloned()).collect())
    }

    pub fn extended(&self, op: RecordOp) -> Result<Self, HilbertError> {
        let mut history = self.history.clone();
        history.push(op);
        LocalRecord::from_history(history)
    }

    pub fn value(&self) -> &StateVector {
        &self.value
    }

    pub fn labels(&self) -> &[String] {
        self.value.labels()
    }

    pub fn history(&self) -> &[RecordOp] {
        &self.history
    }

    pub fn provenance(&self) -> BTreeSet<String> {
        self.history.iter().map(|op| op.event().to_string()).collect()
    }

    /// `(event, pointer, setting)` of every measurement in the history.
    pub fn measurements(&self) -> Vec<(String, String, Setting)> {
        self.history
            .iter()
            .filter_map(|op| match op {
                RecordOp::Couple { event, pointer, setting, .. } => Some((event.clone(), pointer.clone(), *setting)),
                RecordOp::Source { .. } => None,
            })
            .collect()
    }

    pub fn snapshot(&self) -> RecordSnapshot {
        RecordSnapshot::new(
            self.labels().to_vec(),
            to_pairs(self.value.amplitudes()),
            self.provenance().into_iter().collect(),
            self.history.clone(),
        )
    }
}

/// Serialized record as it appears in traces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordSnapshot {
    pub labels: Vec<String>,
    pub amplitudes: Vec<[f64; 2]>,
    pub provenance: Vec<String>,
    pub history: Vec<RecordOp>,
    pub digest: String,
}

impl RecordSnapshot {
    pub fn new(labels: Vec<String>, amplitudes: Vec<[f64; 2]>, provenance: Vec<String>, history: Vec<RecordOp>) -> Self {
        let digest = RecordSnapshot::compute_digest(&labels, &amplitudes, &provenance, &history);
        RecordSnapshot { labels, amplitudes, provenance, history, digest }
    }

    pub fn compute_digest(labels: &[String], amplitudes: &[[f64; 2]], provenance: &[String], history: &[RecordOp]) -> String {
        let bytes = serde_json::to_vec(&(labels, amplitudes, provenance, history)).expect("snapshot serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn recomputed_digest(&self) -> String {
        RecordSnapshot::compute_digest(&self.labels, &self.amplitudes, &self.provenance, &self.history)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub event: String,
    pub setting: Setting,
    pub value: Outcome,
}

/// One world-line copy of a system.
#[derive(Clone, Debug, PartialEq)]
pub struct Life {
    pub system: String,
    pub copy: usize,
    pub record: Arc<LocalRecord>,
    /// Measurements this life took part in, in order.
    pub log: Vec<LogEntry>,
    /// Outcomes this life has experienced or learned at meetings.
    pub known: BTreeMap<String, Outcome>,
}

impl Life {
    /// The outcome a measurement of `label` in `observable` would give, if
    /// the record makes it certain once conditioned on this life's known
    /// outcomes. `None` when uncertain or when `label` is not in the record.
    pub fn predict_with_certainty(&self, label: &str, observable: &Observable) -> Option<Outcome> {
        predict_with_certainty(&self.record, &self.known, label, observable)
    }
}

pub fn predict_with_certainty(
    record: &LocalRecord,
    known: &BTreeMap<String, Outcome>,
    label: &str,
    observable: &Observable,
) -> Option<Outcome> {
    if !record.value.contains(label) {
        return None;
    }
    let measurements = record.measurements();
    let observables: Vec<Observable> = measurements.iter().map(|(_, _, s)| s.observable()).collect();
    let conditions: Vec<(&str, &Observable, Outcome)> = measurements
        .iter()
        .zip(&observables)
        .filter_map(|((event, pointer, _), obs)| known.get(event).map(|o| (pointer.as_str(), obs, *o)))
        .collect();
    let (_, state) = record.value.conditioned(&conditions).ok()??;
    let dist = born_distribution(&state, &[(label, observable)]).ok()?;
    Outcome::BOTH.into_iter().find(|o| dist.probability(&[*o]) >= 1.0 - CERTAINTY_TOLERANCE)
}

/// A set of lives, one per participant, that share an outcome combination.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRecord {
    /// Outcomes of the known measurement events, in `known_events` order.
    pub tuple: Vec<Outcome>,
    /// Copy index per participant, in participant order.
    pub members: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

/// Interned per-life knowledge before and after an event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifeKeys {
    pub system: String,
    pub keys: Vec<BTreeMap<String, Outcome>>,
    pub pre: Vec<usize>,
    pub post: Vec<usize>,
}

impl LifeKeys {
    fn intern(system: &str, pre: &[BTreeMap<String, Outcome>], post: &[BTreeMap<String, Outcome>]) -> Self {
        let mut keys: Vec<BTreeMap<String, Outcome>> = Vec::new();
        let mut index = |k: &BTreeMap<String, Outcome>| match keys.iter().position(|x| x == k) {
            Some(i) => i,
            None => {
                keys.push(k.clone());
                keys.len() - 1
            }
        };
        let pre_idx: Vec<usize> = pre.iter().map(&mut index).collect();
        let post_idx: Vec<usize> = post.iter().map(&mut index).collect();
        LifeKeys { system: system.to_string(), keys, pre: pre_idx, post: post_idx }
    }

    pub fn pre_key(&self, copy: usize) -> &BTreeMap<String, Outcome> {
        &self.keys[self.pre[copy]]
    }

    pub fn post_key(&self, copy: usize) -> &BTreeMap<String, Outcome> {
        &self.keys[self.post[copy]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub outcome: Outcome,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub index: usize,
    pub id: String,
    pub kind: String,
    pub t: f64,
    pub x: f64,
    pub participants: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting: Option<Setting>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointer: Option<String>,
    pub inputs: Vec<RecordSnapshot>,
    pub outputs: Vec<RecordSnapshot>,
    pub known_events: Vec<String>,
    pub lives: Vec<LifeKeys>,
    pub groups: Vec<GroupRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residue: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<ClassCount>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub scenario: String,
    pub scenario_digest: String,
    pub seed: u64,
    pub n: usize,
    pub definition: Scenario,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
enum TraceLine {
    Header(TraceHeader),
    Event(TraceEvent),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace has no header line")]
    MissingHeader,
    #[error("trace line {0}: header appears more than once")]
    DuplicateHeader(usize),
}

/// Replayable event log: a header and one line per event.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceLog {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
}

impl TraceLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&TraceLine::Header(self.header.clone())).expect("header serializes");
        out.push('\n');
        for e in &self.events {
            out.push_str(&serde_json::to_string(&TraceLine::Event(e.clone())).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let mut header = None;
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TraceLine = serde_json::from_str(line).map_err(|e| TraceError::Parse { line: i + 1, message: e.to_string() })?;
            match parsed {
                TraceLine::Header(h) => {
                    if header.replace(h).is_some() {
                        return Err(TraceError::DuplicateHeader(i + 1));
                    }
                }
                TraceLine::Event(e) => events.push(e),
            }
        }
        Ok(TraceLog { header: header.ok_or(TraceError::MissingHeader)?, events })
    }

    pub fn event(&self, id: &str) -> Option<&TraceEvent> {
        self.events.iter().find(|e| e.id == id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementStats {
    pub event: String,
    pub measurer: String,
    pub system: String,
    pub setting: Setting,
    pub up: usize,
    pub down: usize,
    /// Born probability of `+1` from the post-measurement record.
    pub p_up: f64,
    pub unpaired: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeetingStats {
    pub event: String,
    pub participants: Vec<String>,
    pub events: Vec<String>,
    pub settings: String,
    /// Paired groups per outcome combination of `events`.
    pub counts: BTreeMap<Vec<Outcome>, usize>,
    /// Joint Born probabilities of `events` on the merged record.
    pub born: BTreeMap<Vec<Outcome>, f64>,
    pub unpaired: usize,
}

impl MeetingStats {
    pub fn pairs(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn fraction(&self, tuple: &[Outcome]) -> f64 {
        let total = self.pairs();
        if total == 0 {
            0.0
        } else {
            self.counts.get(tuple).copied().unwrap_or(0) as f64 / total as f64
        }
    }

    /// Groups per product of all known outcomes.
    pub fn product_counts(&self) -> BTreeMap<i8, usize> {
        let mut out = BTreeMap::new();
        for (tuple, count) in &self.counts {
            *out.entry(Outcome::product(tuple.iter().copied())).or_insert(0) += count;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunStatistics {
    pub n: usize,
    pub measurements: Vec<MeasurementStats>,
    pub meetings: Vec<MeetingStats>,
}

impl RunStatistics {
    pub fn meeting(&self, id: &str) -> Option<&MeetingStats> {
        self.meetings.iter().find(|m| m.event == id)
    }

    pub fn measurement(&self, id: &str) -> Option<&MeasurementStats> {
        self.measurements.iter().find(|m| m.event == id)
    }

    /// Comma-separated table with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,event,events,outcomes,count,fraction,born\n");
        let fmt_tuple = |t: &[Outcome]| t.iter().map(|o| o.to_string()).collect::<Vec<_>>().join("|");
        for m in &self.measurements {
            let total = (m.up + m.down).max(1) as f64;
            out.push_str(&format!("measurement,{},{},+1,{},{},{}\n", m.event, m.event, m.up, m.up as f64 / total, m.p_up));
            out.push_str(&format!("measurement,{},{},-1,{},{},{}\n", m.event, m.event, m.down, m.down as f64 / total, 1.0 - m.p_up));
        }
        for m in &self.meetings {
            for (tuple, p) in &m.born {
                let count = m.counts.get(tuple).copied().unwrap_or(0);
                if count == 0 && *p < SUPPORT_TOLERANCE {
                    continue;
                }
                out.push_str(&format!(
                    "meeting,{},{},{},{},{},{}\n",
                    m.event,
                    m.events.join("|"),
                    fmt_tuple(tuple),
                    count,
                    m.fraction(tuple),
                    p
                ));
            }
        }
        out
    }

    /// One line per settings word, over the meetings that know every
    /// measurement (or over all meetings with two or more known outcomes if
    /// none does): the dominant outcome product and its share of pairings.
    pub fn summary_lines(&self) -> Vec<String> {
        let all: BTreeSet<&str> = self.measurements.iter().map(|m| m.event.as_str()).collect();
        let complete: Vec<&MeetingStats> =
            self.meetings.iter().filter(|m| m.events.len() >= 2 && all.iter().all(|e| m.events.iter().any(|x| x == e))).collect();
        let chosen: Vec<&MeetingStats> =
            if complete.is_empty() { self.meetings.iter().filter(|m| m.events.len() >= 2).collect() } else { complete };
        let mut by_word: BTreeMap<&str, BTreeMap<i8, usize>> = BTreeMap::new();
        for m in chosen {
            let entry = by_word.entry(m.settings.as_str()).or_default();
            for (p, c) in m.product_counts() {
                *entry.entry(p).or_insert(0) += c;
            }
        }
        by_word
            .into_iter()
            .filter_map(|(word, counts)| {
                let total: usize = counts.values().sum();
                let (product, count) = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))?;
                let share = if *count == total { "100%".to_string() } else { format!("{:.1}%", 100.0 * *count as f64 / total as f64) };
                let sign = if *product > 0 { "+1" } else { "-1" };
                Some(format!("{word} product = {sign} in {share} of meetings"))
            })
            .collect()
    }
}

impl fmt::Display for RunStatistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.measurements {
            writeln!(
                f,
                "{} ({} measures {} in {}): +1 x {}, -1 x {} (Born p(+1) = {:.6})",
                m.event, m.measurer, m.system, m.setting, m.up, m.down, m.p_up
            )?;
        }
        for m in &self.meetings {
            let parts: Vec<String> =
                m.counts.iter().map(|(t, c)| format!("({}): {c}", t.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(","))).collect();
            writeln!(f, "{} [{}] over {}: {}", m.event, m.participants.join(","), m.events.join(","), parts.join(", "))?;
            if m.unpaired > 0 {
                writeln!(f, "  {} lives left unpaired by rounding", m.unpaired)?;
            }
        }
        for line in self.summary_lines() {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    pub id: String,
    pub record: Arc<LocalRecord>,
    pub lives: Vec<Life>,
}

/// Pairs lives into groups over the outcome combinations of `events`.
///
/// Combination counts are the largest-remainder apportionment of `n` over the
/// joint probabilities. Combinations are filled in lexicographic order from
/// the lowest compatible copy indices; a second pass pairs leftovers into any
/// combination with nonzero probability. Returns the groups sorted by
/// `(tuple, first member)` and the unpaired copies per participant.
fn form_groups(
    keys: &[Vec<BTreeMap<String, Outcome>>],
    events: &[String],
    dist: &[(Vec<Outcome>, f64)],
    n: usize,
) -> Result<(Vec<GroupRecord>, Vec<Vec<usize>>), ApportionError> {
    let weights: Vec<f64> = dist.iter().map(|(_, p)| if *p >= SUPPORT_TOLERANCE { *p } else { 0.0 }).collect();
    let counts = apportion_copies(n, &weights)?;
    let compatible =
        |key: &BTreeMap<String, Outcome>, tuple: &[Outcome]| events.iter().zip(tuple).all(|(e, o)| key.get(e).is_none_or(|k| k == o));
    let mut used: Vec<Vec<bool>> = keys.iter().map(|k| vec![false; k.len()]).collect();
    let mut groups = Vec::new();
    let take = |tuple: &[Outcome], used: &mut Vec<Vec<bool>>| -> Option<Vec<usize>> {
        let mut members = Vec::with_capacity(keys.len());
        for (p, lives) in keys.iter().enumerate() {
            let copy = (0..lives.len()).find(|&i| !used[p][i] && compatible(&lives[i], tuple))?;
            members.push(copy);
        }
        for (p, &copy) in members.iter().enumerate() {
            used[p][copy] = true;
        }
        Some(members)
    };
    for ((tuple, _), &count) in dist.iter().zip(&counts) {
        for _ in 0..count {
            match take(tuple, &mut used) {
                Some(members) => groups.push(GroupRecord { tuple: tuple.clone(), members, outcome: None }),
                None => break,
            }
        }
    }
    for ((tuple, _), w) in dist.iter().zip(&weights) {
        if *w <= 0.0 {
            continue;
        }
        while let Some(members) = take(tuple, &mut used) {
            groups.push(GroupRecord { tuple: tuple.clone(), members, outcome: None });
        }
    }
    groups.sort_by(|a, b| a.tuple.cmp(&b.tuple).then_with(|| a.members.cmp(&b.members)));
    let residue = used.iter().map(|u| (0..u.len()).filter(|&i| !u[i]).collect()).collect();
    Ok((groups, residue))
}

/// Rounds half up, treating values within 1e-9 of a half as halves.
fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

/// Number of `+1` outcomes per class when classes of sizes `sizes` have
/// conditional `+1` probabilities `p_up`: cumulative rounding, so each class
/// is within one of its quota and the total is within one half of `Σ size·p`.
pub fn split_classes(sizes: &[usize], p_up: &[f64]) -> Vec<usize> {
    let mut cumulative = 0.0;
    let mut assigned = 0usize;
    sizes
        .iter()
        .zip(p_up)
        .map(|(&size, &p)| {
            cumulative += size as f64 * p;
            let target = round_half_up(cumulative).max(assigned);
            let ups = (target - assigned).min(size);
            assigned += ups;
            ups
        })
        .collect()
}

/// The simulator state: every system's record and lives.
#[derive(Clone, Debug)]
pub struct Ensemble {
    n: usize,
    systems: Vec<SystemState>,
    pointer_counts: BTreeMap<String, usize>,
    rng: ChaCha8Rng,
    trace: Vec<TraceEvent>,
    stats: RunStatistics,
}

impl Ensemble {
    pub fn new(scenario: &Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let empty = Arc::new(LocalRecord::empty());
        let systems = scenario
            .systems
            .iter()
            .map(|s| SystemState {
                id: s.id.clone(),
                record: empty.clone(),
                lives: (0..scenario.n)
                    .map(|copy| Life { system: s.id.clone(), copy, record: empty.clone(), log: Vec::new(), known: BTreeMap::new() })
                    .collect(),
            })
            .collect();
        Ok(Ensemble {
            n: scenario.n,
            systems,
            pointer_counts: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            trace: Vec::new(),
            stats: RunStatistics { n: scenario.n, measurements: Vec::new(), meetings: Vec::new() },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn systems(&self) -> &[SystemState] {
        &self.systems
    }

    pub fn system(&self, id: &str) -> Option<&SystemState> {
        self.systems.iter().find(|s| s.id == id)
    }

    pub fn life(&self, system: &str, copy: usize) -> Option<&Life> {
        self.system(system).and_then(|s| s.lives.get(copy))
    }

    pub fn statistics(&self) -> &RunStatistics {
        &self.stats
    }

    fn index(&self, id: &str) -> usize {
        self.systems.iter().position(|s| s.id == id).expect("validated system id")
    }

    /// Prepares the participants in the source state.
    pub fn apply_source(&mut self, ev: &EventSpec) -> Result<(), ScenarioError> {
        let EventKind::Source { participants, state, amplitudes } = &ev.kind else {
            return Err(ScenarioError::InvalidEvent { event: ev.id.clone(), reason: "not a source".into() });
        };
        let psi = source_state(participants, state.as_deref(), amplitudes.as_deref())
            .map_err(|reason| ScenarioError::InvalidEvent { event: ev.id.clone(), reason })?;
        let op = RecordOp::Source { event: ev.id.clone(), t: ev.t, labels: participants.clone(), amplitudes: to_pairs(psi.amplitudes()) };
        self.process(ev, Some(op), None)
    }

    /// Couples a fresh pointer of the measurer to the system and splits the
    /// lives by outcome.
    pub fn apply_measurement(&mut self, ev: &EventSpec) -> Result<(), ScenarioError> {
        let EventKind::Measurement { measurer, system, setting, choose } = &ev.kind else {
            return Err(ScenarioError::InvalidEvent { event: ev.id.clone(), reason: "not a measurement".into() });
        };
        let setting = match setting {
            Some(s) => *s,
            None => choose[self.rng.random_range(0..choose.len())],
        };
        let count = self.pointer_counts.entry(measurer.clone()).or_insert(0);
        *count += 1;
        let pointer = if *count == 1 { measurer.clone() } else { format!("{measurer}~{count}") };
        let op = RecordOp::Couple { event: ev.id.clone(), t: ev.t, system: system.clone(), pointer, setting };
        self.process(ev, Some(op), Some(setting))
    }

    /// Merges the participants' records and pairs their lives.
    pub fn apply_meeting(&mut self, ev: &EventSpec) -> Result<(), ScenarioError> {
        if !matches!(ev.kind, EventKind::Meeting { .. }) {
            return Err(ScenarioError::InvalidEvent { event: ev.id.clone(), reason: "not a meeting".into() });
        }
        self.process(ev, None, None)
    }

    pub fn apply(&mut self, ev: &EventSpec) -> Result<(), ScenarioError> {
        match ev.kind {
            EventKind::Source { .. } => self.apply_source(ev),
            EventKind::Measurement { .. } => self.apply_measurement(ev),
            EventKind::Meeting { .. } => self.apply_meeting(ev),
        }
    }

    fn process(&mut self, ev: &EventSpec, op: Option<RecordOp>, setting: Option<Setting>) -> Result<(), ScenarioError> {
        let err = hilbert_err(&ev.id);
        let participants = ev.participants();
        let idx: Vec<usize> = participants.iter().map(|p| self.index(p)).collect();
        let inputs: Vec<Arc<LocalRecord>> = idx.iter().map(|&i| self.systems[i].record.clone()).collect();
        let merged = LocalRecord::merge(&inputs.iter().map(|r| r.as_ref()).collect::<Vec<_>>()).map_err(&err)?;
        let (out, pointer) = match op {
            Some(op) => {
                let pointer = match &op {
                    RecordOp::Couple { pointer, .. } => Some(pointer.clone()),
                    RecordOp::Source { .. } => None,
                };
                (merged.extended(op).map_err(&err)?, pointer)
            }
            None => (merged, None),
        };

        let known: Vec<(String, String, Setting)> = out.measurements().into_iter().filter(|(e, _, _)| *e != ev.id).collect();
        let known_events: Vec<String> = known.iter().map(|(e, _, _)| e.clone()).collect();
        let observables: Vec<Observable> = known.iter().map(|(_, _, s)| s.observable()).collect();
        let mut targets: Vec<(&str, &Observable)> = known.iter().zip(&observables).map(|((_, p, _), o)| (p.as_str(), o)).collect();
        let joint = born_distribution(out.value(), &targets).map_err(&err)?;
        let dist: Vec<(Vec<Outcome>, f64)> = joint.iter().map(|(t, p)| (t.clone(), p)).collect();

        let pre_keys: Vec<Vec<BTreeMap<String, Outcome>>> =
            idx.iter().map(|&i| self.systems[i].lives.iter().map(|l| l.known.clone()).collect()).collect();
        let (mut groups, residue) = form_groups(&pre_keys, &known_events, &dist, self.n)
            .map_err(|source| ScenarioError::Proportion { event: ev.id.clone(), source })?;

        let mut classes = Vec::new();
        if let (Some(setting), Some(pointer)) = (setting, pointer.as_ref()) {
            let obs = setting.observable();
            targets.push((pointer.as_str(), &obs));
            let full = born_distribution(out.value(), &targets).map_err(&err)?;
            let branches = full.iter().filter(|(_, p)| *p >= SUPPORT_TOLERANCE).count();
            if self.n < branches {
                return Err(ScenarioError::Proportion {
                    event: ev.id.clone(),
                    source: ApportionError::TooFewCopies { total: self.n, branches },
                });
            }
            // classes of equal tuples are contiguous after sorting
            let mut sizes = Vec::new();
            let mut p_up = Vec::new();
            let mut start = 0;
            while start < groups.len() {
                let tuple = groups[start].tuple.clone();
                let end = start + groups[start..].iter().take_while(|g| g.tuple == tuple).count();
                let mut up = tuple.clone();
                up.push(Outcome::Up);
                let mut down = tuple.clone();
                down.push(Outcome::Down);
                let (pu, pd) = (full.probability(&up), full.probability(&down));
                sizes.push(end - start);
                p_up.push(if pu + pd > 0.0 { pu / (pu + pd) } else { 0.0 });
                start = end;
            }
            let ups = split_classes(&sizes, &p_up);
            let mut start = 0;
            for (size, up) in sizes.iter().zip(ups) {
                for (k, g) in groups[start..start + size].iter_mut().enumerate() {
                    g.outcome = Some(if k < up { Outcome::Up } else { Outcome::Down });
                }
                start += size;
            }
            let up_total = groups.iter().filter(|g| g.outcome == Some(Outcome::Up)).count();
            classes = vec![
                ClassCount { outcome: Outcome::Up, count: up_total },
                ClassCount { outcome: Outcome::Down, count: groups.len() - up_total },
            ];
            let marginal = born_distribution(out.value(), &[(pointer.as_str(), &obs)]).map_err(&err)?;
            self.stats.measurements.push(MeasurementStats {
                event: ev.id.clone(),
                measurer: participants[0].clone(),
                system: participants[1].clone(),
                setting,
                up: up_total,
                down: groups.len() - up_total,
                p_up: marginal.probability(&[Outcome::Up]),
                unpaired: residue[0].len(),
            });
        }

        if matches!(ev.kind, EventKind::Meeting { .. }) {
            let mut counts: BTreeMap<Vec<Outcome>, usize> = BTreeMap::new();
            for g in &groups {
                *counts.entry(g.tuple.clone()).or_insert(0) += 1;
            }
            self.stats.meetings.push(MeetingStats {
                event: ev.id.clone(),
                participants: participants.clone(),
                events: known_events.clone(),
                settings: Setting::word(&known.iter().map(|(_, _, s)| *s).collect::<Vec<_>>()),
                counts,
                born: dist.iter().cloned().collect(),
                unpaired: residue.iter().map(Vec::len).sum(),
            });
        }

        // apply knowledge and outcomes to the lives
        let out = Arc::new(out);
        for g in &groups {
            let mut union: BTreeMap<String, Outcome> = BTreeMap::new();
            for (p, &copy) in g.members.iter().enumerate() {
                union.extend(pre_keys[p][copy].iter().map(|(k, v)| (k.clone(), *v)));
            }
            if let Some(o) = g.outcome {
                union.insert(ev.id.clone(), o);
            }
            for (p, &copy) in g.members.iter().enumerate() {
                let life = &mut self.systems[idx[p]].lives[copy];
                life.known = union.clone();
                if let (Some(o), Some(s)) = (g.outcome, setting) {
                    life.log.push(LogEntry { event: ev.id.clone(), setting: s, value: o });
                }
            }
        }
        for &i in &idx {
            self.systems[i].record = out.clone();
            for life in &mut self.systems[i].lives {
                life.record = out.clone();
            }
        }

        let lives = participants
            .iter()
            .zip(&idx)
            .zip(&pre_keys)
            .map(|((p, &i), pre)| {
                let post: Vec<BTreeMap<String, Outcome>> = self.systems[i].lives.iter().map(|l| l.known.clone()).collect();
                LifeKeys::intern(p, pre, &post)
            })
            .collect();
        let snapshot = out.snapshot();
        self.trace.push(TraceEvent {
            index: self.trace.len(),
            id: ev.id.clone(),
            kind: ev.kind_name().to_string(),
            t: ev.t,
            x: ev.x,
            participants: participants.clone(),
            setting,
            pointer,
            inputs: inputs.iter().map(|r| r.snapshot()).collect(),
            outputs: vec![snapshot; participants.len()],
            known_events,
            lives,
            groups,
            residue: if residue.iter().all(Vec::is_empty) { Vec::new() } else { residue },
            classes,
        });
        Ok(())
    }
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: TraceLog,
    pub stats: RunStatistics,
    pub ensemble: Ensemble,
}

/// Validates the scenario and processes its events in `(t, id)` order.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, ScenarioError> {
    let mut ensemble = Ensemble::new(scenario)?;
    for ev in scenario.ordered_events() {
        ensemble.apply(ev)?;
    }
    let header = TraceHeader {
        scenario: scenario.name.clone(),
        scenario_digest: scenario.digest(),
        seed: scenario.seed,
        n: scenario.n,
        definition: scenario.clone(),
    };
    let trace = TraceLog { header, events: std::mem::take(&mut ensemble.trace) };
    let stats = ensemble.stats.clone();
    Ok(RunOutput { trace, stats, ensemble })
}

/// Two-party EPR run: source at the origin, measurements at `(2, ∓1)` and a
/// meeting at `(4, 0)`.
pub fn epr_scenario(setting_a: Setting, setting_b: Setting, n: usize) -> Scenario {
    Scenario {
        name: format!("epr_{}{}", setting_a, setting_b).to_lowercase(),
        n,
        seed: 0,
        systems: vec![
            SystemSpec::with_path("a", vec![[0.0, 0.0], [2.0, -1.0]]),
            SystemSpec::with_path("b", vec![[0.0, 0.0], [2.0, 1.0]]),
            SystemSpec::with_path("A", vec![[0.0, -1.0], [2.0, -1.0], [4.0, 0.0]]),
            SystemSpec::with_path("B", vec![[0.0, 1.0], [2.0, 1.0], [4.0, 0.0]]),
        ],
        events: vec![
            EventSpec::source("S", 0.0, 0.0, &["a", "b"], "epr"),
            EventSpec::measurement("M_A", 2.0, -1.0, "A", "a", setting_a),
            EventSpec::measurement("M_B", 2.0, 1.0, "B", "b", setting_b),
            EventSpec::meeting("F", 4.0, 0.0, &["A", "B"]),
        ],
    }
}

/// Three-party GHZ run with pairwise meetings `F_AB`, `F_BC`, `F_AC`.
pub fn ghz_scenario(settings: [Setting; 3], n: usize) -> Scenario {
    Scenario {
        name: format!("ghz_{}", Setting::word(&settings)).to_lowercase(),
        n,
        seed: 0,
        systems: vec![
            SystemSpec::with_path("a", vec![[0.0, 0.0], [2.0, -1.0]]),
            SystemSpec::at_rest("b", 0.0),
            SystemSpec::with_path("c", vec![[0.0, 0.0], [2.0, 1.0]]),
            SystemSpec::with_path("A", vec![[0.0, -1.0], [2.0, -1.0], [3.0, 0.0], [5.0, 1.0]]),
            SystemSpec::with_path("B", vec![[0.0, 0.0], [3.0, 0.0], [4.0, 1.0]]),
            SystemSpec::at_rest("C", 1.0),
        ],
        events: vec![
            EventSpec::source("S", 0.0, 0.0, &["a", "b", "c"], "ghz"),
            EventSpec::measurement("M_A", 2.0, -1.0, "A", "a", settings[0]),
            EventSpec::measurement("M_B", 2.0, 0.0, "B", "b", settings[1]),
            EventSpec::measurement("M_C", 2.0, 1.0, "C", "c", settings[2]),
            EventSpec::meeting("F_AB", 3.0, 0.0, &["A", "B"]),
            EventSpec::meeting("F_BC", 4.0, 1.0, &["B", "C"]),
            EventSpec::meeting("F_AC", 5.0, 1.0, &["A", "C"]),
        ],
    }
}
