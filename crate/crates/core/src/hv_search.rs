//! Exhaustive hidden-variable searches over ±1 outcome tables.
//!
//! A table assigns each (party, setting) pair an outcome. Three families are
//! searched:
//!
//! * single-world tables (one outcome per pair);
//! * world-indexed tables for divergent global worlds, where each pair holds
//!   one outcome per world and a party's vector for a setting cannot depend on
//!   what the other parties chose;
//! * multivalued tables, where a pair holds a set of outcomes that must be
//!   closed under the correlation constraints.

use std::fmt;
use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

use crate::correlations::{Constraint, CorrelationError, CorrelationSpec};
use crate::hilbert::{outcome_tuples, Outcome, Setting};

/// Largest number of (party, setting) pairs any search accepts.
pub const MAX_PAIRS: usize = 20;
/// Largest number of free bits a world-indexed search enumerates.
pub const MAX_WORLD_BITS: usize = 24;
/// Largest number of pairs for the multivalued search (3^12 candidates).
pub const MAX_MULTIVALUED_PAIRS: usize = 12;
/// Witness lists are cut at this length; counts stay exact.
pub const WITNESS_LIMIT: usize = 1000;

const SYMBOLS: &[u8] = b"lmnopqrstuvwxyzabcdefghijk";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error(transparent)]
    Spec(#[from] CorrelationError),
    #[error("search space too large: {size} {what} exceeds the limit of {limit}")]
    SizeGuard { what: &'static str, size: usize, limit: usize },
    #[error("anchor {anchor} has {expected} satisfying outcome combinations, but {got} worlds were requested")]
    WorldCount { anchor: String, expected: usize, got: usize },
    #[error("world count must be at least 1")]
    NoWorlds,
    #[error("anchor constraint index {0} out of range")]
    AnchorOutOfRange(usize),
    #[error("no symbolic chain: substitutions never close on a constraint")]
    NoSymbolicChain,
}

/// One outcome held by a (party, setting) pair, optionally tagged with the
/// global world it belongs to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Entry {
    pub value: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub world: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub party: String,
    pub setting: Setting,
    pub entries: Vec<Entry>,
}

/// Hidden-variable table: one cell per (party, setting), party-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub cells: Vec<Cell>,
}

impl Assignment {
    pub fn get(&self, party: &str, setting: Setting) -> Option<&Cell> {
        self.cells.iter().find(|c| c.party == party && c.setting == setting)
    }

    /// Values held by a pair, in entry order.
    pub fn values(&self, party: &str, setting: Setting) -> Vec<Outcome> {
        self.get(party, setting).map(|c| c.entries.iter().map(|e| e.value).collect()).unwrap_or_default()
    }

    /// Total number of entries across all cells.
    pub fn cardinality(&self) -> usize {
        self.cells.iter().map(|c| c.entries.len()).sum()
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, cell) in self.cells.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "λ_{}^{} = ", cell.setting, cell.party)?;
            let tagged = cell.entries.iter().any(|e| e.world.is_some());
            if cell.entries.len() == 1 && !tagged {
                write!(f, "{}", cell.entries[0].value)?;
            } else {
                let (open, close) = if tagged { ("(", ")") } else { ("{", "}") };
                f.write_str(open)?;
                for (j, e) in cell.entries.iter().enumerate() {
                    if j > 0 {
                        f.write_str(", ")?;
                    }
                    match &e.world {
                        Some(w) => write!(f, "{}^{}", e.value, w)?,
                        None => write!(f, "{}", e.value)?,
                    }
                }
                f.write_str(close)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SearchMode {
    SingleWorld,
    Divergent { worlds: usize },
    Multivalued,
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchMode::SingleWorld => f.write_str("single-world"),
            SearchMode::Divergent { worlds } => write!(f, "divergent-{worlds}"),
            SearchMode::Multivalued => f.write_str("multivalued"),
        }
    }
}

/// Which outcome combinations a constraint realizes in a multivalued witness.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairingRule {
    pub constraint: String,
    pub combinations: Vec<Vec<Outcome>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchReport {
    pub mode: SearchMode,
    pub satisfiable: bool,
    pub witnesses: Vec<Assignment>,
    /// Exact number of witnesses, even when `witnesses` is truncated.
    pub witness_count: u64,
    pub truncated: bool,
    pub total_searched: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub worlds: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pairing_rules: Vec<PairingRule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<ContradictionTrace>,
}

impl SearchReport {
    fn empty(mode: SearchMode) -> Self {
        SearchReport {
            mode,
            satisfiable: false,
            witnesses: Vec::new(),
            witness_count: 0,
            truncated: false,
            total_searched: 0,
            worlds: Vec::new(),
            pairing_rules: Vec::new(),
            trace: None,
        }
    }

    /// Combines reports over disjoint ranges of the same search.
    pub fn merge(mut self, other: SearchReport) -> SearchReport {
        self.total_searched += other.total_searched;
        self.witness_count += other.witness_count;
        for w in other.witnesses {
            if self.witnesses.len() < WITNESS_LIMIT {
                self.witnesses.push(w);
            }
        }
        self.truncated = self.witness_count > self.witnesses.len() as u64;
        self.satisfiable = self.witness_count > 0;
        if self.trace.is_none() {
            self.trace = other.trace;
        }
        self
    }

    pub fn verdict(&self) -> &'static str {
        if self.satisfiable {
            "SAT"
        } else {
            "UNSAT"
        }
    }
}

impl fmt::Display for SearchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}, {} searched", self.verdict(), self.total_searched)?;
        writeln!(f, "mode: {}", self.mode)?;
        writeln!(f, "satisfiable: {}", self.satisfiable)?;
        writeln!(f, "total_searched: {}", self.total_searched)?;
        writeln!(f, "witness_count: {}{}", self.witness_count, if self.truncated { " (truncated)" } else { "" })?;
        if !self.worlds.is_empty() {
            writeln!(f, "worlds: {}", self.worlds.join(" "))?;
        }
        for w in &self.witnesses {
            writeln!(f, "witness: {w}")?;
        }
        for rule in &self.pairing_rules {
            let combos: Vec<String> =
                rule.combinations.iter().map(|c| format!("({})", c.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(","))).collect();
            writeln!(f, "pairing {}: {}", rule.constraint, combos.join(" "))?;
        }
        if let Some(trace) = &self.trace {
            write!(f, "{trace}")?;
        }
        Ok(())
    }
}

/// Index of the (party, setting) pair in party-major order.
fn pair_index(spec: &CorrelationSpec, party: usize, setting: Setting) -> usize {
    let s = spec.settings.iter().position(|x| *x == setting).expect("validated spec");
    party * spec.settings.len() + s
}

fn constraint_pairs(spec: &CorrelationSpec, con: &Constraint) -> Vec<usize> {
    con.settings.iter().enumerate().map(|(p, s)| pair_index(spec, p, *s)).collect()
}

fn check_size(what: &'static str, size: usize, limit: usize) -> Result<(), SearchError> {
    if size > limit {
        Err(SearchError::SizeGuard { what, size, limit })
    } else {
        Ok(())
    }
}

fn bit_outcome(mask: u64, bit: usize) -> Outcome {
    Outcome::from_bit(((mask >> bit) & 1) as usize)
}

fn single_world_assignment(spec: &CorrelationSpec, mask: u64) -> Assignment {
    let mut cells = Vec::new();
    for (p, party) in spec.parties.iter().enumerate() {
        for &s in &spec.settings {
            let value = bit_outcome(mask, pair_index(spec, p, s));
            cells.push(Cell { party: party.clone(), setting: s, entries: vec![Entry { value, world: None }] });
        }
    }
    Assignment { cells }
}

/// Scans the deterministic tables with indices in `range`.
pub fn enumerate_single_world_range(spec: &CorrelationSpec, range: Range<u64>) -> Result<SearchReport, SearchError> {
    spec.validate()?;
    let pairs = spec.parties.len() * spec.settings.len();
    check_size("(party, setting) pairs", pairs, MAX_PAIRS)?;
    let index_sets: Vec<(Vec<usize>, i8)> = spec.constraints.iter().map(|c| (constraint_pairs(spec, c), c.product)).collect();
    let end = range.end.min(1u64 << pairs);
    let mut report = SearchReport::empty(SearchMode::SingleWorld);
    for mask in range.start..end {
        report.total_searched += 1;
        let ok = index_sets.iter().all(|(idx, req)| Outcome::product(idx.iter().map(|&i| bit_outcome(mask, i))) == *req);
        if ok {
            report.witness_count += 1;
            if report.witnesses.len() < WITNESS_LIMIT {
                report.witnesses.push(single_world_assignment(spec, mask));
            }
        }
    }
    report.satisfiable = report.witness_count > 0;
    report.truncated = report.witness_count > report.witnesses.len() as u64;
    Ok(report)
}

/// Exhaustively checks all `2^(parties × settings)` single-world tables.
pub fn enumerate_single_world(spec: &CorrelationSpec) -> Result<SearchReport, SearchError> {
    spec.validate()?;
    let pairs = spec.parties.len() * spec.settings.len();
    check_size("(party, setting) pairs", pairs, MAX_PAIRS)?;
    let mut report = enumerate_single_world_range(spec, 0..1u64 << pairs)?;
    if !report.satisfiable {
        report.trace = derive_contradiction_trace(spec).ok();
    }
    Ok(report)
}

/// `±` times a product of free symbols (bitmask over symbol indices).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Monomial {
    pub sign: i8,
    pub symbols: u32,
}

impl Monomial {
    fn symbol(i: usize) -> Self {
        Monomial { sign: 1, symbols: 1 << i }
    }

    fn constant(sign: i8) -> Self {
        Monomial { sign, symbols: 0 }
    }

    fn times(self, other: Monomial) -> Monomial {
        Monomial { sign: self.sign * other.sign, symbols: self.symbols ^ other.symbols }
    }

    /// Replaces symbol `s` by `value` when present.
    fn substitute(self, s: usize, value: Monomial) -> Monomial {
        if self.symbols & (1 << s) == 0 {
            self
        } else {
            Monomial { sign: self.sign, symbols: self.symbols & !(1 << s) }.times(value)
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.symbols == 0 {
            return f.write_str(if self.sign > 0 { "+1" } else { "-1" });
        }
        if self.sign < 0 {
            f.write_str("-")?;
        }
        for (i, &c) in SYMBOLS.iter().enumerate() {
            if self.symbols & (1 << i) != 0 {
                write!(f, "{}", c as char)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    /// A free symbol is introduced for an undetermined pair.
    Fix,
    /// A constraint with one undetermined pair fixes it.
    Derive,
    /// A fully determined constraint is re-derived and agrees.
    Check,
    /// A fully determined constraint relates free symbols; one is eliminated.
    Substitute,
    /// A fully determined constraint forces a value opposite to the one held.
    Contradiction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub kind: StepKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint: Option<String>,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceOutcome {
    Contradiction,
    Consistent,
}

/// Symbolic substitution chain over the constraint set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContradictionTrace {
    pub steps: Vec<TraceStep>,
    pub outcome: TraceOutcome,
}

impl ContradictionTrace {
    pub fn is_contradiction(&self) -> bool {
        self.outcome == TraceOutcome::Contradiction
    }

    pub fn last_line(&self) -> &str {
        self.steps.last().map(|s| s.text.as_str()).unwrap_or("")
    }
}

impl fmt::Display for ContradictionTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            writeln!(f, "  {:>2}. {}", i + 1, s.text)?;
        }
        writeln!(
            f,
            "chain: {}",
            match self.outcome {
                TraceOutcome::Contradiction => "contradiction",
                TraceOutcome::Consistent => "consistent",
            }
        )
    }
}

/// Replays the constraint set symbolically: undetermined pairs get free
/// symbols `l, m, n, …`, constraints with one undetermined pair derive it, and
/// fully determined constraints are checked against the values already held.
///
/// Constraints that avoid the first fixed pair (the anchor) are preferred when
/// deriving, so a contradiction surfaces as a second value for the anchor.
/// Relations between free symbols are eliminated by substitution, which makes
/// the procedure decide satisfiability exactly.
pub fn derive_contradiction_trace(spec: &CorrelationSpec) -> Result<ContradictionTrace, SearchError> {
    spec.validate()?;
    let pairs = spec.parties.len() * spec.settings.len();
    check_size("(party, setting) pairs", pairs, MAX_PAIRS)?;
    let name = |idx: usize| {
        let party = &spec.parties[idx / spec.settings.len()];
        let setting = spec.settings[idx % spec.settings.len()];
        format!("λ_{setting}^{party}")
    };
    let cons: Vec<(Vec<usize>, i8, String)> =
        spec.constraints.iter().map(|c| (constraint_pairs(spec, c), c.product, c.to_string())).collect();

    let mut values: Vec<Option<Monomial>> = vec![None; pairs];
    let mut order: Vec<usize> = Vec::new();
    let mut used = vec![false; cons.len()];
    let mut steps = Vec::new();
    let mut next_symbol = 0usize;
    let mut anchor: Option<usize> = None;
    let mut closures = 0usize;

    loop {
        let unassigned = |idx: &[usize], values: &[Option<Monomial>]| idx.iter().filter(|&&i| values[i].is_none()).count();

        // derive from constraints with exactly one open pair, anchor-free first
        let forcing: Vec<usize> = (0..cons.len()).filter(|&k| !used[k] && unassigned(&cons[k].0, &values) == 1).collect();
        let pick = forcing.iter().copied().find(|&k| anchor.is_none_or(|a| !cons[k].0.contains(&a))).or_else(|| forcing.first().copied());
        if let Some(k) = pick {
            let (idx, req, label) = &cons[k];
            let target = *idx.iter().find(|&&i| values[i].is_none()).expect("one open pair");
            let others: Vec<usize> = idx.iter().copied().filter(|&i| i != target).collect();
            let value = others.iter().fold(Monomial::constant(*req), |acc, &i| acc.times(values[i].expect("assigned")));
            values[target] = Some(value);
            order.push(target);
            used[k] = true;
            let product = if others.is_empty() {
                String::new()
            } else {
                format!("{} = ", others.iter().map(|&i| name(i)).collect::<Vec<_>>().join(" "))
            };
            let sign = if *req < 0 && !others.is_empty() { "-" } else { "" };
            steps.push(TraceStep {
                kind: StepKind::Derive,
                constraint: Some(label.clone()),
                text: format!("{} = {sign}{product}{value} [from {label}]", name(target)),
            });
            continue;
        }

        // close a fully determined constraint
        if let Some(k) = (0..cons.len()).find(|&k| !used[k] && unassigned(&cons[k].0, &values) == 0) {
            used[k] = true;
            closures += 1;
            let (idx, req, label) = &cons[k];
            let target = match anchor {
                Some(a) if idx.contains(&a) => a,
                _ => *order.iter().rev().find(|i| idx.contains(i)).expect("assigned pair"),
            };
            let others: Vec<usize> = idx.iter().copied().filter(|&i| i != target).collect();
            let implied = others.iter().fold(Monomial::constant(*req), |acc, &i| acc.times(values[i].expect("assigned")));
            let held = values[target].expect("assigned");
            let sign = if *req < 0 { "-" } else { "" };
            let derivation = format!(
                "{} = {sign}{} = {implied} [from {label}]",
                name(target),
                others.iter().map(|&i| name(i)).collect::<Vec<_>>().join(" ")
            );
            let relation = implied.times(held);
            if relation == Monomial::constant(1) {
                steps.push(TraceStep { kind: StepKind::Check, constraint: Some(label.clone()), text: format!("{derivation}, consistent") });
            } else if relation.symbols == 0 {
                steps.push(TraceStep { kind: StepKind::Contradiction, constraint: Some(label.clone()), text: derivation });
                steps.push(TraceStep {
                    kind: StepKind::Contradiction,
                    constraint: None,
                    text: format!("{} = {implied} contradicts {} = {held}", name(target), name(target)),
                });
                return Ok(ContradictionTrace { steps, outcome: TraceOutcome::Contradiction });
            } else {
                // product of the symbols in `relation` equals relation.sign
                let eliminated = 31 - relation.symbols.leading_zeros() as usize;
                let rest = Monomial { sign: relation.sign, symbols: relation.symbols & !(1 << eliminated) };
                steps.push(TraceStep { kind: StepKind::Check, constraint: Some(label.clone()), text: derivation });
                steps.push(TraceStep {
                    kind: StepKind::Substitute,
                    constraint: Some(label.clone()),
                    text: format!("{} = {rest} [substituted everywhere]", SYMBOLS[eliminated] as char),
                });
                for v in values.iter_mut().flatten() {
                    *v = v.substitute(eliminated, rest);
                }
            }
            continue;
        }

        // introduce a free symbol for the first open pair of the first open constraint
        let open = (0..cons.len()).find(|&k| !used[k]).and_then(|k| cons[k].0.iter().copied().find(|&i| values[i].is_none()));
        match open {
            Some(i) => {
                let sym = Monomial::symbol(next_symbol);
                next_symbol += 1;
                values[i] = Some(sym);
                order.push(i);
                anchor.get_or_insert(i);
                steps.push(TraceStep { kind: StepKind::Fix, constraint: None, text: format!("{} = {sym} ∈ {{+1, -1}}", name(i)) });
            }
            None => break,
        }
    }
    if closures == 0 {
        return Err(SearchError::NoSymbolicChain);
    }
    Ok(ContradictionTrace { steps, outcome: TraceOutcome::Consistent })
}

/// How world tags are attached in the divergent-worlds search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorldRule {
    /// Worlds are the satisfying outcome combinations of the constraint at
    /// this index; the anchor's settings carry those combinations.
    Anchor(usize),
    /// Every pair carries a free vector; worlds are matched only by index.
    Independent,
}

struct WorldLayout {
    worlds: Vec<String>,
    /// Per pair: fixed per-world values, or `None` when the pair is free.
    fixed: Vec<Option<Vec<Outcome>>>,
    free_pairs: Vec<usize>,
}

fn world_layout(spec: &CorrelationSpec, world_count: usize, rule: WorldRule) -> Result<WorldLayout, SearchError> {
    spec.validate()?;
    if world_count == 0 {
        return Err(SearchError::NoWorlds);
    }
    let pairs = spec.parties.len() * spec.settings.len();
    check_size("(party, setting) pairs", pairs, MAX_PAIRS)?;
    let worlds: Vec<String> = (1..=world_count).map(|i| format!("w{i}")).collect();
    let mut fixed: Vec<Option<Vec<Outcome>>> = vec![None; pairs];
    if let WorldRule::Anchor(k) = rule {
        let anchor = spec.constraints.get(k).ok_or(SearchError::AnchorOutOfRange(k))?;
        let combos: Vec<Vec<Outcome>> =
            outcome_tuples(spec.parties.len()).filter(|t| Outcome::product(t.iter().copied()) == anchor.product).collect();
        if combos.len() != world_count {
            return Err(SearchError::WorldCount { anchor: anchor.to_string(), expected: combos.len(), got: world_count });
        }
        for (p, &s) in anchor.settings.iter().enumerate() {
            fixed[pair_index(spec, p, s)] = Some(combos.iter().map(|c| c[p]).collect());
        }
    }
    let free_pairs: Vec<usize> = (0..pairs).filter(|&i| fixed[i].is_none()).collect();
    check_size("free world-indexed bits", free_pairs.len() * world_count, MAX_WORLD_BITS)?;
    Ok(WorldLayout { worlds, fixed, free_pairs })
}

impl WorldLayout {
    fn value(&self, mask: u64, pair: usize, world: usize) -> Outcome {
        match &self.fixed[pair] {
            Some(v) => v[world],
            None => {
                let slot = self.free_pairs.iter().position(|&p| p == pair).expect("free pair");
                bit_outcome(mask, slot * self.worlds.len() + world)
            }
        }
    }

    fn space(&self) -> u64 {
        1u64 << (self.free_pairs.len() * self.worlds.len())
    }

    fn assignment(&self, spec: &CorrelationSpec, mask: u64, tagged: bool) -> Assignment {
        let mut cells = Vec::new();
        for (p, party) in spec.parties.iter().enumerate() {
            for &s in &spec.settings {
                let pair = pair_index(spec, p, s);
                let entries = (0..self.worlds.len())
                    .map(|w| Entry { value: self.value(mask, pair, w), world: tagged.then(|| self.worlds[w].clone()) })
                    .collect();
                cells.push(Cell { party: party.clone(), setting: s, entries });
            }
        }
        Assignment { cells }
    }
}

/// Searches world-indexed tables in which every world obeys every constraint
/// and each pair's vector is shared by all setting combinations (no
/// superdeterminism).
///
/// With the default anchor rule (`WorldRule::Anchor(0)`), the worlds are the
/// satisfying outcome combinations of the first constraint, so `world_count`
/// must equal their number. One world is the single-world search.
pub fn enumerate_divergent_worlds(spec: &CorrelationSpec, world_count: usize) -> Result<SearchReport, SearchError> {
    let rule = if world_count == 1 { WorldRule::Independent } else { WorldRule::Anchor(0) };
    enumerate_divergent_worlds_with(spec, world_count, rule)
}

pub fn enumerate_divergent_worlds_with(spec: &CorrelationSpec, world_count: usize, rule: WorldRule) -> Result<SearchReport, SearchError> {
    let layout = world_layout(spec, world_count, rule)?;
    let cons: Vec<(Vec<usize>, i8)> = spec.constraints.iter().map(|c| (constraint_pairs(spec, c), c.product)).collect();
    let mut report = SearchReport::empty(SearchMode::Divergent { worlds: world_count });
    report.worlds = layout.worlds.clone();
    let tagged = world_count > 1;
    for mask in 0..layout.space() {
        report.total_searched += 1;
        let ok =
            (0..world_count).all(|w| cons.iter().all(|(idx, req)| Outcome::product(idx.iter().map(|&i| layout.value(mask, i, w))) == *req));
        if ok {
            report.witness_count += 1;
            if report.witnesses.len() < WITNESS_LIMIT {
                report.witnesses.push(layout.assignment(spec, mask, tagged));
            }
        }
    }
    report.satisfiable = report.witness_count > 0;
    report.truncated = report.witness_count > report.witnesses.len() as u64;
    if !tagged {
        report.worlds.clear();
    }
    Ok(report)
}

/// For every world-indexed table that satisfies all constraints except the
/// one at `closing`, the per-world product of the closing constraint's
/// values. Used to show which value the remaining constraint is forced to.
pub fn closing_products(spec: &CorrelationSpec, world_count: usize, anchor: usize, closing: usize) -> Result<Vec<Vec<i8>>, SearchError> {
    let layout = world_layout(spec, world_count, WorldRule::Anchor(anchor))?;
    if closing >= spec.constraints.len() {
        return Err(SearchError::AnchorOutOfRange(closing));
    }
    let cons: Vec<(Vec<usize>, i8)> = spec.constraints.iter().map(|c| (constraint_pairs(spec, c), c.product)).collect();
    let mut out = Vec::new();
    for mask in 0..layout.space() {
        let survives = (0..world_count).all(|w| {
            cons.iter()
                .enumerate()
                .filter(|(k, _)| *k != closing)
                .all(|(_, (idx, req))| Outcome::product(idx.iter().map(|&i| layout.value(mask, i, w))) == *req)
        });
        if survives {
            let (idx, _) = &cons[closing];
            out.push((0..world_count).map(|w| Outcome::product(idx.iter().map(|&i| layout.value(mask, i, w)))).collect());
        }
    }
    Ok(out)
}

/// Extra condition on multivalued witnesses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarginalRule {
    /// Only closure under the constraints is required.
    ClosureOnly,
    /// Every pair that appears in a constraint must hold both outcomes: a
    /// perfect correlation whose members have fixed local values is no
    /// correlation at all.
    Uncertain,
}

const UP_ONLY: u8 = 1;
const DOWN_ONLY: u8 = 2;
const BOTH: u8 = 3;

fn set_values(code: u8) -> impl Iterator<Item = Outcome> {
    Outcome::BOTH.into_iter().filter(move |o| code & (1 << o.bit()) != 0)
}

fn multivalued_ok(cons: &[(Vec<usize>, i8)], sets: &[u8]) -> bool {
    for (idx, req) in cons {
        let mut any = false;
        let k = idx.len();
        // every combination of k-1 members forces the remaining member
        for combo in outcome_tuples(k) {
            let inside = combo.iter().zip(idx).all(|(o, &i)| sets[i] & (1 << o.bit()) != 0);
            if !inside {
                continue;
            }
            if Outcome::product(combo.iter().copied()) == *req {
                any = true;
            }
            for j in 0..k {
                let forced_value = Outcome::product(combo.iter().enumerate().filter(|(m, _)| *m != j).map(|(_, o)| *o)) * req;
                let forced = Outcome::from_value(forced_value).expect("±1");
                if sets[idx[j]] & (1 << forced.bit()) == 0 {
                    return false;
                }
            }
        }
        if !any {
            return false;
        }
    }
    true
}

/// Minimal-cardinality multivalued tables closed under the constraints:
/// whenever outcomes are held by all but one member of a constraint, the value
/// that completes the required product must be held by the last member.
pub fn many_worlds_witness(spec: &CorrelationSpec) -> Result<SearchReport, SearchError> {
    many_worlds_witness_with(spec, MarginalRule::Uncertain)
}

pub fn many_worlds_witness_with(spec: &CorrelationSpec, rule: MarginalRule) -> Result<SearchReport, SearchError> {
    spec.validate()?;
    let pairs = spec.parties.len() * spec.settings.len();
    check_size("(party, setting) pairs", pairs, MAX_MULTIVALUED_PAIRS)?;
    let cons: Vec<(Vec<usize>, i8)> = spec.constraints.iter().map(|c| (constraint_pairs(spec, c), c.product)).collect();
    let mut constrained = vec![false; pairs];
    for (idx, _) in &cons {
        for &i in idx {
            constrained[i] = true;
        }
    }
    let mut report = SearchReport::empty(SearchMode::Multivalued);
    let mut best: Option<usize> = None;
    let mut minimal: Vec<Vec<u8>> = Vec::new();
    let mut minimal_count = 0u64;
    let total = 3u64.pow(pairs as u32);
    let mut sets = vec![UP_ONLY; pairs];
    for code in 0..total {
        let mut c = code;
        for s in sets.iter_mut() {
            *s = [UP_ONLY, DOWN_ONLY, BOTH][(c % 3) as usize];
            c /= 3;
        }
        report.total_searched += 1;
        if rule == MarginalRule::Uncertain && sets.iter().zip(&constrained).any(|(&s, &k)| k && s != BOTH) {
            continue;
        }
        if !multivalued_ok(&cons, &sets) {
            continue;
        }
        let size: usize = sets.iter().map(|&s| if s == BOTH { 2 } else { 1 }).sum();
        match best {
            Some(b) if size > b => continue,
            Some(b) if size == b => {}
            _ => {
                best = Some(size);
                minimal.clear();
                minimal_count = 0;
            }
        }
        minimal_count += 1;
        if minimal.len() < WITNESS_LIMIT {
            minimal.push(sets.clone());
        }
    }
    report.witness_count = minimal_count;
    report.satisfiable = minimal_count > 0;
    report.truncated = minimal_count > minimal.len() as u64;
    for sets in &minimal {
        let mut cells = Vec::new();
        for (p, party) in spec.parties.iter().enumerate() {
            for &s in &spec.settings {
                let entries = set_values(sets[pair_index(spec, p, s)]).map(|value| Entry { value, world: None }).collect();
                cells.push(Cell { party: party.clone(), setting: s, entries });
            }
        }
        report.witnesses.push(Assignment { cells });
    }
    if let Some(first) = minimal.first() {
        report.pairing_rules = spec
            .constraints
            .iter()
            .zip(&cons)
            .map(|(con, (idx, req))| PairingRule {
                constraint: con.to_string(),
                combinations: outcome_tuples(idx.len())
                    .filter(|t| Outcome::product(t.iter().copied()) == *req)
                    .filter(|t| t.iter().zip(idx).all(|(o, &i)| first[i] & (1 << o.bit()) != 0))
                    .collect(),
            })
            .collect();
    }
    Ok(report)
}

/// Every deterministic two-party, two-setting strategy `(a, a', b, b')` with
/// its CHSH value `ab + ab' + a'b − a'b'`.
pub fn chsh_strategies() -> Vec<([Outcome; 4], i8)> {
    outcome_tuples(4)
        .map(|t| {
            let v: Vec<i8> = t.iter().map(|o| o.value()).collect();
            let s = v[0] * v[2] + v[0] * v[3] + v[1] * v[2] - v[1] * v[3];
            ([t[0], t[1], t[2], t[3]], s)
        })
        .collect()
}

/// Largest CHSH value over all 16 deterministic strategies.
pub fn chsh_classical_bound() -> f64 {
    f64::from(chsh_strategies().iter().map(|(_, s)| *s).max().expect("16 strategies"))
}
