//! Canonical entangled states, perfect-correlation specifications and the
//! checks that tie them to the Hilbert-space engine.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{self, born_distribution, expectation, HilbertError, Observable, Outcome, Setting, StateVector};

/// Expectation tolerance for declaring a constraint satisfied.
pub const EXPECTATION_TOLERANCE: f64 = 1e-10;

/// Probability below which a violating outcome tuple counts as absent.
pub const SUPPORT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelationError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error("invalid correlation spec: {0}")]
    InvalidSpec(String),
    #[error("spec party {0:?} is not a subsystem of the state")]
    LabelMismatch(String),
    #[error("partition must be a disjoint cover of the state's labels")]
    NotPartition,
    #[error("expected a 2-qubit state, got {0} qubits")]
    WrongArity(usize),
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `(|↑_z↑_z⟩ − |↓_z↓_z⟩)/√2` on subsystems `a`, `b`.
pub fn epr_state() -> StateVector {
    let h = FRAC_1_SQRT_2;
    StateVector::new(vec!["a", "b"], vec![c(h), c(0.0), c(0.0), c(-h)]).expect("normalized")
}

/// `(|↑_z↑_z↑_z⟩ − |↓_z↓_z↓_z⟩)/√2` on `a`, `b`, `c`.
///
/// This sign convention is the one that satisfies [`CorrelationSpec::ghz`];
/// `tests/correlations.rs` checks it against the constraint set.
pub fn ghz_state() -> StateVector {
    let h = FRAC_1_SQRT_2;
    let mut amps = vec![c(0.0); 8];
    amps[0] = c(h);
    amps[7] = c(-h);
    StateVector::new(vec!["a", "b", "c"], amps).expect("normalized")
}

/// `(|↑_x↑_x⟩ + |↓_x↓_x⟩)/√2` on `a`, `b`: the wave-field value at the source
/// event of the local-worlds Bell experiment.
pub fn source_pair_state() -> StateVector {
    correlated_x_branches(&["a", "b"])
}

/// `(|↑_x⟩^{⊗k} + |↓_x⟩^{⊗k})/√2` over the given labels.
pub fn correlated_x_branches(labels: &[&str]) -> StateVector {
    let x = Observable::x();
    let branch = |o: Outcome| {
        labels
            .iter()
            .map(|l| StateVector::eigenstate(l, &x, o))
            .reduce(|a, b| a.tensor(&b).expect("distinct labels"))
            .expect("at least one label")
    };
    let up = branch(Outcome::Up);
    let down = branch(Outcome::Down);
    let amps = up.amplitudes().iter().zip(down.amplitudes()).map(|(u, d)| (u + d) * FRAC_1_SQRT_2).collect();
    StateVector::normalized(labels.to_vec(), amps).expect("nonzero")
}

/// State after both Alice (`A`) and Bob (`B`) measured `x`-spin on `a` and
/// `b`: `(|↑↑↑↑⟩ + |↓↓↓↓⟩)/√2` over `a, A, b, B` in the `x` basis.
pub fn both_measured_state() -> StateVector {
    correlated_x_branches(&["a", "A", "b", "B"])
}

/// One perfect correlation: the product of outcomes under `settings` (one per
/// party, in party order) always equals `product`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    #[serde(with = "setting_word")]
    pub settings: Vec<Setting>,
    pub product: i8,
}

impl Constraint {
    pub fn new(word: &str, product: i8) -> Self {
        Constraint { settings: Setting::parse_word(word).expect("valid setting word"), product }
    }

    pub fn word(&self) -> String {
        Setting::word(&self.settings)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.word(), if self.product > 0 { "+1" } else { "-1" })
    }
}

mod setting_word {
    use super::Setting;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(settings: &[Setting], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&Setting::word(settings))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Setting>, D::Error> {
        let word = String::deserialize(d)?;
        Setting::parse_word(&word).map_err(serde::de::Error::custom)
    }
}

/// Parties, the finite setting alphabet each party chooses from, and the
/// perfect correlations they must obey.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub parties: Vec<String>,
    pub settings: Vec<Setting>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
}

impl CorrelationSpec {
    /// `XXX=-1, YYX=+1, XYY=+1, YXY=+1` for Alice, Bob and Charlie.
    pub fn ghz() -> Self {
        Self::ghz_for(["A", "B", "C"])
    }

    pub fn ghz_for<S: Into<String>>(parties: [S; 3]) -> Self {
        CorrelationSpec {
            parties: parties.into_iter().map(Into::into).collect(),
            settings: vec![Setting::X, Setting::Y],
            constraints: vec![Constraint::new("XXX", -1), Constraint::new("YYX", 1), Constraint::new("XYY", 1), Constraint::new("YXY", 1)],
        }
    }

    pub fn new<S: Into<String>>(parties: Vec<S>, settings: Vec<Setting>, constraints: Vec<Constraint>) -> Result<Self, CorrelationError> {
        let spec = CorrelationSpec { parties: parties.into_iter().map(Into::into).collect(), settings, constraints };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CorrelationError> {
        if self.parties.is_empty() {
            return Err(CorrelationError::InvalidSpec("no parties".into()));
        }
        for (i, p) in self.parties.iter().enumerate() {
            if self.parties[..i].contains(p) {
                return Err(CorrelationError::InvalidSpec(format!("duplicate party {p:?}")));
            }
        }
        if self.settings.is_empty() {
            return Err(CorrelationError::InvalidSpec("no settings".into()));
        }
        for (i, s) in self.settings.iter().enumerate() {
            if self.settings[..i].contains(s) {
                return Err(CorrelationError::InvalidSpec(format!("duplicate setting {s}")));
            }
        }
        for con in &self.constraints {
            if con.settings.len() != self.parties.len() {
                return Err(CorrelationError::InvalidSpec(format!(
                    "constraint {} has {} settings for {} parties",
                    con.word(),
                    con.settings.len(),
                    self.parties.len()
                )));
            }
            if let Some(s) = con.settings.iter().find(|s| !self.settings.contains(s)) {
                return Err(CorrelationError::InvalidSpec(format!("constraint {} uses undeclared setting {s}", con.word())));
            }
            if con.product != 1 && con.product != -1 {
                return Err(CorrelationError::InvalidSpec(format!("required product must be +1 or -1, got {}", con.product)));
            }
        }
        Ok(())
    }

    /// Same constraints with the parties renamed (e.g. to subsystem labels).
    pub fn with_parties<S: Into<String>>(&self, parties: Vec<S>) -> Result<Self, CorrelationError> {
        CorrelationSpec::new(parties, self.settings.clone(), self.constraints.clone())
    }

    pub fn from_toml(text: &str) -> Result<Self, CorrelationError> {
        let spec: CorrelationSpec = toml::from_str(text).map_err(|e| CorrelationError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }
}

/// Outcome of checking one constraint against a state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub constraint: Constraint,
    pub measured: f64,
    /// Total probability of outcome tuples whose product violates the constraint.
    pub violating_support: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub checks: Vec<ConstraintCheck>,
    pub pass: bool,
}

/// Checks every constraint of `spec` on `psi`, both as an expectation value and
/// as a support condition (violating tuples must have zero probability).
pub fn verify_spec(psi: &StateVector, spec: &CorrelationSpec) -> Result<CorrelationReport, CorrelationError> {
    spec.validate()?;
    if let Some(p) = spec.parties.iter().find(|p| !psi.contains(p)) {
        return Err(CorrelationError::LabelMismatch(p.clone()));
    }
    let mut checks = Vec::with_capacity(spec.constraints.len());
    for con in &spec.constraints {
        let observables: Vec<Observable> = con.settings.iter().map(|s| s.observable()).collect();
        let settings: Vec<(&str, &Observable)> = spec.parties.iter().map(String::as_str).zip(&observables).collect();
        let measured = expectation(psi, &settings)?;
        let dist = born_distribution(psi, &settings)?;
        let violating_support: f64 =
            dist.iter().filter(|(outcomes, _)| Outcome::product(outcomes.iter().copied()) != con.product).map(|(_, p)| p).sum();
        let satisfied = (measured - f64::from(con.product)).abs() < EXPECTATION_TOLERANCE && violating_support < SUPPORT_TOLERANCE;
        checks.push(ConstraintCheck { constraint: con.clone(), measured, violating_support, satisfied });
    }
    let pass = checks.iter().all(|c| c.satisfied);
    Ok(CorrelationReport { checks, pass })
}

/// Product of locally computed probabilities versus the joint probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Insufficiency {
    /// `Tr(ρ_L P_L) · Tr(ρ_R P_R)` from the reduced states.
    pub lhs: f64,
    /// `|⟨ψ|(l ⊗ r)⟩|²` from the joint state.
    pub rhs: f64,
    pub gap: f64,
}

/// Compares what the two reduced density operators predict for the joint
/// projection onto `left_vector ⊗ right_vector` with what the full state
/// predicts. A nonzero gap means the reduced states cannot encode the
/// correlation.
pub fn reduced_state_insufficiency(
    psi: &StateVector,
    left: &[&str],
    right: &[&str],
    left_vector: &StateVector,
    right_vector: &StateVector,
) -> Result<Insufficiency, CorrelationError> {
    let covers = left.len() + right.len() == psi.num_qubits()
        && left.iter().chain(right).all(|l| psi.contains(l))
        && !left.iter().any(|l| right.contains(l));
    if !covers || left.is_empty() || right.is_empty() {
        return Err(CorrelationError::NotPartition);
    }
    let rho_left = psi.partial_trace(left)?;
    let rho_right = psi.partial_trace(right)?;
    let lhs = rho_left.probability(left_vector)? * rho_right.probability(right_vector)?;
    let joint = left_vector.tensor(right_vector)?;
    let rhs = psi.inner(&joint)?.norm_sqr();
    Ok(Insufficiency { lhs, rhs, gap: (lhs - rhs).abs() })
}

/// `E(a,b) + E(a,b') + E(a',b) − E(a',b')` on a two-qubit state; the first
/// label is measured with `a`/`a2`, the second with `b`/`b2`.
pub fn chsh_value(psi: &StateVector, a: &Observable, a2: &Observable, b: &Observable, b2: &Observable) -> Result<f64, CorrelationError> {
    if psi.num_qubits() != 2 {
        return Err(CorrelationError::WrongArity(psi.num_qubits()));
    }
    let (la, lb) = (psi.labels()[0].as_str(), psi.labels()[1].as_str());
    let e = |x: &Observable, y: &Observable| hilbert::expectation(psi, &[(la, x), (lb, y)]);
    Ok(e(a, b)? + e(a, b2)? + e(a2, b)? - e(a2, b2)?)
}
