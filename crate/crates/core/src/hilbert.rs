//! Dense complex linear algebra for few-qubit states.
//!
//! Every subsystem is a qubit. Amplitudes are indexed in Kronecker order: the
//! first label is the most significant bit, bit value 0 is `|↑_z⟩` and 1 is
//! `|↓_z⟩`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Comparison tolerance used throughout the crate.
pub const TOLERANCE: f64 = 1e-12;

/// Largest number of subsystems a state may carry.
pub const MAX_QUBITS: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("labels overlap in composition: {0:?}")]
    OverlappingLabels(Vec<String>),
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("expected {expected} amplitudes/entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),
    #[error("zero vector cannot be normalized")]
    ZeroVector,
    #[error("operator is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("partial trace needs at least one subsystem to keep")]
    EmptyKeep,
    #[error("{0} subsystems exceed the limit of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("label sets differ: {0:?} vs {1:?}")]
    LabelMismatch(Vec<String>, Vec<String>),
}

pub type Result<T, E = HilbertError> = std::result::Result<T, E>;

/// Measurement outcome of a ±1-valued spin observable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Outcome {
    Up,
    Down,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Up, Outcome::Down];

    pub fn value(self) -> i8 {
        match self {
            Outcome::Up => 1,
            Outcome::Down => -1,
        }
    }

    pub fn from_value(v: i8) -> Option<Self> {
        match v {
            1 => Some(Outcome::Up),
            -1 => Some(Outcome::Down),
            _ => None,
        }
    }

    /// Computational-basis bit: 0 for `Up`, 1 for `Down`.
    pub fn bit(self) -> usize {
        match self {
            Outcome::Up => 0,
            Outcome::Down => 1,
        }
    }

    pub fn from_bit(bit: usize) -> Self {
        if bit == 0 {
            Outcome::Up
        } else {
            Outcome::Down
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Outcome::Up => Outcome::Down,
            Outcome::Down => Outcome::Up,
        }
    }

    /// Product of ±1 values.
    pub fn product<I: IntoIterator<Item = Outcome>>(items: I) -> i8 {
        items.into_iter().map(Outcome::value).product()
    }
}

impl From<Outcome> for i8 {
    fn from(o: Outcome) -> i8 {
        o.value()
    }
}

impl TryFrom<i8> for Outcome {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        Outcome::from_value(v).ok_or_else(|| format!("outcome must be +1 or -1, got {v}"))
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Up => "+1",
            Outcome::Down => "-1",
        })
    }
}

/// One of the three Pauli spin settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Setting {
    X,
    Y,
    Z,
}

impl Setting {
    pub fn as_char(self) -> char {
        match self {
            Setting::X => 'X',
            Setting::Y => 'Y',
            Setting::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'X' => Some(Setting::X),
            'Y' => Some(Setting::Y),
            'Z' => Some(Setting::Z),
            _ => None,
        }
    }

    pub fn observable(self) -> Observable {
        match self {
            Setting::X => Observable::x(),
            Setting::Y => Observable::y(),
            Setting::Z => Observable::z(),
        }
    }

    /// Parses a string such as `"XYY"` into one setting per character.
    pub fn parse_word(word: &str) -> std::result::Result<Vec<Setting>, String> {
        word.chars().map(|c| Setting::from_char(c).ok_or_else(|| format!("unknown setting {c:?} in {word:?}"))).collect()
    }

    pub fn word(settings: &[Setting]) -> String {
        settings.iter().map(|s| s.as_char()).collect()
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for Setting {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Setting::from_char(c).ok_or_else(|| format!("unknown setting {s:?}")),
            _ => Err(format!("unknown setting {s:?}")),
        }
    }
}

impl TryFrom<String> for Setting {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Setting> for String {
    fn from(s: Setting) -> String {
        s.to_string()
    }
}

/// A ±1-valued spin observable `n·σ` with its two rank-1 eigenprojectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    name: String,
    up: [Complex64; 2],
    down: [Complex64; 2],
    exact: Option<[[Complex64; 2]; 2]>,
}

impl Observable {
    pub fn x() -> Self {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Observable { name: "X".into(), up: [h, h], down: [h, -h], exact: Some([[ZERO, ONE], [ONE, ZERO]]) }
    }

    pub fn y() -> Self {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let ih = Complex64::new(0.0, FRAC_1_SQRT_2);
        let i = Complex64::new(0.0, 1.0);
        Observable { name: "Y".into(), up: [h, ih], down: [h, -ih], exact: Some([[ZERO, -i], [i, ZERO]]) }
    }

    pub fn z() -> Self {
        Observable { name: "Z".into(), up: [ONE, ZERO], down: [ZERO, ONE], exact: Some([[ONE, ZERO], [ZERO, -ONE]]) }
    }

    /// Spin along the Bloch direction with polar angle `theta` and azimuth `phi`.
    pub fn spin(theta: f64, phi: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        let phase = Complex64::from_polar(1.0, phi);
        Observable {
            name: format!("spin({theta:.6},{phi:.6})"),
            up: [Complex64::new(c, 0.0), phase * s],
            down: [Complex64::new(s, 0.0), -phase * c],
            exact: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Normalized eigenvector for the given eigenvalue.
    pub fn eigenvector(&self, outcome: Outcome) -> [Complex64; 2] {
        match outcome {
            Outcome::Up => self.up,
            Outcome::Down => self.down,
        }
    }

    /// `|e⟩⟨e|` for the eigenvector of `outcome`, row-major.
    pub fn projector(&self, outcome: Outcome) -> [[Complex64; 2]; 2] {
        let e = self.eigenvector(outcome);
        [[e[0] * e[0].conj(), e[0] * e[1].conj()], [e[1] * e[0].conj(), e[1] * e[1].conj()]]
    }

    /// The 2×2 matrix `P₊ − P₋`.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        if let Some(m) = self.exact {
            return m;
        }
        let p = self.projector(Outcome::Up);
        let m = self.projector(Outcome::Down);
        [[p[0][0] - m[0][0], p[0][1] - m[0][1]], [p[1][0] - m[1][0], p[1][1] - m[1][1]]]
    }

    /// Rows are the conjugated eigenvectors: maps the eigenbasis onto the
    /// computational basis.
    pub(crate) fn to_computational(&self) -> [[Complex64; 2]; 2] {
        [[self.up[0].conj(), self.up[1].conj()], [self.down[0].conj(), self.down[1].conj()]]
    }

    /// Operator form acting on `label`.
    pub fn operator(&self, label: &str) -> Operator {
        let m = self.matrix();
        Operator { labels: vec![label.to_string()], matrix: vec![m[0][0], m[0][1], m[1][0], m[1][1]] }
    }
}

fn check_labels(labels: &[String]) -> Result<()> {
    if labels.len() > MAX_QUBITS {
        return Err(HilbertError::TooManyQubits(labels.len()));
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(HilbertError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

fn position(labels: &[String], label: &str) -> Result<usize> {
    labels.iter().position(|l| l == label).ok_or_else(|| HilbertError::UnknownLabel(label.to_string()))
}

#[inline]
fn bit_at(index: usize, pos: usize, n: usize) -> usize {
    (index >> (n - 1 - pos)) & 1
}

/// Sets the bits of `base` at `positions` to the bits of `sub`, whose most
/// significant bit goes to `positions[0]`.
#[inline]
fn scatter(base: usize, positions: &[usize], sub: usize, n: usize) -> usize {
    let k = positions.len();
    let mut idx = base;
    for (j, &p) in positions.iter().enumerate() {
        let mask = 1 << (n - 1 - p);
        if (sub >> (k - 1 - j)) & 1 == 1 {
            idx |= mask;
        } else {
            idx &= !mask;
        }
    }
    idx
}

fn gather(index: usize, positions: &[usize], n: usize) -> usize {
    positions.iter().fold(0, |acc, &p| (acc << 1) | bit_at(index, p, n))
}

/// Indices with every bit in `positions` cleared.
fn rest_indices(positions: &[usize], n: usize) -> impl Iterator<Item = usize> + '_ {
    let mask: usize = positions.iter().map(|&p| 1usize << (n - 1 - p)).sum();
    (0..1usize << n).filter(move |i| i & mask == 0)
}

/// Normalized pure state over labeled qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    labels: Vec<String>,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Validating constructor: labels unique, length `2^n`, unit norm.
    pub fn new<S: Into<String>>(labels: Vec<S>, amplitudes: Vec<Complex64>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        check_labels(&labels)?;
        let expected = 1usize << labels.len();
        if amplitudes.len() != expected {
            return Err(HilbertError::DimensionMismatch { expected, actual: amplitudes.len() });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > TOLERANCE {
            return Err(HilbertError::NotNormalized(norm));
        }
        Ok(StateVector { labels, amplitudes })
    }

    /// Like [`StateVector::new`] but rescales the amplitudes to unit norm.
    pub fn normalized<S: Into<String>>(labels: Vec<S>, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(HilbertError::ZeroVector);
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        check_labels(&labels)?;
        let expected = 1usize << labels.len();
        if amplitudes.len() != expected {
            return Err(HilbertError::DimensionMismatch { expected, actual: amplitudes.len() });
        }
        Ok(StateVector { labels, amplitudes })
    }

    /// The zero-qubit state (the scalar 1).
    pub fn empty() -> Self {
        StateVector { labels: Vec::new(), amplitudes: vec![ONE] }
    }

    /// Single qubit with the given (normalized) amplitudes.
    pub fn qubit(label: &str, amplitudes: [Complex64; 2]) -> Result<Self> {
        StateVector::new(vec![label], amplitudes.to_vec())
    }

    /// Eigenstate of `observable` with eigenvalue `outcome`.
    pub fn eigenstate(label: &str, observable: &Observable, outcome: Outcome) -> Self {
        StateVector { labels: vec![label.to_string()], amplitudes: observable.eigenvector(outcome).to_vec() }
    }

    /// Computational basis state, one outcome per label.
    pub fn basis(labels: &[&str], bits: &[Outcome]) -> Result<Self> {
        if labels.len() != bits.len() {
            return Err(HilbertError::DimensionMismatch { expected: labels.len(), actual: bits.len() });
        }
        let n = labels.len();
        let mut amplitudes = vec![ZERO; 1 << n];
        let index = bits.iter().fold(0, |acc, b| (acc << 1) | b.bit());
        amplitudes[index] = ONE;
        StateVector::new(labels.to_vec(), amplitudes)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Amplitude of the computational basis state given in label order.
    pub fn amplitude(&self, bits: &[Outcome]) -> Complex64 {
        let index = bits.iter().fold(0, |acc, b| (acc << 1) | b.bit());
        self.amplitudes[index]
    }

    /// Kronecker product; labels are concatenated.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let overlap: Vec<String> = self.labels.iter().filter(|l| other.labels.contains(l)).cloned().collect();
        if !overlap.is_empty() {
            return Err(HilbertError::OverlappingLabels(overlap));
        }
        let total = self.labels.len() + other.labels.len();
        if total > MAX_QUBITS {
            return Err(HilbertError::TooManyQubits(total));
        }
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        let amplitudes = self.amplitudes.iter().flat_map(|a| other.amplitudes.iter().map(move |b| a * b)).collect();
        Ok(StateVector { labels, amplitudes })
    }

    /// Reorders subsystems to `order`, which must be a permutation of the labels.
    pub fn permuted<S: AsRef<str>>(&self, order: &[S]) -> Result<StateVector> {
        if order.len() != self.labels.len() {
            return Err(HilbertError::LabelMismatch(self.labels.clone(), order.iter().map(|s| s.as_ref().to_string()).collect()));
        }
        let n = self.labels.len();
        let positions: Vec<usize> = order.iter().map(|l| position(&self.labels, l.as_ref())).collect::<Result<_>>()?;
        let labels: Vec<String> = order.iter().map(|s| s.as_ref().to_string()).collect();
        check_labels(&labels)?;
        let mut amplitudes = vec![ZERO; 1 << n];
        for (new_index, amp) in amplitudes.iter_mut().enumerate() {
            *amp = self.amplitudes[scatter(0, &positions, new_index, n)];
        }
        Ok(StateVector { labels, amplitudes })
    }

    /// The same state with labels sorted lexicographically.
    pub fn canonical(&self) -> StateVector {
        let mut order = self.labels.clone();
        order.sort();
        self.permuted(&order).expect("sorted labels are a permutation")
    }

    /// `⟨self|other⟩`; label sets must agree (order may differ).
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        let other = other.permuted(&self.labels)?;
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// Amplitude-wise comparison after aligning label order. No global-phase freedom.
    pub fn approx_eq(&self, other: &StateVector, tol: f64) -> bool {
        match other.permuted(&self.labels) {
            Ok(o) => self.amplitudes.iter().zip(&o.amplitudes).all(|(a, b)| (a - b).norm() <= tol),
            Err(_) => false,
        }
    }

    /// Applies a 2×2 matrix to one subsystem without normalization checks.
    fn apply_single(&self, pos: usize, m: &[[Complex64; 2]; 2]) -> StateVector {
        let n = self.labels.len();
        let mut out = self.amplitudes.clone();
        for base in rest_indices(&[pos], n) {
            let i0 = base;
            let i1 = scatter(base, &[pos], 1, n);
            let (a0, a1) = (self.amplitudes[i0], self.amplitudes[i1]);
            out[i0] = m[0][0] * a0 + m[0][1] * a1;
            out[i1] = m[1][0] * a0 + m[1][1] * a1;
        }
        StateVector { labels: self.labels.clone(), amplitudes: out }
    }

    /// Projects onto the given eigen-outcomes and renormalizes. Returns the
    /// probability of the projection alongside the conditional state, or
    /// `None` when that probability is below [`TOLERANCE`].
    pub fn conditioned(&self, conditions: &[(&str, &Observable, Outcome)]) -> Result<Option<(f64, StateVector)>> {
        let mut state = self.clone();
        for (label, observable, outcome) in conditions {
            let pos = position(&self.labels, label)?;
            state = state.apply_single(pos, &observable.projector(*outcome));
        }
        let p = state.norm_sqr();
        if p < TOLERANCE {
            return Ok(None);
        }
        let scale = p.sqrt();
        for a in &mut state.amplitudes {
            *a /= scale;
        }
        Ok(Some((p, state)))
    }

    /// Reduced density operator on `keep` (kept in this state's label order).
    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(HilbertError::EmptyKeep);
        }
        let n = self.labels.len();
        let mut keep_pos: Vec<usize> = keep.iter().map(|l| position(&self.labels, l.as_ref())).collect::<Result<_>>()?;
        keep_pos.sort_unstable();
        keep_pos.dedup();
        let labels: Vec<String> = keep_pos.iter().map(|&p| self.labels[p].clone()).collect();
        let k = keep_pos.len();
        let dim = 1 << k;
        let mut matrix = vec![ZERO; dim * dim];
        for rest in rest_indices(&keep_pos, n) {
            for i in 0..dim {
                let ai = self.amplitudes[scatter(rest, &keep_pos, i, n)];
                if ai == ZERO {
                    continue;
                }
                for j in 0..dim {
                    let aj = self.amplitudes[scatter(rest, &keep_pos, j, n)];
                    matrix[i * dim + j] += ai * aj.conj();
                }
            }
        }
        Ok(DensityOperator { labels, matrix })
    }
}

/// Square complex matrix over labeled qubits, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    labels: Vec<String>,
    matrix: Vec<Complex64>,
}

impl Operator {
    pub fn new<S: Into<String>>(labels: Vec<S>, matrix: Vec<Complex64>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        check_labels(&labels)?;
        let dim = 1usize << labels.len();
        if matrix.len() != dim * dim {
            return Err(HilbertError::DimensionMismatch { expected: dim * dim, actual: matrix.len() });
        }
        Ok(Operator { labels, matrix })
    }

    /// Constructs and checks `U†U = I`.
    pub fn unitary<S: Into<String>>(labels: Vec<S>, matrix: Vec<Complex64>) -> Result<Self> {
        let op = Operator::new(labels, matrix)?;
        let dev = op.unitarity_deviation();
        if dev > TOLERANCE {
            return Err(HilbertError::NotUnitary(dev));
        }
        Ok(op)
    }

    /// Constructs and checks `M = M†`.
    pub fn hermitian<S: Into<String>>(labels: Vec<S>, matrix: Vec<Complex64>) -> Result<Self> {
        let op = Operator::new(labels, matrix)?;
        let dev = op.hermiticity_deviation();
        if dev > TOLERANCE {
            return Err(HilbertError::NotHermitian(dev));
        }
        Ok(op)
    }

    pub fn identity<S: Into<String>>(labels: Vec<S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        check_labels(&labels)?;
        let dim = 1usize << labels.len();
        let mut matrix = vec![ZERO; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = ONE;
        }
        Ok(Operator { labels, matrix })
    }

    pub fn single(label: &str, m: [[Complex64; 2]; 2]) -> Self {
        Operator { labels: vec![label.to_string()], matrix: vec![m[0][0], m[0][1], m[1][0], m[1][1]] }
    }

    pub fn pauli_x(label: &str) -> Self {
        Observable::x().operator(label)
    }

    pub fn pauli_y(label: &str) -> Self {
        Observable::y().operator(label)
    }

    pub fn pauli_z(label: &str) -> Self {
        Observable::z().operator(label)
    }

    /// Controlled-NOT with `control` and `target` in that label order.
    pub fn cnot(control: &str, target: &str) -> Result<Self> {
        let mut m = vec![ZERO; 16];
        for (row, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            m[row * 4 + col] = ONE;
        }
        Operator::new(vec![control, target], m)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        1 << self.labels.len()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * self.dim() + col]
    }

    pub fn dagger(&self) -> Operator {
        let d = self.dim();
        let mut m = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                m[c * d + r] = self.matrix[r * d + c].conj();
            }
        }
        Operator { labels: self.labels.clone(), matrix: m }
    }

    /// Matrix product `self · other`; `other` is permuted to this label order.
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        let other = other.permuted(&self.labels)?;
        let d = self.dim();
        let mut m = vec![ZERO; d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.matrix[r * d + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..d {
                    m[r * d + c] += a * other.matrix[k * d + c];
                }
            }
        }
        Ok(Operator { labels: self.labels.clone(), matrix: m })
    }

    pub fn tensor(&self, other: &Operator) -> Result<Operator> {
        let overlap: Vec<String> = self.labels.iter().filter(|l| other.labels.contains(l)).cloned().collect();
        if !overlap.is_empty() {
            return Err(HilbertError::OverlappingLabels(overlap));
        }
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        check_labels(&labels)?;
        let (da, db) = (self.dim(), other.dim());
        let d = da * db;
        let mut m = vec![ZERO; d * d];
        for ra in 0..da {
            for ca in 0..da {
                let a = self.matrix[ra * da + ca];
                for rb in 0..db {
                    for cb in 0..db {
                        m[(ra * db + rb) * d + ca * db + cb] = a * other.matrix[rb * db + cb];
                    }
                }
            }
        }
        Ok(Operator { labels, matrix: m })
    }

    pub fn permuted<S: AsRef<str>>(&self, order: &[S]) -> Result<Operator> {
        if order.len() != self.labels.len() {
            return Err(HilbertError::LabelMismatch(self.labels.clone(), order.iter().map(|s| s.as_ref().to_string()).collect()));
        }
        let n = self.labels.len();
        let positions: Vec<usize> = order.iter().map(|l| position(&self.labels, l.as_ref())).collect::<Result<_>>()?;
        let d = self.dim();
        let mut m = vec![ZERO; d * d];
        for r in 0..d {
            let or = scatter(0, &positions, r, n);
            for c in 0..d {
                m[r * d + c] = self.matrix[or * d + scatter(0, &positions, c, n)];
            }
        }
        Ok(Operator { labels: order.iter().map(|s| s.as_ref().to_string()).collect(), matrix: m })
    }

    fn unitarity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                let v: Complex64 = (0..d).map(|k| self.matrix[k * d + r].conj() * self.matrix[k * d + c]).sum();
                let target = if r == c { ONE } else { ZERO };
                worst = worst.max((v - target).norm());
            }
        }
        worst
    }

    fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                worst = worst.max((self.matrix[r * d + c] - self.matrix[c * d + r].conj()).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_deviation() <= TOLERANCE
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_deviation() <= TOLERANCE
    }
}

/// Applies `op` to `psi`, acting as the identity on labels `op` does not name.
pub fn apply(op: &Operator, psi: &StateVector) -> Result<StateVector> {
    let n = psi.labels.len();
    let positions: Vec<usize> = op.labels.iter().map(|l| position(&psi.labels, l)).collect::<Result<_>>()?;
    let d = op.dim();
    let mut out = vec![ZERO; psi.amplitudes.len()];
    let mut column = vec![ZERO; d];
    for base in rest_indices(&positions, n) {
        for (j, slot) in column.iter_mut().enumerate() {
            *slot = psi.amplitudes[scatter(base, &positions, j, n)];
        }
        for i in 0..d {
            let v: Complex64 = (0..d).map(|j| op.matrix[i * d + j] * column[j]).sum();
            out[scatter(base, &positions, i, n)] = v;
        }
    }
    Ok(StateVector { labels: psi.labels.clone(), amplitudes: out })
}

/// Kronecker product of two states.
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    a.tensor(b)
}

/// Joint outcome distribution of a set of single-subsystem measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    labels: Vec<String>,
    probabilities: BTreeMap<Vec<Outcome>, f64>,
}

impl Distribution {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Probability of the outcome tuple (in `labels()` order); 0 if absent.
    pub fn probability(&self, outcomes: &[Outcome]) -> f64 {
        self.probabilities.get(outcomes).copied().unwrap_or(0.0)
    }

    /// All `2^k` outcome tuples in lexicographic order (`+1` before `-1`).
    pub fn iter(&self) -> impl Iterator<Item = (&Vec<Outcome>, f64)> {
        self.probabilities.iter().map(|(k, v)| (k, *v))
    }

    pub fn total(&self) -> f64 {
        self.probabilities.values().sum()
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

/// All outcome tuples of length `k` in lexicographic order.
pub fn outcome_tuples(k: usize) -> impl Iterator<Item = Vec<Outcome>> {
    (0..1usize << k).map(move |i| (0..k).map(|j| Outcome::from_bit((i >> (k - 1 - j)) & 1)).collect())
}

/// Born-rule probabilities of measuring each listed subsystem in the given
/// observable's eigenbasis.
pub fn born_distribution(psi: &StateVector, settings: &[(&str, &Observable)]) -> Result<Distribution> {
    let n = psi.labels.len();
    let mut positions = Vec::with_capacity(settings.len());
    for (i, (label, _)) in settings.iter().enumerate() {
        if settings[..i].iter().any(|(l, _)| l == label) {
            return Err(HilbertError::DuplicateLabel(label.to_string()));
        }
        positions.push(position(&psi.labels, label)?);
    }
    let mut rotated = psi.clone();
    for ((_, observable), &pos) in settings.iter().zip(&positions) {
        rotated = rotated.apply_single(pos, &observable.to_computational());
    }
    let k = settings.len();
    let mut probs = vec![0.0; 1 << k];
    for (index, amp) in rotated.amplitudes.iter().enumerate() {
        probs[gather(index, &positions, n)] += amp.norm_sqr();
    }
    let probabilities = outcome_tuples(k).zip(probs).collect();
    Ok(Distribution { labels: settings.iter().map(|(l, _)| l.to_string()).collect(), probabilities })
}

/// `⟨ψ| ⊗ᵢ Oᵢ |ψ⟩` for a product of single-subsystem observables.
pub fn expectation(psi: &StateVector, product: &[(&str, &Observable)]) -> Result<f64> {
    let dist = born_distribution(psi, product)?;
    Ok(dist.iter().map(|(outcomes, p)| p * f64::from(Outcome::product(outcomes.iter().copied()))).sum())
}

/// Mixed state over labeled qubits, row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    labels: Vec<String>,
    matrix: Vec<Complex64>,
}

impl DensityOperator {
    /// Validating constructor: Hermitian, unit trace, eigenvalues ≥ −1e-10.
    pub fn new<S: Into<String>>(labels: Vec<S>, matrix: Vec<Complex64>) -> Result<Self> {
        let op = Operator::hermitian(labels, matrix)?;
        let rho = DensityOperator { labels: op.labels, matrix: op.matrix };
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TOLERANCE || tr.im.abs() > TOLERANCE {
            return Err(HilbertError::NotNormalized(tr.re));
        }
        if rho.eigenvalues().iter().any(|&e| e < -1e-10) {
            return Err(HilbertError::NotHermitian(f64::NAN));
        }
        Ok(rho)
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let d = psi.amplitudes.len();
        let mut matrix = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                matrix[i * d + j] = psi.amplitudes[i] * psi.amplitudes[j].conj();
            }
        }
        DensityOperator { labels: psi.labels.clone(), matrix }
    }

    /// Maximally mixed state `I / 2^n`.
    pub fn maximally_mixed<S: Into<String>>(labels: Vec<S>) -> Result<Self> {
        let id = Operator::identity(labels)?;
        let d = id.dim() as f64;
        Ok(DensityOperator { labels: id.labels, matrix: id.matrix.into_iter().map(|v| v / d).collect() })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        1 << self.labels.len()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * self.dim() + col]
    }

    pub fn trace(&self) -> Complex64 {
        let d = self.dim();
        (0..d).map(|i| self.matrix[i * d + i]).sum()
    }

    pub fn is_hermitian(&self) -> bool {
        Operator { labels: self.labels.clone(), matrix: self.matrix.clone() }.is_hermitian()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let d = self.dim();
        let m = nalgebra::DMatrix::from_row_slice(d, d, &self.matrix);
        let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(|a, b| a.total_cmp(b));
        values
    }

    pub fn permuted<S: AsRef<str>>(&self, order: &[S]) -> Result<DensityOperator> {
        let op = Operator { labels: self.labels.clone(), matrix: self.matrix.clone() }.permuted(order)?;
        Ok(DensityOperator { labels: op.labels, matrix: op.matrix })
    }

    /// `⟨v|ρ|v⟩` for a pure state over the same labels.
    pub fn probability(&self, v: &StateVector) -> Result<f64> {
        let v = v.permuted(&self.labels)?;
        let d = self.dim();
        let mut acc = ZERO;
        for i in 0..d {
            for j in 0..d {
                acc += v.amplitudes[i].conj() * self.matrix[i * d + j] * v.amplitudes[j];
            }
        }
        Ok(acc.re)
    }

    pub fn approx_eq(&self, other: &DensityOperator, tol: f64) -> bool {
        match other.permuted(&self.labels) {
            Ok(o) => self.matrix.iter().zip(&o.matrix).all(|(a, b)| (a - b).norm() <= tol),
            Err(_) => false,
        }
    }

    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(HilbertError::EmptyKeep);
        }
        let n = self.labels.len();
        let mut keep_pos: Vec<usize> = keep.iter().map(|l| position(&self.labels, l.as_ref())).collect::<Result<_>>()?;
        keep_pos.sort_unstable();
        keep_pos.dedup();
        let labels: Vec<String> = keep_pos.iter().map(|&p| self.labels[p].clone()).collect();
        let dim = 1 << keep_pos.len();
        let full = self.dim();
        let mut matrix = vec![ZERO; dim * dim];
        for rest in rest_indices(&keep_pos, n) {
            for i in 0..dim {
                let r = scatter(rest, &keep_pos, i, n);
                for j in 0..dim {
                    matrix[i * dim + j] += self.matrix[r * full + scatter(rest, &keep_pos, j, n)];
                }
            }
        }
        Ok(DensityOperator { labels, matrix })
    }
}

impl From<&StateVector> for DensityOperator {
    fn from(psi: &StateVector) -> Self {
        DensityOperator::from_pure(psi)
    }
}

/// Anything a reduced state can be taken of.
pub trait PartialTrace {
    fn reduce(&self, keep: &[&str]) -> Result<DensityOperator>;
}

impl PartialTrace for StateVector {
    fn reduce(&self, keep: &[&str]) -> Result<DensityOperator> {
        self.partial_trace(keep)
    }
}

impl PartialTrace for DensityOperator {
    fn reduce(&self, keep: &[&str]) -> Result<DensityOperator> {
        self.partial_trace(keep)
    }
}

/// Reduced density operator of `rho` on `keep`.
pub fn partial_trace<T: PartialTrace + ?Sized>(rho: &T, keep: &[&str]) -> Result<DensityOperator> {
    rho.reduce(keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn tensor_of_basis_states() {
        let a = StateVector::basis(&["a"], &[Outcome::Up]).unwrap();
        let b = StateVector::basis(&["b"], &[Outcome::Up]).unwrap();
        let ab = tensor(&a, &b).unwrap();
        assert_eq!(ab.labels(), ["a", "b"]);
        assert_eq!(ab.amplitudes(), [c(1.0), c(0.0), c(0.0), c(0.0)]);
    }

    #[test]
    fn tensor_rejects_shared_labels() {
        let a = StateVector::basis(&["a"], &[Outcome::Up]).unwrap();
        assert_eq!(a.tensor(&a), Err(HilbertError::OverlappingLabels(vec!["a".into()])));
        let op = Operator::pauli_x("a");
        assert!(op.tensor(&op).is_err());
    }

    #[test]
    fn pauli_flip_and_identity() {
        let up = StateVector::basis(&["a"], &[Outcome::Up]).unwrap();
        let down = StateVector::basis(&["a"], &[Outcome::Down]).unwrap();
        assert!(apply(&Operator::pauli_x("a"), &up).unwrap().approx_eq(&down, TOLERANCE));
        let id = Operator::identity(vec!["a"]).unwrap();
        assert_eq!(apply(&id, &up).unwrap(), up);
    }

    #[test]
    fn apply_lifts_by_identity_and_respects_label_order() {
        // CNOT(b -> a) on |a=0, b=1> gives |a=1, b=1>
        let psi = StateVector::basis(&["a", "b"], &[Outcome::Up, Outcome::Down]).unwrap();
        let out = apply(&Operator::cnot("b", "a").unwrap(), &psi).unwrap();
        assert!(out.approx_eq(&StateVector::basis(&["a", "b"], &[Outcome::Down, Outcome::Down]).unwrap(), 0.0));
        let three = psi.tensor(&StateVector::basis(&["c"], &[Outcome::Up]).unwrap()).unwrap();
        let out = apply(&Operator::pauli_x("c"), &three).unwrap();
        assert_eq!(out.amplitude(&[Outcome::Up, Outcome::Down, Outcome::Down]), c(1.0));
    }

    #[test]
    fn apply_unknown_label_is_error() {
        let psi = StateVector::basis(&["a"], &[Outcome::Up]).unwrap();
        assert_eq!(apply(&Operator::pauli_x("q"), &psi), Err(HilbertError::UnknownLabel("q".into())));
    }

    #[test]
    fn constructor_validation() {
        assert!(matches!(StateVector::new(vec!["a"], vec![c(1.0), c(1.0)]), Err(HilbertError::NotNormalized(_))));
        assert!(matches!(StateVector::new(vec!["a"], vec![c(1.0)]), Err(HilbertError::DimensionMismatch { .. })));
        assert!(matches!(StateVector::new(vec!["a", "a"], vec![c(1.0), c(0.0), c(0.0), c(0.0)]), Err(HilbertError::DuplicateLabel(_))));
        assert!(matches!(Operator::unitary(vec!["a"], vec![c(1.0), c(1.0), c(0.0), c(1.0)]), Err(HilbertError::NotUnitary(_))));
        assert!(matches!(Operator::hermitian(vec!["a"], vec![c(0.0), c(1.0), c(0.0), c(0.0)]), Err(HilbertError::NotHermitian(_))));
        let labels: Vec<String> = (0..13).map(|i| format!("q{i}")).collect();
        assert!(matches!(Operator::identity(labels), Err(HilbertError::TooManyQubits(13))));
    }

    #[test]
    fn observables_have_complete_projectors() {
        for obs in [Observable::x(), Observable::y(), Observable::z(), Observable::spin(0.3, 1.1)] {
            let p = obs.projector(Outcome::Up);
            let m = obs.projector(Outcome::Down);
            for r in 0..2 {
                for col in 0..2 {
                    let id = if r == col { 1.0 } else { 0.0 };
                    assert!((p[r][col] + m[r][col] - c(id)).norm() < TOLERANCE);
                }
            }
            let op = Operator::hermitian(vec!["q"], obs.operator("q").matrix().to_vec()).unwrap();
            let square = op.compose(&op).unwrap();
            assert!(square.approx_identity());
        }
    }

    impl Operator {
        fn approx_identity(&self) -> bool {
            let d = self.dim();
            (0..d).all(|r| (0..d).all(|col| (self.entry(r, col) - if r == col { ONE } else { ZERO }).norm() < TOLERANCE))
        }
    }

    #[test]
    fn eigenstate_distribution_is_certain() {
        let up = StateVector::basis(&["a"], &[Outcome::Up]).unwrap();
        let d = born_distribution(&up, &[("a", &Observable::z())]).unwrap();
        assert_eq!(d.probability(&[Outcome::Up]), 1.0);
        assert_eq!(d.probability(&[Outcome::Down]), 0.0);
    }

    #[test]
    fn duplicate_measured_label_is_error() {
        let up = StateVector::basis(&["a"], &[Outcome::Up]).unwrap();
        let z = Observable::z();
        assert!(born_distribution(&up, &[("a", &z), ("a", &z)]).is_err());
        assert!(born_distribution(&up, &[("b", &z)]).is_err());
    }

    #[test]
    fn product_eigenstate_expectation() {
        let psi = StateVector::basis(&["a", "b"], &[Outcome::Up, Outcome::Up]).unwrap();
        let z = Observable::z();
        assert_eq!(expectation(&psi, &[("a", &z), ("b", &z)]).unwrap(), 1.0);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let psi = StateVector::basis(&["a", "b"], &[Outcome::Up, Outcome::Up]).unwrap();
        let rho = partial_trace(&psi, &["a"]).unwrap();
        assert_eq!(rho.labels(), ["a"]);
        assert_eq!(rho.matrix(), [c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert_eq!(partial_trace(&psi, &[]), Err(HilbertError::EmptyKeep));
        assert!(partial_trace(&psi, &["z"]).is_err());
    }

    #[test]
    fn density_routes_agree() {
        let psi =
            StateVector::normalized(vec!["a", "b", "c"], (0..8).map(|i| Complex64::new(i as f64 + 0.5, (i as f64) * 0.25 - 1.0)).collect())
                .unwrap();
        let direct = psi.partial_trace(&["c", "a"]).unwrap();
        let via = DensityOperator::from_pure(&psi).partial_trace(&["a", "c"]).unwrap();
        assert!(direct.approx_eq(&via, 1e-12));
        let all = DensityOperator::from_pure(&psi).partial_trace(&["a", "b", "c"]).unwrap();
        assert!(all.approx_eq(&DensityOperator::from_pure(&psi), 0.0));
        assert!(DensityOperator::new(direct.labels().to_vec(), direct.matrix().to_vec()).is_ok());
    }

    #[test]
    fn permutation_round_trip() {
        let psi = StateVector::normalized(vec!["b", "a"], vec![c(1.0), c(2.0), c(3.0), c(4.0)]).unwrap();
        let canon = psi.canonical();
        assert_eq!(canon.labels(), ["a", "b"]);
        // amplitude of a=1,b=0 equals original b=0,a=1
        assert_eq!(canon.amplitude(&[Outcome::Down, Outcome::Up]), psi.amplitude(&[Outcome::Up, Outcome::Down]));
        assert!(psi.approx_eq(&canon, 0.0));
        assert!((psi.inner(&canon).unwrap().re - 1.0).abs() < TOLERANCE);
    }

    #[test]
    fn conditioning_projects_and_renormalizes() {
        let h = FRAC_1_SQRT_2;
        let bell = StateVector::new(vec!["a", "b"], vec![c(h), c(0.0), c(0.0), c(h)]).unwrap();
        let z = Observable::z();
        let (p, cond) = bell.conditioned(&[("a", &z, Outcome::Down)]).unwrap().unwrap();
        assert!((p - 0.5).abs() < TOLERANCE);
        assert!((cond.amplitude(&[Outcome::Down, Outcome::Down]).re - 1.0).abs() < TOLERANCE);
        let x = Observable::x();
        let up = StateVector::basis(&["a"], &[Outcome::Up]).unwrap();
        assert!(up.conditioned(&[("a", &z, Outcome::Down)]).unwrap().is_none());
        assert!(up.conditioned(&[("a", &x, Outcome::Down)]).unwrap().is_some());
    }

    #[test]
    fn outcome_and_setting_serde() {
        assert_eq!(serde_json::to_string(&Outcome::Down).unwrap(), "-1");
        assert_eq!(serde_json::from_str::<Outcome>("1").unwrap(), Outcome::Up);
        assert!(serde_json::from_str::<Outcome>("0").is_err());
        assert_eq!(serde_json::to_string(&Setting::Y).unwrap(), "\"Y\"");
        assert_eq!(Setting::parse_word("xyY").unwrap(), vec![Setting::X, Setting::Y, Setting::Y]);
        assert!(Setting::parse_word("XQ").is_err());
    }
}
