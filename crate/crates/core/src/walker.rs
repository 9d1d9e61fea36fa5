//! Walker configurations and the sparse state algebra.
//!
//! A register is an ordered train of subsystems (address walkers, data
//! walkers and, in the backup variant, their backups). Each subsystem is
//! either empty or holds a walker with a color, and sits somewhere on the
//! routing tree. A [`BasisConfig`] fixes all of that for every subsystem; a
//! [`QState`] is a sparse superposition over basis configurations.
//!
//! Tree positions use `(depth, branch)` coordinates: depth runs from 1 at the
//! root to `n + 1` at the memory cells, and node `(d, l)` has children
//! `(d + 1, 2l - 1)` and `(d + 1, 2l)`. Empty subsystems carry a depth and a
//! phase but no branch.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QramError, Result};

/// Tolerance for normalization checks on values produced by the engine.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Tolerance for normalization of user-supplied queries.
pub const INPUT_NORM_TOLERANCE: f64 = 1e-9;
/// Amplitudes below this magnitude are dropped when a state is built.
pub const ZERO_AMPLITUDE: f64 = 1e-15;

/// A fixed-width bit string, first character most significant.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Bits {
    value: u64,
    len: u8,
}

impl Bits {
    pub fn new(value: u64, len: u8) -> Result<Self> {
        if len > 64 || (len < 64 && value >> len != 0) {
            return Err(QramError::Validation(format!("value {value} does not fit in {len} bits")));
        }
        Ok(Self { value, len })
    }

    pub fn zeros(len: u8) -> Self {
        Self { value: 0, len }
    }

    pub fn ones(len: u8) -> Self {
        let value = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        Self { value, len }
    }

    pub fn from_bools(bits: &[bool]) -> Result<Self> {
        let len = u8::try_from(bits.len())
            .ok()
            .filter(|&l| l <= 64)
            .ok_or_else(|| QramError::Validation("bit string longer than 64".into()))?;
        let value = bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b));
        Ok(Self { value, len })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit `i`, 1-based from the most significant end.
    pub fn bit(&self, i: u8) -> bool {
        assert!(i >= 1 && i <= self.len, "bit index {i} out of 1..={}", self.len);
        (self.value >> (self.len - i)) & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (1..=self.len).map(move |i| self.bit(i))
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Bits {
    type Err = QramError;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => {
                    Err(QramError::Validation(format!("malformed bit string {s:?}: unexpected character {other:?}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Bits::from_bools(&bits)
    }
}

/// Occupancy and color of one subsystem.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum InternalState {
    Empty,
    Red,
    Blue,
}

impl InternalState {
    /// Color negation: Red and Blue swap, Empty is fixed.
    pub fn negate(self) -> Self {
        match self {
            InternalState::Empty => InternalState::Empty,
            InternalState::Red => InternalState::Blue,
            InternalState::Blue => InternalState::Red,
        }
    }

    pub fn is_empty(self) -> bool {
        self == InternalState::Empty
    }

    pub fn symbol(self) -> &'static str {
        match self {
            InternalState::Empty => "∅",
            InternalState::Red => "R",
            InternalState::Blue => "B",
        }
    }
}

/// Identity of a subsystem in the injected train.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum SubsystemId {
    Address(u8),
    AddressBackup(u8),
    /// `Data(0)` is the copy flag, `Data(m + 1)` the switch-mode terminator.
    Data(u8),
    DataBackup(u8),
}

impl SubsystemId {
    pub fn is_backup(self) -> bool {
        matches!(self, SubsystemId::AddressBackup(_) | SubsystemId::DataBackup(_))
    }
}

impl fmt::Display for SubsystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubsystemId::Address(i) => write!(f, "A{i}"),
            SubsystemId::AddressBackup(i) => write!(f, "~A{i}"),
            SubsystemId::Data(j) => write!(f, "D{j}"),
            SubsystemId::DataBackup(j) => write!(f, "~D{j}"),
        }
    }
}

impl FromStr for SubsystemId {
    type Err = QramError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || QramError::Validation(format!("unknown subsystem label {s:?}"));
        let (backup, rest) = match s.strip_prefix('~') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (kind, digits) = rest.split_at(rest.len().min(1));
        let index: u8 = digits.parse().map_err(|_| bad())?;
        match (kind, backup) {
            ("A", false) => Ok(SubsystemId::Address(index)),
            ("A", true) => Ok(SubsystemId::AddressBackup(index)),
            ("D", false) => Ok(SubsystemId::Data(index)),
            ("D", true) => Ok(SubsystemId::DataBackup(index)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for SubsystemId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SubsystemId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which leg of the query a walker is on.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Forward,
    AtCell,
    Backward,
}

/// Tree position. `branch` is absent exactly when the subsystem is empty.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Position {
    pub depth: u8,
    pub branch: Option<u64>,
    pub phase: Phase,
}

impl Position {
    pub fn node(&self) -> Option<(u8, u64)> {
        self.branch.map(|l| (self.depth, l))
    }

    fn render(&self) -> String {
        let depth = match self.phase {
            Phase::Backward => format!("{}′", self.depth),
            _ => self.depth.to_string(),
        };
        match self.branch {
            Some(l) => format!("({depth},{l})"),
            None => depth,
        }
    }
}

/// One subsystem's state within a basis configuration.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Walker {
    pub state: InternalState,
    pub pos: Position,
}

impl Walker {
    pub fn colored(state: InternalState, depth: u8, branch: u64, phase: Phase) -> Self {
        debug_assert!(!state.is_empty());
        Self { state, pos: Position { depth, branch: Some(branch), phase } }
    }

    pub fn empty(depth: u8, phase: Phase) -> Self {
        Self { state: InternalState::Empty, pos: Position { depth, branch: None, phase } }
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    pub fn node(&self) -> Option<(u8, u64)> {
        self.pos.node()
    }

    /// Flip the color in place; empty subsystems are untouched.
    pub fn negate(&mut self) {
        self.state = self.state.negate();
    }

    pub fn render(&self) -> String {
        match self.state {
            InternalState::Empty => format!("∅@{}", self.pos.render()),
            s => format!("{}@{}", s.symbol(), self.pos.render()),
        }
    }
}

/// Standard (long-range level gates) or backup (short-range chain) register.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Standard,
    Backup,
}

/// The ordered list of subsystems for one protocol configuration.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RegisterLayout {
    n: u8,
    m: u8,
    variant: Variant,
    terminator: bool,
    subsystems: Vec<SubsystemId>,
}

/// Largest supported address width; cells are indexed by `u64` and the
/// bank is materialized, so this is a memory bound rather than a hard limit.
pub const MAX_ADDRESS_BITS: u8 = 24;
pub const MAX_MESSAGE_BITS: u8 = 64;

impl RegisterLayout {
    pub fn new(n: u8, m: u8, variant: Variant, terminator: bool) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(QramError::Configuration(format!("need n >= 1 and m >= 1, got n={n}, m={m}")));
        }
        if n > MAX_ADDRESS_BITS || m > MAX_MESSAGE_BITS - 1 {
            return Err(QramError::Configuration(format!(
                "n={n}, m={m} exceeds supported sizes (n <= {MAX_ADDRESS_BITS}, m < {MAX_MESSAGE_BITS})"
            )));
        }
        if terminator && variant == Variant::Backup {
            return Err(QramError::Configuration("terminator walker exists only in the standard variant".into()));
        }
        let mut subsystems = Vec::new();
        match variant {
            Variant::Standard => {
                subsystems.extend((1..=n).map(SubsystemId::Address));
                subsystems.extend((0..=m).map(SubsystemId::Data));
                if terminator {
                    subsystems.push(SubsystemId::Data(m + 1));
                }
            }
            Variant::Backup => {
                for i in 1..=n {
                    subsystems.push(SubsystemId::Address(i));
                    subsystems.push(SubsystemId::AddressBackup(i));
                }
                for j in 1..m {
                    subsystems.push(SubsystemId::Data(j));
                    subsystems.push(SubsystemId::DataBackup(j));
                }
                subsystems.push(SubsystemId::Data(m));
            }
        }
        Ok(Self { n, m, variant, terminator, subsystems })
    }

    pub fn standard(n: u8, m: u8) -> Result<Self> {
        Self::new(n, m, Variant::Standard, false)
    }

    pub fn backup(n: u8, m: u8) -> Result<Self> {
        Self::new(n, m, Variant::Backup, false)
    }

    pub fn n(&self) -> u8 {
        self.n
    }

    pub fn m(&self) -> u8 {
        self.m
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn has_terminator(&self) -> bool {
        self.terminator
    }

    /// Depth of the memory cells.
    pub fn cell_depth(&self) -> u8 {
        self.n + 1
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn subsystems(&self) -> &[SubsystemId] {
        &self.subsystems
    }

    pub fn subsystem(&self, index: usize) -> SubsystemId {
        self.subsystems[index]
    }

    pub fn index_of(&self, id: SubsystemId) -> Option<usize> {
        let (n, m) = (self.n as usize, self.m as usize);
        let idx = match (self.variant, id) {
            (Variant::Standard, SubsystemId::Address(i)) if (1..=n).contains(&(i as usize)) => i as usize - 1,
            (Variant::Standard, SubsystemId::Data(j)) if (j as usize) <= m => n + j as usize,
            (Variant::Standard, SubsystemId::Data(j)) if j as usize == m + 1 && self.terminator => n + m + 1,
            (Variant::Backup, SubsystemId::Address(i)) if (1..=n).contains(&(i as usize)) => 2 * (i as usize - 1),
            (Variant::Backup, SubsystemId::AddressBackup(i)) if (1..=n).contains(&(i as usize)) => {
                2 * (i as usize - 1) + 1
            }
            (Variant::Backup, SubsystemId::Data(j)) if (1..=m).contains(&(j as usize)) => 2 * n + 2 * (j as usize - 1),
            (Variant::Backup, SubsystemId::DataBackup(j)) if (1..m).contains(&(j as usize)) => {
                2 * n + 2 * (j as usize - 1) + 1
            }
            _ => return None,
        };
        debug_assert_eq!(self.subsystems[idx], id);
        Some(idx)
    }

    pub(crate) fn require(&self, id: SubsystemId) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| QramError::Configuration(format!("subsystem {id} is not part of this register layout")))
    }

    pub fn address_index(&self, i: u8) -> usize {
        self.index_of(SubsystemId::Address(i)).expect("address index in range")
    }

    pub fn data_index(&self, j: u8) -> usize {
        self.index_of(SubsystemId::Data(j)).expect("data index in range")
    }

    /// Subsystems that must come back Red at the output: flag, terminator, backups.
    pub fn ancillas(&self) -> impl Iterator<Item = usize> + '_ {
        let m = self.m;
        self.subsystems.iter().enumerate().filter_map(move |(k, id)| match id {
            SubsystemId::Data(0) => Some(k),
            SubsystemId::Data(j) if *j == m + 1 => Some(k),
            id if id.is_backup() => Some(k),
            _ => None,
        })
    }
}

/// One classical configuration of every subsystem, plus the set of memory
/// cells whose switch is on (switch copy mode only; absent means off).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct BasisConfig {
    walkers: Vec<Walker>,
    switches_on: BTreeSet<u64>,
}

impl BasisConfig {
    pub fn new(walkers: Vec<Walker>) -> Self {
        Self { walkers, switches_on: BTreeSet::new() }
    }

    pub fn with_switches(walkers: Vec<Walker>, switches_on: BTreeSet<u64>) -> Self {
        Self { walkers, switches_on }
    }

    pub fn walkers(&self) -> &[Walker] {
        &self.walkers
    }

    pub fn walker(&self, index: usize) -> &Walker {
        &self.walkers[index]
    }

    pub fn walker_mut(&mut self, index: usize) -> &mut Walker {
        &mut self.walkers[index]
    }

    pub fn walkers_mut(&mut self) -> &mut [Walker] {
        &mut self.walkers
    }

    pub fn switches_on(&self) -> &BTreeSet<u64> {
        &self.switches_on
    }

    pub fn toggle_switch(&mut self, cell: u64) {
        if !self.switches_on.remove(&cell) {
            self.switches_on.insert(cell);
        }
    }

    /// Copy of this configuration with every walker tagged as returning.
    pub fn retag_backward(&self) -> Self {
        let mut out = self.clone();
        for w in &mut out.walkers {
            w.pos.phase = Phase::Backward;
        }
        out
    }

    /// Address bits as carried by the address subsystems (non-empty means 1).
    pub fn address_bits(&self, layout: &RegisterLayout) -> Bits {
        let bits: Vec<bool> = (1..=layout.n()).map(|i| !self.walkers[layout.address_index(i)].is_empty()).collect();
        Bits::from_bools(&bits).expect("n <= 64")
    }

    /// Ket rendering in the conventional right-to-left order (last injected first).
    pub fn render(&self, layout: &RegisterLayout) -> String {
        let mut parts: Vec<String> = self
            .walkers
            .iter()
            .zip(layout.subsystems())
            .rev()
            .map(|(w, id)| format!("{}·{}", w.render(), id))
            .collect();
        if !self.switches_on.is_empty() {
            let on: Vec<String> = self.switches_on.iter().map(|c| c.to_string()).collect();
            parts.push(format!("F[on:{}]", on.join(",")));
        }
        parts.join(" ⊗ ")
    }
}

/// Sparse map from basis keys to complex amplitudes, ordered by key so that
/// iteration and serialization are deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct Amplitudes<K: Ord> {
    terms: BTreeMap<K, Complex64>,
}

/// The full quantum state over walker configurations.
pub type QState = Amplitudes<BasisConfig>;

impl<K: Ord + Clone + fmt::Debug> Amplitudes<K> {
    /// Build a state, dropping negligible amplitudes. Repeated keys are rejected.
    pub fn from_terms<I: IntoIterator<Item = (K, Complex64)>>(terms: I) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (key, amp) in terms {
            if amp.norm() < ZERO_AMPLITUDE {
                continue;
            }
            if map.insert(key.clone(), amp).is_some() {
                return Err(QramError::Validation(format!("repeated basis configuration {key:?}")));
            }
        }
        Ok(Self { terms: map })
    }

    pub fn basis(key: K) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(key, Complex64::new(1.0, 0.0));
        Self { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &Complex64)> {
        self.terms.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.terms.keys()
    }

    pub fn norm(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`, conjugating the left argument.
    pub fn inner_product(&self, other: &Self) -> Complex64 {
        self.terms.iter().filter_map(|(k, a)| other.terms.get(k).map(|b| a.conj() * b)).sum()
    }

    pub fn amplitude(&self, key: &K) -> Complex64 {
        self.terms.get(key).copied().unwrap_or_default()
    }

    /// Apply a basis permutation. Two keys landing on the same image means
    /// the map was not injective, which every protocol gate must be.
    pub fn try_map_basis<K2, F>(&self, mut f: F) -> Result<Amplitudes<K2>>
    where
        K2: Ord + Clone + fmt::Debug,
        F: FnMut(&K) -> Result<K2>,
    {
        let mut out = BTreeMap::new();
        for (key, amp) in &self.terms {
            let image = f(key)?;
            if out.insert(image, *amp).is_some() {
                return Err(QramError::NotPermutation(format!(
                    "two components collide after the gate (one source: {key:?})"
                )));
            }
        }
        Ok(Amplitudes { terms: out })
    }

    /// Largest per-key amplitude difference; keys missing on one side count as zero.
    pub fn max_deviation(&self, other: &Self) -> f64 {
        let left = self.terms.iter().map(|(k, a)| (a - other.amplitude(k)).norm());
        let right = other.terms.iter().filter(|(k, _)| !self.terms.contains_key(k)).map(|(_, b)| b.norm());
        left.chain(right).fold(0.0, f64::max)
    }
}

/// One term of a query: an address and its amplitude.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct QueryTerm {
    pub address: Bits,
    pub amplitude: Complex64,
}

impl QueryTerm {
    pub fn new(address: Bits, amplitude: Complex64) -> Self {
        Self { address, amplitude }
    }

    /// Single classical address with unit amplitude.
    pub fn classical(address: Bits) -> Self {
        Self::new(address, Complex64::new(1.0, 0.0))
    }

    /// Random normalized superposition of between 1 and `max_terms` distinct
    /// addresses (capped at `2^n`).
    pub fn random<R: Rng + ?Sized>(n: u8, max_terms: usize, rng: &mut R) -> Result<Vec<Self>> {
        if n == 0 || n > MAX_ADDRESS_BITS || max_terms == 0 {
            return Err(QramError::Configuration(format!("no random query with n={n}, {max_terms} terms")));
        }
        let cells = 1usize << n;
        let k = rng.gen_range(1..=max_terms.min(cells));
        let mut terms: Vec<Self> = rand::seq::index::sample(rng, cells, k)
            .into_iter()
            .map(|a| {
                let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                Ok(Self::new(Bits::new(a as u64, n)?, amp))
            })
            .collect::<Result<_>>()?;
        let norm = terms.iter().map(|t| t.amplitude.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-6 {
            terms.truncate(1);
            terms[0].amplitude = Complex64::new(1.0, 0.0);
        } else {
            terms.iter_mut().for_each(|t| t.amplitude /= norm);
        }
        Ok(terms)
    }

    /// Equal-weight superposition of every `n`-bit address.
    pub fn uniform(n: u8) -> Result<Vec<Self>> {
        if n == 0 || n > MAX_ADDRESS_BITS {
            return Err(QramError::Configuration(format!("no uniform query over {n} address bits")));
        }
        let amp = Complex64::new((0.5f64).powf(n as f64 / 2.0), 0.0);
        (0..1u64 << n).map(|a| Ok(Self::new(Bits::new(a, n)?, amp))).collect()
    }
}

/// Walker configuration for a classical address at the tree root.
///
/// Address bit 1 becomes a Red walker, bit 0 an empty subsystem; every data,
/// flag, terminator and backup subsystem starts Red.
pub fn encode_address(bits: Bits, layout: &RegisterLayout) -> Result<BasisConfig> {
    if bits.len() != layout.n() {
        return Err(QramError::Configuration(format!(
            "address {bits} has {} bits, layout expects {}",
            bits.len(),
            layout.n()
        )));
    }
    let walkers = layout
        .subsystems()
        .iter()
        .map(|id| match id {
            SubsystemId::Address(i) if !bits.bit(*i) => Walker::empty(1, Phase::Forward),
            _ => Walker::colored(InternalState::Red, 1, 1, Phase::Forward),
        })
        .collect();
    Ok(BasisConfig::new(walkers))
}

/// Encode a normalized superposition of distinct addresses.
pub fn encode_query(terms: &[QueryTerm], layout: &RegisterLayout) -> Result<QState> {
    if terms.is_empty() {
        return Err(QramError::Validation("query has no terms".into()));
    }
    let norm_sq: f64 = terms.iter().map(|t| t.amplitude.norm_sqr()).sum();
    if (norm_sq.sqrt() - 1.0).abs() > INPUT_NORM_TOLERANCE {
        return Err(QramError::Validation(format!("query is not normalized: norm = {}", norm_sq.sqrt())));
    }
    let mut seen = BTreeSet::new();
    for t in terms {
        if !seen.insert(t.address) {
            return Err(QramError::Validation(format!("duplicate address {} in query", t.address)));
        }
    }
    let components =
        terms.iter().map(|t| Ok((encode_address(t.address, layout)?, t.amplitude))).collect::<Result<Vec<_>>>()?;
    QState::from_terms(components)
}

/// One decoded output term `(a, b^(a), α_a)`.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct DecodedTerm {
    pub address: Bits,
    pub message: Bits,
    pub amplitude: Complex64,
}

/// Read address and message bits off a fully returned state.
///
/// Every walker must be back at the root on the return leg; any Blue walker,
/// any ancilla that is not Red, or any switch left on is a protocol fault.
pub fn decode_output(state: &QState, layout: &RegisterLayout) -> Result<Vec<DecodedTerm>> {
    let mut out = Vec::with_capacity(state.len());
    for (config, amp) in state.iter() {
        for (w, id) in config.walkers().iter().zip(layout.subsystems()) {
            if w.pos.depth != 1 || w.pos.phase != Phase::Backward {
                return Err(QramError::IncompleteProtocol(format!(
                    "{id} is at {} instead of the output port",
                    w.render()
                )));
            }
            if w.state == InternalState::Blue {
                return Err(QramError::CoherenceFault(format!("{id} is Blue at the output")));
            }
        }
        for k in layout.ancillas() {
            if config.walker(k).state != InternalState::Red {
                return Err(QramError::CoherenceFault(format!(
                    "ancilla {} ended {} instead of Red",
                    layout.subsystem(k),
                    config.walker(k).state.symbol()
                )));
            }
        }
        if !config.switches_on().is_empty() {
            return Err(QramError::CoherenceFault(format!(
                "memory switches left on at cells {:?}",
                config.switches_on()
            )));
        }
        let message: Vec<bool> = (1..=layout.m()).map(|j| !config.walker(layout.data_index(j)).is_empty()).collect();
        out.push(DecodedTerm {
            address: config.address_bits(layout),
            message: Bits::from_bools(&message)?,
            amplitude: *amp,
        });
    }
    out.sort_by_key(|t| t.address);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Bits {
        s.parse().unwrap()
    }

    fn red(d: u8, l: u64) -> Walker {
        Walker::colored(InternalState::Red, d, l, Phase::Forward)
    }

    #[test]
    fn negation_is_an_involution() {
        for s in [InternalState::Empty, InternalState::Red, InternalState::Blue] {
            assert_eq!(s.negate().negate(), s);
        }
        assert_eq!(InternalState::Empty.negate(), InternalState::Empty);
        assert_eq!(InternalState::Red.negate(), InternalState::Blue);
    }

    #[test]
    fn bits_parse_msb_first() {
        let b = bits("10");
        assert_eq!(b.value(), 2);
        assert!(b.bit(1));
        assert!(!b.bit(2));
        assert_eq!(b.to_string(), "10");
        assert!("1x".parse::<Bits>().is_err());
    }

    #[test]
    fn layout_orders_and_counts() {
        let std = RegisterLayout::standard(2, 1).unwrap();
        assert_eq!(std.len(), 2 + 1 + 1);
        let sw = RegisterLayout::new(2, 3, Variant::Standard, true).unwrap();
        assert_eq!(sw.len(), 2 + 3 + 2);
        assert_eq!(sw.subsystem(sw.len() - 1), SubsystemId::Data(4));
        let bk = RegisterLayout::backup(3, 2).unwrap();
        assert_eq!(bk.len(), 2 * (3 + 2) - 1);
        let order: Vec<String> = bk.subsystems().iter().map(|s| s.to_string()).collect();
        assert_eq!(order, ["A1", "~A1", "A2", "~A2", "A3", "~A3", "D1", "~D1", "D2"]);
        for (k, id) in bk.subsystems().iter().enumerate() {
            assert_eq!(bk.index_of(*id), Some(k));
        }
        assert_eq!(bk.index_of(SubsystemId::Data(0)), None);
        assert_eq!(bk.index_of(SubsystemId::DataBackup(2)), None);
        assert!(RegisterLayout::new(2, 1, Variant::Backup, true).is_err());
        assert!(RegisterLayout::standard(0, 1).is_err());
    }

    #[test]
    fn subsystem_labels_round_trip() {
        let bk = RegisterLayout::new(3, 2, Variant::Standard, true).unwrap();
        for id in bk.subsystems().iter().chain(RegisterLayout::backup(2, 3).unwrap().subsystems()) {
            assert_eq!(id.to_string().parse::<SubsystemId>().unwrap(), *id);
        }
        assert!("X1".parse::<SubsystemId>().is_err());
    }

    #[test]
    fn encode_address_standard_10() {
        let layout = RegisterLayout::standard(2, 1).unwrap();
        let c = encode_address(bits("10"), &layout).unwrap();
        assert_eq!(c.walkers(), &[red(1, 1), Walker::empty(1, Phase::Forward), red(1, 1), red(1, 1)]);
    }

    #[test]
    fn encode_address_all_zero_is_address_vacuum() {
        let layout = RegisterLayout::standard(3, 2).unwrap();
        let c = encode_address(bits("000"), &layout).unwrap();
        for i in 1..=3 {
            assert!(c.walker(layout.address_index(i)).is_empty());
        }
        for j in 0..=2 {
            assert_eq!(c.walker(layout.data_index(j)).state, InternalState::Red);
        }
    }

    #[test]
    fn encode_address_backup_100() {
        let layout = RegisterLayout::backup(3, 1).unwrap();
        let c = encode_address(bits("100"), &layout).unwrap();
        let e = Walker::empty(1, Phase::Forward);
        assert_eq!(c.walkers(), &[red(1, 1), red(1, 1), e, red(1, 1), e, red(1, 1), red(1, 1)]);
    }

    #[test]
    fn encode_address_rejects_wrong_length() {
        let layout = RegisterLayout::standard(3, 1).unwrap();
        assert!(matches!(encode_address(bits("10"), &layout), Err(QramError::Configuration(_))));
    }

    #[test]
    fn encode_query_validates() {
        let layout = RegisterLayout::standard(2, 1).unwrap();
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let ok = encode_query(&[QueryTerm::new(bits("00"), h), QueryTerm::new(bits("11"), h)], &layout).unwrap();
        assert_eq!(ok.len(), 2);
        assert!((ok.norm() - 1.0).abs() < NORM_TOLERANCE);

        let unnormalized = [QueryTerm::new(bits("00"), h)];
        assert!(matches!(encode_query(&unnormalized, &layout), Err(QramError::Validation(_))));
        let dup = [QueryTerm::new(bits("01"), h), QueryTerm::new(bits("01"), h)];
        assert!(matches!(encode_query(&dup, &layout), Err(QramError::Validation(_))));

        let single = RegisterLayout::standard(1, 1).unwrap();
        let s = encode_query(&[QueryTerm::classical(bits("0"))], &single).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.norm(), 1.0);
    }

    #[test]
    fn inner_products() {
        let layout = RegisterLayout::standard(2, 1).unwrap();
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let b4 = encode_query(&[QueryTerm::classical(bits("10"))], &layout).unwrap();
        let b5 = encode_query(&[QueryTerm::new(bits("00"), h), QueryTerm::new(bits("11"), h)], &layout).unwrap();
        assert_eq!(b4.inner_product(&b5), Complex64::new(0.0, 0.0));
        let self_ip = b5.inner_product(&b5);
        assert!((self_ip.re - b5.norm().powi(2)).abs() < NORM_TOLERANCE);
        assert_eq!(self_ip.im, 0.0);
        let key = encode_address(bits("11"), &layout).unwrap();
        assert_eq!(b5.amplitude(&key), h);
        assert_eq!(b4.amplitude(&key), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn decode_untouched_register_reads_all_ones() {
        let layout = RegisterLayout::standard(2, 3).unwrap();
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let s = encode_query(&[QueryTerm::new(bits("01"), h), QueryTerm::new(bits("10"), -h)], &layout).unwrap();
        let back = s.try_map_basis(|c| Ok(c.retag_backward())).unwrap();
        let out = decode_output(&back, &layout).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].address, bits("01"));
        assert_eq!(out[1].address, bits("10"));
        assert!(out.iter().all(|t| t.message == bits("111")));
        assert_eq!(out[1].amplitude, -h);
    }

    #[test]
    fn decode_rejects_unfinished_and_blue() {
        let layout = RegisterLayout::standard(2, 1).unwrap();
        let c = encode_address(bits("11"), &layout).unwrap();
        let s = QState::basis(c.clone());
        assert!(matches!(decode_output(&s, &layout), Err(QramError::IncompleteProtocol(_))));

        let mut blue = c.retag_backward();
        blue.walker_mut(layout.data_index(1)).negate();
        assert!(matches!(decode_output(&QState::basis(blue), &layout), Err(QramError::CoherenceFault(_))));

        let mut flagless = c.retag_backward();
        *flagless.walker_mut(layout.data_index(0)) = Walker::empty(1, Phase::Backward);
        assert!(matches!(decode_output(&QState::basis(flagless), &layout), Err(QramError::CoherenceFault(_))));
    }

    #[test]
    fn permutation_collisions_are_reported() {
        let layout = RegisterLayout::standard(1, 1).unwrap();
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let s = encode_query(&[QueryTerm::new(bits("0"), h), QueryTerm::new(bits("1"), h)], &layout).unwrap();
        let zero = encode_address(bits("0"), &layout).unwrap();
        assert!(matches!(s.try_map_basis(|_| Ok(zero.clone())), Err(QramError::NotPermutation(_))));
    }
}
