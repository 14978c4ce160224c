//! Sparse forward algebra: row vectors over state keys multiplied by the
//! symbol-labelled transition matrices.

use std::collections::BTreeMap;

use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::machine::{Machine, StateKey, Support, Symbol};

/// Finite mapping from states to mass plus untracked tail mass.
///
/// The tail is an upper bound on mass that sits on states not named in the
/// mapping. It only ever widens upper bounds and is never converted into
/// named mass. Entries are kept sorted by key, so iteration order is
/// deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseDistribution {
    masses: Vec<(StateKey, f64)>,
    tail: f64,
}

impl SparseDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn point(key: StateKey) -> Self {
        SparseDistribution {
            masses: vec![(key, 1.0)],
            tail: 0.0,
        }
    }

    pub fn from_support(support: &Support) -> Self {
        Self::from_masses(support.entries.iter().copied(), support.tail)
    }

    pub fn from_masses<I: IntoIterator<Item = (StateKey, f64)>>(masses: I, tail: f64) -> Self {
        Self::collect(masses.into_iter().collect(), tail)
    }

    /// Sort by key, merge duplicates and drop non-positive entries.
    fn collect(mut raw: Vec<(StateKey, f64)>, tail: f64) -> Self {
        raw.sort_by_key(|a| a.0);
        let mut masses: Vec<(StateKey, f64)> = Vec::with_capacity(raw.len());
        for (k, m) in raw {
            match masses.last_mut() {
                Some(last) if last.0 == k => last.1 += m,
                _ => masses.push((k, m)),
            }
        }
        masses.retain(|(_, m)| *m > 0.0);
        SparseDistribution {
            masses,
            tail: tail.max(0.0),
        }
    }

    pub fn add(&mut self, key: StateKey, mass: f64) {
        if mass > 0.0 {
            match self.masses.binary_search_by(|e| e.0.cmp(&key)) {
                Ok(i) => self.masses[i].1 += mass,
                Err(i) => self.masses.insert(i, (key, mass)),
            }
        }
    }

    pub fn get(&self, key: &StateKey) -> f64 {
        self.masses
            .binary_search_by(|e| e.0.cmp(key))
            .map(|i| self.masses[i].1)
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StateKey, &f64)> {
        self.masses.iter().map(|(k, m)| (k, m))
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn set_tail(&mut self, tail: f64) {
        self.tail = tail.max(0.0);
    }

    /// Named mass `Σ masses`.
    pub fn named_mass(&self) -> f64 {
        self.masses.iter().map(|(_, m)| m).sum()
    }

    /// Enclosure of the true ℓ¹ norm: named mass plus at most the tail.
    pub fn norm(&self) -> Enclosure {
        Enclosure::with_slack(self.named_mass(), self.tail)
    }

    pub fn scaled(&self, k: f64) -> Self {
        SparseDistribution {
            masses: self.masses.iter().map(|(s, m)| (*s, m * k)).collect(),
            tail: self.tail * k,
        }
    }

    /// Largest single named mass and its key (smallest key on ties).
    pub fn argmax(&self) -> Option<(StateKey, f64)> {
        self.masses
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .copied()
    }
}

/// `dist · T^(x)`.
pub fn apply_symbol(dist: &SparseDistribution, x: Symbol, machine: &dyn Machine) -> SparseDistribution {
    let mut raw = Vec::new();
    let mut lost = 0.0;
    for (key, &mass) in dist.iter() {
        let edges = machine.expand(key);
        let total: f64 = edges.iter().map(|e| e.prob).sum();
        lost += mass * (1.0 - total).max(0.0);
        for e in edges.iter().filter(|e| e.symbol == x) {
            raw.push((e.target, mass * e.prob));
        }
    }
    SparseDistribution::collect(raw, dist.tail + lost)
}

/// `dist · T^(x)` for every symbol at once, expanding each key once.
/// Probability that an expansion could not place is added to every
/// child's tail.
pub fn successors(dist: &SparseDistribution, machine: &dyn Machine) -> Vec<SparseDistribution> {
    let n = machine.alphabet().len();
    let mut raw = vec![Vec::new(); n];
    let mut lost = 0.0;
    for (key, &mass) in dist.iter() {
        let edges = machine.expand(key);
        let mut total = 0.0;
        for e in &edges {
            total += e.prob;
            raw[e.symbol.code()].push((e.target, mass * e.prob));
        }
        lost += mass * (1.0 - total).max(0.0);
    }
    raw.into_iter()
        .map(|r| SparseDistribution::collect(r, dist.tail + lost))
        .collect()
}

/// `dist · T`, ignoring symbols.
pub fn apply_all(dist: &SparseDistribution, machine: &dyn Machine) -> SparseDistribution {
    let mut raw = Vec::new();
    let mut lost = 0.0;
    for (key, &mass) in dist.iter() {
        let edges = machine.expand(key);
        let total: f64 = edges.iter().map(|e| e.prob).sum();
        lost += mass * (1.0 - total).max(0.0);
        raw.extend(edges.iter().map(|e| (e.target, mass * e.prob)));
    }
    SparseDistribution::collect(raw, dist.tail + lost)
}

/// Forward vector `π T^(w)` from the truncated stationary start.
pub fn forward_vector(machine: &dyn Machine, word: &[Symbol], eps: f64) -> Result<SparseDistribution> {
    let n = machine.alphabet().len();
    if let Some(bad) = word.iter().find(|s| s.code() >= n) {
        return Err(Error::Alphabet(char::from_digit(bad.0 as u32, 36).unwrap_or('?')));
    }
    let mut v = SparseDistribution::from_support(&machine.support(eps, word.len() + 1));
    for &x in word {
        v = apply_symbol(&v, x, machine);
    }
    Ok(v)
}

/// Enclosure of `P(w) = ‖π T^(w)‖₁`.
pub fn word_probability(machine: &dyn Machine, word: &[Symbol], eps: f64) -> Result<Enclosure> {
    if word.is_empty() {
        return Ok(Enclosure::point(1.0));
    }
    Ok(forward_vector(machine, word, eps)?.norm())
}

/// `‖π_ε T − π_ε‖₁` evaluated on the machine's lumped partition.
pub fn step_stationarity_residual(machine: &dyn Machine, eps: f64) -> f64 {
    let support = machine.lumped_support(eps);
    let start = SparseDistribution::from_support(&support);
    let mut stepped: BTreeMap<StateKey, f64> = BTreeMap::new();
    for (key, &mass) in start.iter() {
        for e in machine.expand(key) {
            *stepped.entry(machine.lump(&e.target)).or_insert(0.0) += mass * e.prob;
        }
    }
    let mut residual = 0.0;
    for (key, &mass) in start.iter() {
        residual += (stepped.remove(key).unwrap_or(0.0) - mass).abs();
    }
    residual + stepped.values().map(|m| m.abs()).sum::<f64>()
}
