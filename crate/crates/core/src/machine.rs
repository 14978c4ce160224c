//! Lazily expanded countable-state edge-emitting HMMs.
//!
//! A machine never enumerates its state set. It answers three questions on
//! demand: which edges leave a state, how much stationary mass a state
//! carries, and which finite collection of states covers all but a small
//! tail of the stationary mass.
//!
//! Keys may denote a single state or a class of states that behave
//! identically for the purpose at hand (for example all tree nodes of one
//! depth whose path bits are still unobserved). A class key's edges give the
//! fraction of the class mass that moves along each labelled transition.
//! Classes that are only exact for a bounded number of steps report edges
//! summing to less than one once that budget runs out; the missing
//! probability is carried as untracked tail mass.

use std::fmt;

use rand::RngCore;

use crate::enclosure::{entropy_bits, Enclosure};
use crate::error::{Error, Result};

/// Output symbol, identified by its code in the alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(pub u8);

impl Symbol {
    pub fn code(self) -> usize {
        self.0 as usize
    }
}

/// Finite output alphabet. Codes are `0..len`, each with a display glyph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    glyphs: Vec<char>,
}

impl Alphabet {
    pub fn new(glyphs: &[char]) -> Result<Self> {
        if glyphs.is_empty() || glyphs.len() > 255 {
            return Err(Error::Param(format!(
                "alphabet size {} out of range",
                glyphs.len()
            )));
        }
        for (i, g) in glyphs.iter().enumerate() {
            if glyphs[..i].contains(g) {
                return Err(Error::Param(format!("duplicate glyph {g:?}")));
            }
        }
        Ok(Alphabet {
            glyphs: glyphs.to_vec(),
        })
    }

    /// Alphabet `{'0', '1', ...}` of the given size (at most 10).
    pub fn digits(n: usize) -> Self {
        assert!((1..=10).contains(&n));
        let glyphs: Vec<char> = (0..n as u32)
            .map(|d| char::from_digit(d, 10).unwrap())
            .collect();
        Alphabet { glyphs }
    }

    pub fn len(&self) -> usize {
        self.glyphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glyphs.is_empty()
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.glyphs.len()).map(|c| Symbol(c as u8))
    }

    pub fn glyph(&self, s: Symbol) -> char {
        self.glyphs[s.code()]
    }

    pub fn symbol(&self, glyph: char) -> Result<Symbol> {
        self.glyphs
            .iter()
            .position(|&g| g == glyph)
            .map(|c| Symbol(c as u8))
            .ok_or(Error::Alphabet(glyph))
    }

    pub fn parse_word(&self, text: &str) -> Result<Vec<Symbol>> {
        text.chars().map(|c| self.symbol(c)).collect()
    }

    pub fn render(&self, word: &[Symbol]) -> String {
        word.iter().map(|&s| self.glyph(s)).collect()
    }

    /// `lg |X|`.
    pub fn log_size(&self) -> f64 {
        (self.glyphs.len() as f64).log2()
    }
}

/// Value-typed state identifier. The meaning of the fields is machine
/// specific: `tag` discriminates kinds of states, `idx` holds small indices,
/// and `mask`/`bits` carry a bit string with a mask of which bits are known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct StateKey {
    pub tag: u8,
    pub idx: [u32; 3],
    pub mask: u128,
    pub bits: u128,
}

impl StateKey {
    pub fn new(tag: u8, idx: [u32; 3]) -> Self {
        StateKey {
            tag,
            idx,
            mask: 0,
            bits: 0,
        }
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "<{}:{},{},{}",
            self.tag, self.idx[0], self.idx[1], self.idx[2]
        )?;
        if self.mask != 0 {
            write!(f, "|{:b}/{:b}", self.bits, self.mask)?;
        }
        write!(f, ">")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub symbol: Symbol,
    pub prob: f64,
    pub target: StateKey,
}

impl Edge {
    pub fn new(symbol: u8, prob: f64, target: StateKey) -> Self {
        Edge {
            symbol: Symbol(symbol),
            prob,
            target,
        }
    }
}

/// Finite part of the stationary distribution plus an upper bound on the
/// stationary mass it leaves out.
#[derive(Debug, Clone)]
pub struct Support {
    pub entries: Vec<(StateKey, f64)>,
    pub tail: f64,
}

impl Support {
    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }
}

/// An invariant, edge-emitting, countable-state HMM over a finite alphabet.
pub trait Machine: Send + Sync {
    fn name(&self) -> &str;

    fn alphabet(&self) -> &Alphabet;

    /// Outgoing edges of `key`, ordered by symbol code. Zero-probability
    /// edges are never listed.
    fn expand(&self, key: &StateKey) -> Vec<Edge>;

    /// Total stationary mass of the state(s) denoted by `key`.
    fn stationary_weight(&self, key: &StateKey) -> Result<f64>;

    /// Keys covering the stationary distribution, exact under forward
    /// propagation for at least `horizon` steps, with declared tail at most
    /// `eps` (where the machine can reach it).
    fn support(&self, eps: f64, horizon: usize) -> Support;

    /// Partition of the truncated state space on which the state chain
    /// (ignoring symbols) is exactly lumpable under stationary weights.
    fn lumped_support(&self, eps: f64) -> Support {
        self.support(eps, 1)
    }

    /// Block of [`Machine::lumped_support`] that contains the states of `key`.
    fn lump(&self, key: &StateKey) -> StateKey {
        *key
    }

    /// Stationary-weighted mean of `H[X_0 | S_0 = σ]` over the states of `key`.
    fn state_entropy(&self, key: &StateKey) -> Enclosure {
        Enclosure::point(entropy_bits(
            symbol_marginal(&self.expand(key), self.alphabet().len()),
        ))
    }

    /// Whether `key` pins down one state given the observations that led
    /// to it.
    fn is_point(&self, _key: &StateKey) -> bool {
        true
    }

    /// Replace a start-of-run class key by a key whose expansion is exact
    /// for arbitrarily many steps, drawn with the correct conditional law.
    fn resolve(&self, key: &StateKey, _rng: &mut dyn RngCore) -> StateKey {
        *key
    }

    /// Whether a key returned by [`Machine::resolve`] expands exactly along
    /// any path. False when the draw fell beyond the representable indices.
    fn is_resolved(&self, _key: &StateKey) -> bool {
        true
    }

    fn label(&self, key: &StateKey) -> String {
        key.to_string()
    }
}

/// Total edge probability per symbol.
pub fn symbol_marginal(edges: &[Edge], alphabet_size: usize) -> Vec<f64> {
    let mut out = vec![0.0; alphabet_size];
    for e in edges {
        out[e.symbol.code()] += e.prob;
    }
    out
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checked: usize,
    pub unifilar: bool,
    /// Keys with two or more edges sharing a symbol.
    pub non_unifilar: Vec<String>,
}

/// Check edge normalization (within 1e-12) and unifilarity of `keys`.
/// With `require_unifilar`, a shared symbol is an error rather than a
/// report entry.
pub fn validate_machine(
    machine: &dyn Machine,
    keys: &[StateKey],
    require_unifilar: bool,
) -> Result<ValidationReport> {
    let mut non_unifilar = Vec::new();
    for key in keys {
        let edges = machine.expand(key);
        let sum: f64 = edges.iter().map(|e| e.prob).sum();
        if (sum - 1.0).abs() > 1e-12 || edges.iter().any(|e| e.prob <= 0.0) {
            return Err(Error::Normalization {
                key: machine.label(key),
                sum,
            });
        }
        let shared = edges.windows(2).find(|w| w[0].symbol == w[1].symbol);
        if let Some(w) = shared {
            if require_unifilar {
                return Err(Error::DuplicateEdge {
                    key: machine.label(key),
                    symbol: machine.alphabet().glyph(w[0].symbol),
                });
            }
            non_unifilar.push(machine.label(key));
        }
    }
    Ok(ValidationReport {
        checked: keys.len(),
        unifilar: non_unifilar.is_empty(),
        non_unifilar,
    })
}

/// Support keys together with every key reachable from them in at most
/// `steps` transitions.
pub fn reachable_sample(machine: &dyn Machine, steps: usize, eps: f64) -> Vec<StateKey> {
    let support = machine.support(eps, steps + 1);
    let mut seen: std::collections::BTreeSet<StateKey> =
        support.entries.iter().map(|(k, _)| *k).collect();
    let mut frontier: Vec<StateKey> = seen.iter().copied().collect();
    for _ in 0..steps {
        let mut next = Vec::new();
        for key in &frontier {
            for e in machine.expand(key) {
                if seen.insert(e.target) {
                    next.push(e.target);
                }
            }
        }
        frontier = next;
    }
    seen.into_iter().collect()
}
