//! Level-by-level expansion of the word tree from the truncated stationary
//! vector.
//!
//! Each level holds the forward vectors `π T^(w)` of the surviving length-`t`
//! words. Three sources of missing mass are tolerated and accounted for in
//! the level tail `τ_t = 1 − Σ named`: the stationary support tail, mass lost
//! by class keys that run past their exactness horizon, and words pruned
//! because their mass fell under the adaptive cutoff.
//!
//! Per-level quantities come from the function
//! `g(v) = ‖v‖·H(next symbol | v)`, which is 1-homogeneous and concave in the
//! (unnormalized) vector `v`, hence superadditive. Evaluated on named
//! sub-vectors it gives certified lower bounds; upper bounds add
//! `τ lg|X| + h_b(τ)`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::enclosure::{binary_entropy, plogp, Enclosure};
use crate::error::{Error, Result};
use crate::forward::SparseDistribution;
use crate::machine::{Machine, StateKey, Symbol};

/// Default cap on the number of live words per level.
pub const DEFAULT_WORD_CAP: usize = 5_000_000;

/// Residual non-maximal mass (relative) below which a vector counts as a
/// point mass.
pub const POINT_MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct ExploreOptions {
    /// Total mass that pruning may discard over all levels.
    pub mass_tol: f64,
    pub cap: usize,
    /// Merge synchronized words by their state. Their futures coincide, so
    /// per-level sums are unchanged, but individual words are forgotten.
    pub merge_points: bool,
}

impl ExploreOptions {
    pub fn new(mass_tol: f64) -> Self {
        ExploreOptions {
            mass_tol,
            cap: DEFAULT_WORD_CAP,
            merge_points: true,
        }
    }

    pub fn exhaustive_words(mass_tol: f64) -> Self {
        ExploreOptions {
            merge_points: false,
            ..Self::new(mass_tol)
        }
    }
}

#[derive(Debug, Clone)]
pub struct WordNode {
    /// Empty for merged (synchronized) nodes.
    pub word: Vec<Symbol>,
    pub dist: SparseDistribution,
}

/// Sums over one level of the word tree.
#[derive(Debug, Clone, Copy)]
pub struct LevelStats {
    pub t: usize,
    pub nodes: usize,
    /// `τ_t`: probability of length-`t` words not accounted for by named mass.
    pub tail: f64,
    /// `Σ_w P(w) h_w`, i.e. `H[X^(t+1)] − H[X^t]`.
    pub next_entropy: Enclosure,
    /// `Σ_w P(w)(h_w − h̃_w)`.
    pub gap: Enclosure,
    /// Named mass of words whose mixed state is not a point mass.
    pub unsync_named: f64,
    /// Mass known to be synchronized (persisting under unifilar dynamics).
    pub synced: f64,
}

struct NodeEval {
    g: f64,
    f_lower: f64,
    f_upper: f64,
    named: f64,
    point: bool,
    /// Mass whose expansion could not be placed.
    lost: f64,
    children: Vec<SparseDistribution>,
}

/// Is `dist` a point mass on a single, fully determined state?
pub fn point_state(machine: &dyn Machine, dist: &SparseDistribution) -> Option<StateKey> {
    let (key, top) = dist.argmax()?;
    let named = dist.named_mass();
    let residual = named - top;
    if residual <= POINT_MASS_TOL * named && machine.is_point(&key) {
        Some(key)
    } else {
        None
    }
}

/// `g(v)` together with certified bounds on `f(v) = g(v) − Σ v_σ h_σ` and
/// the children `v T^(x)` when requested.
fn evaluate(machine: &dyn Machine, dist: &SparseDistribution, want_children: bool) -> NodeEval {
    let n = machine.alphabet().len();
    let mut marginal = vec![0.0; n];
    let mut raw: Vec<Vec<(StateKey, f64)>> = vec![Vec::new(); if want_children { n } else { 0 }];
    let mut h_lo = 0.0;
    let mut h_hi = 0.0;
    let mut lost = 0.0;
    let mut named = 0.0;
    for (key, &mass) in dist.iter() {
        named += mass;
        let edges = machine.expand(key);
        let mut total = 0.0;
        for e in &edges {
            total += e.prob;
            marginal[e.symbol.code()] += mass * e.prob;
            if want_children {
                raw[e.symbol.code()].push((e.target, mass * e.prob));
            }
        }
        lost += mass * (1.0 - total).max(0.0);
        let h = machine.state_entropy(key);
        h_lo += mass * h.lower;
        h_hi += mass * h.upper;
    }
    // g(v) = Σ_x −m_x lg(m_x / N) over the emitted mass N
    let emitted: f64 = marginal.iter().sum();
    let g = if emitted > 0.0 {
        marginal.iter().map(|&m| plogp(m / emitted)).sum::<f64>() * emitted
    } else {
        0.0
    };
    let slack = 1e-14 * named;
    let point = point_state(machine, dist).is_some();
    let children = raw
        .into_iter()
        .map(|r| SparseDistribution::from_masses(r, dist.tail() + lost))
        .collect();
    NodeEval {
        g,
        f_lower: if point { 0.0 } else { (g - h_hi - slack).max(0.0) },
        f_upper: (g - h_lo + slack).max(0.0),
        named,
        point,
        lost,
        children,
    }
}

pub struct WordExplorer<'m> {
    machine: &'m dyn Machine,
    options: ExploreOptions,
    t: usize,
    t_max: usize,
    nodes: Vec<WordNode>,
    synced: f64,
    /// Support tail plus all mass pruned or lost so far.
    dropped: f64,
    log_size: f64,
}

impl<'m> WordExplorer<'m> {
    /// Start at the empty word, using a stationary support exact for
    /// `t_max + 1` steps.
    pub fn new(machine: &'m dyn Machine, t_max: usize, options: ExploreOptions) -> Self {
        let start = SparseDistribution::from_support(&machine.support(options.mass_tol, t_max + 1));
        let synced = match point_state(machine, &start) {
            Some(_) => start.named_mass(),
            None => 0.0,
        };
        let dropped = start.tail();
        WordExplorer {
            machine,
            options,
            t: 0,
            t_max,
            nodes: vec![WordNode {
                word: Vec::new(),
                dist: start,
            }],
            synced,
            dropped,
            log_size: machine.alphabet().log_size(),
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn nodes(&self) -> &[WordNode] {
        &self.nodes
    }

    pub fn machine(&self) -> &dyn Machine {
        self.machine
    }

    /// Stationary mass not carried by any current node, accumulated from
    /// the support tail, pruning and expansion losses rather than as
    /// `1 − Σ named`.
    pub fn dropped_mass(&self) -> f64 {
        self.dropped
    }

    fn evaluate_all(&self, want_children: bool) -> Vec<NodeEval> {
        let machine = self.machine;
        self.nodes
            .par_iter()
            .map(|node| evaluate(machine, &node.dist, want_children))
            .collect()
    }

    fn stats_from(&self, evals: &[NodeEval]) -> LevelStats {
        let named: f64 = evals.iter().map(|e| e.named).sum();
        let tail = (1.0 - named).max(0.0);
        let g: f64 = evals.iter().map(|e| e.g).sum();
        let f_lo: f64 = evals.iter().map(|e| e.f_lower).sum();
        let f_hi: f64 = evals.iter().map(|e| e.f_upper).sum();
        let widen = tail * self.log_size + binary_entropy(tail.min(0.5)) + 1e-14;
        let unsync: f64 = evals.iter().filter(|e| !e.point).map(|e| e.named).sum();
        LevelStats {
            t: self.t,
            nodes: self.nodes.len(),
            tail,
            next_entropy: Enclosure::new(g * (1.0 - 1e-14), g + widen),
            gap: Enclosure::new(f_lo, f_hi + widen),
            unsync_named: unsync,
            synced: self.synced,
        }
    }

    /// Sums over the current level.
    pub fn stats(&self) -> LevelStats {
        self.stats_from(&self.evaluate_all(false))
    }

    /// Statistics of the current level, then move to the next one.
    pub fn advance(&mut self) -> Result<LevelStats> {
        let evals = self.evaluate_all(true);
        let stats = self.stats_from(&evals);
        let machine = self.machine;
        let mut words = Vec::new();
        let mut points: BTreeMap<StateKey, SparseDistribution> = BTreeMap::new();
        let mut newly_synced = 0.0;
        for (node, eval) in self.nodes.iter().zip(evals) {
            self.dropped += eval.lost;
            for (code, child) in eval.children.into_iter().enumerate() {
                if child.is_empty() {
                    continue;
                }
                let point = point_state(machine, &child);
                if point.is_some() && !eval.point {
                    newly_synced += child.argmax().map(|(_, m)| m).unwrap_or(0.0);
                }
                match point {
                    Some(key) if self.options.merge_points => {
                        let entry = points.entry(key).or_default();
                        for (k, &m) in child.iter() {
                            entry.add(*k, m);
                        }
                        entry.set_tail(entry.tail().max(child.tail()));
                    }
                    _ => {
                        let mut word = Vec::with_capacity(node.word.len() + 1);
                        if !(self.options.merge_points && node.word.is_empty() && self.t > 0) {
                            word.extend_from_slice(&node.word);
                            word.push(Symbol(code as u8));
                        }
                        words.push(WordNode { word, dist: child });
                    }
                }
            }
        }
        self.synced += newly_synced;
        words.extend(points.into_values().map(|dist| WordNode {
            word: Vec::new(),
            dist,
        }));
        self.t += 1;
        self.dropped += self.prune(&mut words);
        if words.len() > self.options.cap {
            return Err(Error::Budget {
                cap: self.options.cap,
                t: self.t,
            });
        }
        self.nodes = words;
        Ok(stats)
    }

    /// Drop the lightest words while their combined mass stays within this
    /// level's share of the pruning budget.
    fn prune(&self, words: &mut Vec<WordNode>) -> f64 {
        let budget = self.options.mass_tol / self.t_max.max(1) as f64;
        let masses: Vec<f64> = words.iter().map(|w| w.dist.named_mass()).collect();
        let mut order: Vec<usize> = (0..words.len()).collect();
        order.sort_by(|&a, &b| masses[a].total_cmp(&masses[b]).then(a.cmp(&b)));
        let mut used = 0.0;
        let mut keep = vec![true; words.len()];
        for &i in &order {
            if used + masses[i] > budget {
                break;
            }
            used += masses[i];
            keep[i] = false;
        }
        let mut idx = 0;
        words.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
        used
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::even::even_machine;
    use crate::processes::finite::iid_coin;

    #[test]
    fn coin_levels_have_unit_entropy_and_no_gap() {
        let m = iid_coin();
        let mut ex = WordExplorer::new(&m, 4, ExploreOptions::new(1e-12));
        for _ in 0..4 {
            let s = ex.advance().unwrap();
            assert!(s.next_entropy.contains_within(1.0, 1e-12), "{}", s.next_entropy);
            assert!(s.gap.upper < 1e-12);
            assert_eq!(s.unsync_named, 0.0);
        }
        assert_eq!(ex.nodes().len(), 1, "synchronized words merge");
    }

    #[test]
    fn even_words_are_not_merged_in_exhaustive_mode() {
        let m = even_machine(0.5).unwrap();
        let mut ex = WordExplorer::new(&m, 3, ExploreOptions::exhaustive_words(1e-12));
        for _ in 0..3 {
            ex.advance().unwrap();
        }
        assert!(ex.nodes().iter().all(|n| n.word.len() == 3));
        let total: f64 = ex.nodes().iter().map(|n| n.dist.named_mass()).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cap_is_enforced() {
        let m = iid_coin();
        let opts = ExploreOptions {
            cap: 7,
            ..ExploreOptions::exhaustive_words(1e-12)
        };
        let mut ex = WordExplorer::new(&m, 4, opts);
        ex.advance().unwrap();
        ex.advance().unwrap();
        assert!(matches!(ex.advance(), Err(Error::Budget { cap: 7, t: 3 })));
    }
}
