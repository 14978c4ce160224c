//! Branching Copy process.
//!
//! From the root the machine either emits `4` and stays, or descends a binary
//! tree emitting `0`/`1`. At depth `i` it keeps descending with probability
//! `q_i` per branch or turns back with probability `p_i`, after which it
//! replays the path taken down as `2`/`3` (descent order) and returns to the
//! root.
//!
//! Node keys carry the path as known/unknown bits: bit `m − 1` of
//! `mask`/`bits` is path position `m` (the `m`-th descent step). A key with
//! unknown positions is the class of all nodes agreeing on the known ones.
//! Since unobserved path bits are uniform under the stationary law, such a
//! class propagates exactly: a copy of an unknown bit emits `2` or `3` with
//! equal probability and the bit becomes known. Positions beyond 128 are not
//! stored and always count as unknown.
//!
//! Aggregate keys cover the deep part of the stationary distribution:
//!
//! * `Deep(m, g)`: tree nodes of depth `> m`, weighted `∝ 1/i²`, whose first
//!   `g` path positions are unobserved;
//! * `RetTail(r)`: return states with exactly `r` copies left to emit;
//! * `RetFar(s)`: return states with at least `s` unobserved copies left.
//!   Exact for `s` steps only.

use std::f64::consts::PI;

use rand::{Rng, RngCore};

use crate::enclosure::{entropy_bits, Enclosure};
use crate::error::{Error, Result};
use crate::machine::{Alphabet, Edge, Machine, StateKey, Support};
use crate::series::{partial_sum, zeta2_tail, Series};

const NODE: u8 = 0;
const DEEP: u8 = 1;
const RET_TAIL: u8 = 2;
const RET_FAR: u8 = 3;

/// Number of path positions stored in a key.
pub const STORED_BITS: u32 = 128;

pub const DEFAULT_Q0: f64 = 1e-4;
const ROOT_ENTROPY_BUDGET: f64 = 1.0 / 300.0;

/// `H[(p0, q0, q0)]` and whether it meets the `1/300` bit budget.
pub fn bc_root_entropy_check(q0: f64) -> Result<(f64, bool)> {
    if !(q0 > 0.0 && q0 < 0.5) {
        return Err(Error::Param(format!("BC needs 0 < q0 < 1/2, got {q0}")));
    }
    let h = entropy_bits([1.0 - 2.0 * q0, q0, q0]);
    Ok((h, h <= ROOT_ENTROPY_BUDGET))
}

/// `q_i`: probability of each descent branch at depth `i ≥ 1`.
pub fn q_at(i: u64) -> f64 {
    let x = i as f64;
    x * x / (2.0 * (x + 1.0) * (x + 1.0))
}

/// `p_i`: probability of turning back at depth `i ≥ 1`.
pub fn p_at(i: u64) -> f64 {
    let x = i as f64;
    (2.0 * x + 1.0) / ((x + 1.0) * (x + 1.0))
}

/// `H[(p_i, q_i, q_i)]`.
pub fn branch_entropy(i: u64) -> f64 {
    entropy_bits([p_at(i), q_at(i), q_at(i)])
}

/// Mass of all non-root states per unit `C`, term by term:
/// `1/i² + (i−1) p_i / i² = 1/x − 1/(x+1) + 2/(x+1)²`.
fn excursion_term(x: f64) -> f64 {
    1.0 / x - 1.0 / (x + 1.0) + 2.0 / ((x + 1.0) * (x + 1.0))
}

/// `(π_root, C)` with `C = π_root (1 − p0)`.
pub fn bc_normalizer(q0: f64, tol: f64) -> Result<(Enclosure, Enclosure)> {
    bc_root_entropy_check(q0)?;
    let excursion = Series {
        term: excursion_term,
        tail_integral: |n: f64| Enclosure::point((1.0 + 1.0 / n).ln() + 2.0 / (n + 1.0)),
        start: 1,
        monotone_from: 1,
    };
    let leave = 2.0 * q0;
    // π_root = 1/(1 + (1−p0) S); the width shrinks by (1−p0) ≤ 1
    let s = excursion.sum(tol / leave.max(1e-300));
    let root = (Enclosure::point(1.0) + s.scale(leave)).recip();
    Ok((root, root.scale(leave)))
}

/// Expected `Σ_{i>m} H_i / i²` for the tree levels below `m`.
pub fn deep_entropy_sum(m: u64) -> Enclosure {
    let cut = (m + 1).max(1 << 16);
    let head = partial_sum(&|x: f64| branch_entropy(x as u64) / (x * x), m + 1, cut);
    // for i ≥ 3: H_i = h(p_i) + (1 − p_i) ∈ [1, 1 + p_i lg(e/p_i)], p_i ≤ 2/i
    let w = zeta2_tail(cut - 1);
    let p = 2.0 / cut as f64;
    let extra = p * (std::f64::consts::E / p).log2();
    Enclosure::new(head + w.lower, head + w.upper * (1.0 + extra))
}

#[derive(Debug, Clone)]
pub struct BcMachine {
    q0: f64,
    root_mass: Enclosure,
    c: Enclosure,
    /// `Σ_{i≥1} H_i / i²`, from which level tails are obtained by
    /// subtracting short heads.
    entropy_series: Enclosure,
    alphabet: Alphabet,
}

pub fn bc_machine(q0: f64) -> Result<BcMachine> {
    let (root_mass, c) = bc_normalizer(q0, 1e-14)?;
    Ok(BcMachine {
        q0,
        root_mass,
        c,
        entropy_series: deep_entropy_sum(0),
        alphabet: Alphabet::digits(5),
    })
}

pub fn root() -> StateKey {
    StateKey::new(NODE, [0, 1, 0])
}

fn position_bit(m: u32) -> u128 {
    1u128 << (m - 1)
}

fn stored(i: u32) -> u32 {
    i.min(STORED_BITS)
}

fn low_mask(n: u32) -> u128 {
    if n >= 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

/// Concrete state `σ_ij^k` with every path bit known. `j − 1` written with
/// `i` binary digits, most significant first, is the path (0 = symbol 0).
pub fn bc_state(i: u32, j: u64, k: u32) -> StateKey {
    assert!((1..=STORED_BITS).contains(&i) && i <= 63, "depth out of range for a concrete key");
    let mut key = StateKey::new(NODE, [i, k, 0]);
    let path = j - 1;
    for m in 1..=i {
        if (path >> (i - m)) & 1 == 1 {
            key.bits |= position_bit(m);
        }
    }
    key.mask = low_mask(i);
    key
}

/// Class of all depth-`i` states at return position `k` with no path bit
/// known.
pub fn bc_level(i: u32, k: u32) -> StateKey {
    StateKey::new(NODE, [i, k, 0])
}

impl BcMachine {
    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn p0(&self) -> f64 {
        1.0 - 2.0 * self.q0
    }

    pub fn root_mass(&self) -> Enclosure {
        self.root_mass
    }

    /// `C = π_root (1 − p0)`.
    pub fn normalizer(&self) -> Enclosure {
        self.c
    }

    pub fn root_entropy(&self) -> f64 {
        entropy_bits([self.p0(), self.q0, self.q0])
    }

    /// `Σ_{i>m} H_i / i²`.
    pub fn deep_entropy(&self, m: u64) -> Enclosure {
        if m > 4096 {
            return deep_entropy_sum(m);
        }
        let head = partial_sum(&|x: f64| branch_entropy(x as u64) / (x * x), 1, m + 1);
        Enclosure::new(self.entropy_series.lower - head - 1e-15, self.entropy_series.upper - head + 1e-15)
    }

    fn p(&self, i: u32) -> f64 {
        if i == 0 {
            self.p0()
        } else {
            p_at(i as u64)
        }
    }

    fn q(&self, i: u32) -> f64 {
        if i == 0 {
            self.q0
        } else {
            q_at(i as u64)
        }
    }

    /// Edges emitting the copy of path position `m` with total probability
    /// `prob`; `to` builds the target from the updated key.
    fn copy_edges(&self, key: &StateKey, m: u32, prob: f64, to: impl Fn(StateKey) -> StateKey) -> Vec<Edge> {
        if m <= STORED_BITS && key.mask & position_bit(m) != 0 {
            let b = (key.bits & position_bit(m) != 0) as u8;
            return vec![Edge::new(2 + b, prob, to(*key))];
        }
        let (mut zero, mut one) = (*key, *key);
        if m <= STORED_BITS {
            zero.mask |= position_bit(m);
            one.mask |= position_bit(m);
            one.bits |= position_bit(m);
        }
        vec![Edge::new(2, prob / 2.0, to(zero)), Edge::new(3, prob / 2.0, to(one))]
    }

    fn expand_node(&self, key: &StateKey) -> Vec<Edge> {
        let [i, k, _] = key.idx;
        if i == 0 {
            let mut child = StateKey::new(NODE, [1, 1, 0]);
            child.mask = 1;
            let mut one = child;
            one.bits = 1;
            return vec![
                Edge::new(0, self.q0, child),
                Edge::new(1, self.q0, one),
                Edge::new(4, self.p0(), root()),
            ];
        }
        if k == 1 {
            let (q, p) = (self.q(i), self.p(i));
            let mut zero = *key;
            zero.idx[0] = i + 1;
            if i < STORED_BITS {
                zero.mask |= position_bit(i + 1);
            }
            let mut one = zero;
            if i < STORED_BITS {
                one.bits |= position_bit(i + 1);
            }
            let mut edges = vec![Edge::new(0, q, zero), Edge::new(1, q, one)];
            edges.extend(self.copy_edges(key, 1, p, |mut t| {
                if i == 1 {
                    root()
                } else {
                    t.idx[1] = 2;
                    t
                }
            }));
            return edges;
        }
        self.copy_edges(key, k, 1.0, |mut t| {
            if k == i {
                root()
            } else {
                t.idx[1] = k + 1;
                t
            }
        })
    }

    fn valid_node(&self, key: &StateKey) -> bool {
        let [i, k, z] = key.idx;
        if z != 0 || key.bits & !key.mask != 0 {
            return false;
        }
        if i == 0 {
            return k == 1 && key.mask == 0;
        }
        (k == 1 || (2..=i).contains(&k)) && key.mask & !low_mask(stored(i)) == 0
    }

    /// Sample `n > m` with probability `∝ 1/n²`.
    fn draw_inverse_square(rng: &mut dyn RngCore, m: u64) -> u64 {
        const TABLE: u64 = 4096;
        let near: f64 = (m + 1..=m + TABLE).map(|n| 1.0 / (n as f64).powi(2)).sum();
        let far = zeta2_tail(m + TABLE).mid();
        let mut u = rng.gen::<f64>() * (near + far);
        if u < near {
            for n in m + 1..=m + TABLE {
                u -= 1.0 / (n as f64).powi(2);
                if u < 0.0 {
                    return n;
                }
            }
            return m + TABLE;
        }
        // continuous 1/x² tail beyond the table
        let a = (m + TABLE) as f64 + 0.5;
        let v: f64 = rng.gen_range(f64::EPSILON..1.0);
        (a / v).min(u32::MAX as f64 - 1.0).ceil() as u64
    }
}

impl Machine for BcMachine {
    fn name(&self) -> &str {
        "bc"
    }

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn expand(&self, key: &StateKey) -> Vec<Edge> {
        let [a, b, _] = key.idx;
        match key.tag {
            NODE if self.valid_node(key) => self.expand_node(key),
            DEEP => {
                let m = a as u64;
                let w = zeta2_tail(m).mid();
                let w_next = zeta2_tail(m + 1).mid();
                let descend = w_next / (2.0 * w);
                let back = (1.0 - 2.0 * descend) / 2.0;
                let next = StateKey::new(DEEP, [a + 1, b, 0]);
                let far = StateKey::new(RET_FAR, [b.saturating_sub(1), 0, 0]);
                vec![
                    Edge::new(0, descend, next),
                    Edge::new(1, descend, next),
                    Edge::new(2, back, far),
                    Edge::new(3, back, far),
                ]
            }
            RET_TAIL if a >= 1 => {
                let next = if a == 1 { root() } else { StateKey::new(RET_TAIL, [a - 1, 0, 0]) };
                vec![Edge::new(2, 0.5, next), Edge::new(3, 0.5, next)]
            }
            RET_FAR if a >= 1 => {
                let next = StateKey::new(RET_FAR, [a - 1, 0, 0]);
                vec![Edge::new(2, 0.5, next), Edge::new(3, 0.5, next)]
            }
            _ => Vec::new(),
        }
    }

    fn stationary_weight(&self, key: &StateKey) -> Result<f64> {
        let [a, b, _] = key.idx;
        let c = self.c.lower;
        match key.tag {
            NODE if self.valid_node(key) => {
                if a == 0 {
                    return Ok(self.root_mass.lower);
                }
                let known = key.mask.count_ones() as i32;
                let level = c / (a as f64).powi(2) * 0.5f64.powi(known);
                Ok(if b == 1 { level } else { level * self.p(a) })
            }
            DEEP => Ok(c * zeta2_tail(a as u64).lower),
            RET_TAIL if a >= 1 => Ok(c / ((a as f64) + 1.0).powi(2)),
            RET_FAR => Ok(c * zeta2_tail(a as u64).lower),
            _ => Err(Error::InvalidState(format!("{} is not a BC state", self.label(key)))),
        }
    }

    fn support(&self, _eps: f64, horizon: usize) -> Support {
        let cut = horizon.max(2) as u32 + 1;
        let c = self.c.lower;
        let mut entries = vec![(root(), self.root_mass.lower)];
        for i in 1..=cut {
            entries.push((bc_level(i, 1), c / (i as f64).powi(2)));
        }
        entries.push((StateKey::new(DEEP, [cut, cut, 0]), c * zeta2_tail(cut as u64).lower));
        for r in 1..cut {
            entries.push((StateKey::new(RET_TAIL, [r, 0, 0]), c / ((r as f64) + 1.0).powi(2)));
        }
        entries.push((StateKey::new(RET_FAR, [cut, 0, 0]), c * zeta2_tail(cut as u64).lower));
        let named: f64 = entries.iter().map(|(_, w)| w).sum();
        Support {
            entries,
            tail: (1.0 - named).max(0.0),
        }
    }

    fn lumped_support(&self, eps: f64) -> Support {
        let c = self.c.lower;
        let depth = ((3.0 * c / eps).ceil() as u32).clamp(4, 4000);
        let mut entries = vec![(root(), self.root_mass.lower)];
        for i in 1..=depth {
            let level = c / (i as f64).powi(2);
            entries.push((bc_level(i, 1), level));
            for k in 2..=i {
                entries.push((bc_level(i, k), level * self.p(i)));
            }
        }
        let named: f64 = entries.iter().map(|(_, w)| w).sum();
        Support {
            entries,
            tail: (1.0 - named).max(0.0),
        }
    }

    fn lump(&self, key: &StateKey) -> StateKey {
        if key.tag == NODE {
            StateKey::new(NODE, key.idx)
        } else {
            *key
        }
    }

    fn state_entropy(&self, key: &StateKey) -> Enclosure {
        let [a, b, _] = key.idx;
        match key.tag {
            NODE if a == 0 => Enclosure::point(self.root_entropy()),
            NODE if b == 1 => Enclosure::point(branch_entropy(a as u64)),
            DEEP => {
                let w = zeta2_tail(a as u64);
                let s = self.deep_entropy(a as u64);
                Enclosure::new(s.lower / w.upper, s.upper / w.lower)
            }
            _ => Enclosure::point(0.0),
        }
    }

    fn is_point(&self, key: &StateKey) -> bool {
        let i = key.idx[0];
        key.tag == NODE && i <= STORED_BITS && key.mask == low_mask(i)
    }

    fn resolve(&self, key: &StateKey, rng: &mut dyn RngCore) -> StateKey {
        match key.tag {
            DEEP => {
                let i = Self::draw_inverse_square(rng, key.idx[0] as u64);
                bc_level(i as u32, 1)
            }
            RET_FAR => {
                let n = Self::draw_inverse_square(rng, key.idx[0] as u64);
                StateKey::new(RET_TAIL, [(n - 1) as u32, 0, 0])
            }
            _ => *key,
        }
    }

    fn label(&self, key: &StateKey) -> String {
        let [a, b, _] = key.idx;
        match key.tag {
            NODE if a == 0 => "root".to_string(),
            NODE => {
                let path: String = (1..=stored(a))
                    .map(|m| match (key.mask & position_bit(m) != 0, key.bits & position_bit(m) != 0) {
                        (false, _) => '?',
                        (true, false) => '0',
                        (true, true) => '1',
                    })
                    .collect();
                let kind = if b == 1 { "t" } else { "r" };
                format!("{kind}{a},{b}:{path}")
            }
            DEEP => format!("deep>{a}"),
            RET_TAIL => format!("ret[{a}]"),
            _ => format!("ret[>={a}]"),
        }
    }
}

/// Closed form `π_root = 1 / (1 + (1 − p0)(π²/3 − 1))`, for cross-checks.
pub fn root_mass_closed_form(q0: f64) -> f64 {
    1.0 / (1.0 + 2.0 * q0 * (PI * PI / 3.0 - 1.0))
}
