//! Heavy-Tailed Periodic Mixture: a disjoint union of period-i cycles
//! `σ_i1 → … → σ_ii → σ_i1` (emitting i−1 ones then a zero), weighted so the
//! component masses are `μ_i = C/(i lg²i)`.
//!
//! Components beyond a cut `I` are carried by tail classes indexed by the
//! number of 1s remaining before the next 0:
//!
//! * `TailExact(I, d)`: states `σ_ij` with `i > I` and `i − j = d`;
//! * `TailAtLeast(I, s)`: states with `i > I` known to emit at least `s`
//!   more 1s. Exact for `s` steps, after which it has no defined expansion.

use std::sync::OnceLock;
use std::f64::consts::LN_2;

use rand::{Rng, RngCore};

use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::machine::{Alphabet, Edge, Machine, StateKey, Support};
use crate::series::{partial_sum, Series};

const NODE: u8 = 0;
const TAIL_EXACT: u8 = 1;
const TAIL_AT_LEAST: u8 = 2;
const TAIL_ALL: u8 = 3;

/// Cut used for the lumped partition in stationarity checks.
const LUMP_CUT: u32 = 64;
/// Components sampled from an explicit table before switching to the
/// continuous approximation of the tail law.
const SAMPLE_TABLE: u64 = 4096;

fn lg(x: f64) -> f64 {
    x.log2()
}

/// `1/(i lg²i)`.
pub fn component_term(i: f64) -> f64 {
    1.0 / (i * lg(i) * lg(i))
}

/// `1/(i² lg²i)`.
pub fn state_term(i: f64) -> f64 {
    1.0 / (i * i * lg(i) * lg(i))
}

type PlainSeries = Series<fn(f64) -> f64, fn(f64) -> Enclosure>;

fn component_series(start: u64) -> PlainSeries {
    Series {
        term: component_term,
        // ∫_N^∞ dx/(x lg²x) = ln2 / lg N
        tail_integral: |n| Enclosure::point(LN_2 / lg(n)),
        start,
        monotone_from: 2,
    }
}

fn state_series(start: u64) -> PlainSeries {
    Series {
        term: state_term,
        tail_integral: |n| inverse_square_log_integral(n.ln()).scale(LN_2 * LN_2),
        start,
        monotone_from: 2,
    }
}

/// `J(a) = ∫_a^∞ e^{−u} u^{−2} du`, which is `∫_{e^a}^∞ dx/(x² ln²x)`.
///
/// Repeated integration by parts gives
/// `J_m = e^{−a} a^{−m} − m J_{m+1}` with `0 ≤ J_m ≤ e^{−a} a^{−m}`; the
/// expansion is stopped at its smallest term.
fn inverse_square_log_integral(a: f64) -> Enclosure {
    let ea = (-a).exp();
    let mut head = 0.0;
    let mut coeff = 1.0; // (−1)^k (k+1)!
    let mut m = 2.0;
    loop {
        let term = coeff * ea * a.powf(-m);
        let next_coeff = -coeff * m;
        let next = (next_coeff * ea * a.powf(-(m + 1.0))).abs();
        head += term;
        if next >= term.abs() || m > 60.0 {
            // remainder is next_coeff · J_{m+1}, J_{m+1} ∈ [0, e^{−a} a^{−(m+1)}]
            let r = next_coeff * ea * a.powf(-(m + 1.0));
            return Enclosure::new(head + r.min(0.0), head + r.max(0.0));
        }
        coeff = next_coeff;
        m += 1.0;
    }
}

/// `Σ_{i≥2} 1/(i lg²i)`.
pub fn hpm_series_sum(tol: f64) -> Enclosure {
    component_series(2).sum(tol)
}

/// Enclosure of `C_HPM = 1 / Σ_{i≥2} 1/(i lg²i)`.
pub fn hpm_normalizer(tol: f64) -> Enclosure {
    // dC = dS / S², and S > 1
    hpm_series_sum(tol).recip()
}

pub struct HpmMachine {
    normalizer: Enclosure,
    series_sum: Enclosure,
    tol: f64,
    alphabet: Alphabet,
}

pub fn node(i: u32, j: u32) -> StateKey {
    StateKey::new(NODE, [i, j, 0])
}

const DEFAULT_TOL: f64 = 1e-10;

/// The default machine; its normalizer is summed once per process.
pub fn hpm_machine() -> HpmMachine {
    static SUM: OnceLock<Enclosure> = OnceLock::new();
    HpmMachine::from_sum(*SUM.get_or_init(|| hpm_series_sum(DEFAULT_TOL)), DEFAULT_TOL)
}

impl HpmMachine {
    pub fn with_tolerance(tol: f64) -> Self {
        Self::from_sum(hpm_series_sum(tol), tol)
    }

    fn from_sum(series_sum: Enclosure, tol: f64) -> Self {
        HpmMachine {
            normalizer: series_sum.recip(),
            series_sum,
            tol,
            alphabet: Alphabet::digits(2),
        }
    }

    pub fn normalizer(&self) -> Enclosure {
        self.normalizer
    }

    /// `μ_i = C/(i lg²i)`.
    pub fn component_mass(&self, i: u64) -> Enclosure {
        self.normalizer.scale(component_term(i as f64))
    }

    /// `Σ_{i>cut} μ_i`.
    pub fn component_tail(&self, cut: u64) -> Enclosure {
        let head = partial_sum(&component_term, 2, cut + 1);
        let rest = Enclosure::new(self.series_sum.lower - head, self.series_sum.upper - head);
        (self.normalizer * rest).clamp_nonneg()
    }

    /// `Σ_{i>cut} π_ij` for a fixed offset `i − j` (independent of the
    /// offset while it is at most `cut`).
    pub fn state_tail(&self, cut: u64) -> Enclosure {
        self.normalizer * state_series(cut + 1).sum(self.tol * 1e-2)
    }

    fn weight(&self, i: u32) -> f64 {
        self.normalizer.lower * state_term(i as f64)
    }

    fn cut_for(horizon: usize) -> u32 {
        (horizon.max(2)) as u32
    }

    /// Draw a component index `i > cut` with probability proportional to
    /// `1/(i² lg²i)` (exact offset class) or `(i − s)/(i² lg²i)`.
    fn draw_component(&self, rng: &mut dyn RngCore, cut: u64, offset: Option<u64>) -> Option<u64> {
        let weight = |i: u64| match offset {
            None => state_term(i as f64),
            Some(s) => (i.saturating_sub(s)) as f64 * state_term(i as f64),
        };
        let table_end = cut + SAMPLE_TABLE;
        let near: f64 = (cut + 1..=table_end).map(weight).sum();
        // integral approximations of the far mass; sampling only
        let a = (table_end + 1) as f64;
        let far = match offset {
            None => state_term(a) * a,
            Some(_) => LN_2 / lg(a),
        };
        let mut u = rng.gen::<f64>() * (near + far);
        if u < near {
            for i in cut + 1..=table_end {
                u -= weight(i);
                if u < 0.0 {
                    return Some(i);
                }
            }
            return Some(table_end);
        }
        let v: f64 = rng.gen_range(f64::EPSILON..1.0);
        let x = match offset {
            // density ∝ 1/x² beyond the table
            None => a / v,
            // density ∝ 1/(x lg²x): tail ln2/lg x, so lg x = lg a / v
            Some(_) => 2f64.powf(lg(a) / v),
        };
        if x < u32::MAX as f64 {
            Some(x.floor() as u64)
        } else {
            None
        }
    }
}

impl Machine for HpmMachine {
    fn name(&self) -> &str {
        "hpm"
    }

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn expand(&self, key: &StateKey) -> Vec<Edge> {
        let [a, b, _] = key.idx;
        match key.tag {
            NODE if a >= 2 && (1..a).contains(&b) => vec![Edge::new(1, 1.0, node(a, b + 1))],
            NODE if a >= 2 && b == a => vec![Edge::new(0, 1.0, node(a, 1))],
            TAIL_EXACT if b >= 1 => {
                vec![Edge::new(1, 1.0, StateKey::new(TAIL_EXACT, [a, b - 1, 0]))]
            }
            TAIL_EXACT => vec![Edge::new(0, 1.0, StateKey::new(TAIL_AT_LEAST, [a, a, 0]))],
            TAIL_AT_LEAST if b >= 1 => {
                vec![Edge::new(1, 1.0, StateKey::new(TAIL_AT_LEAST, [a, b - 1, 0]))]
            }
            TAIL_ALL => {
                let zero = (self.state_tail(a as u64).mid() / self.component_tail(a as u64).mid())
                    .clamp(0.0, 1.0);
                vec![
                    Edge::new(0, zero, *key),
                    Edge::new(1, 1.0 - zero, *key),
                ]
            }
            _ => Vec::new(),
        }
    }

    fn stationary_weight(&self, key: &StateKey) -> Result<f64> {
        let [a, b, _] = key.idx;
        match key.tag {
            NODE if a >= 2 && (1..=a).contains(&b) => Ok(self.weight(a)),
            TAIL_EXACT if b <= a => Ok(self.state_tail(a as u64).lower),
            TAIL_AT_LEAST if b <= a => Ok((self.component_tail(a as u64).lower
                - b as f64 * self.state_tail(a as u64).upper)
                .max(0.0)),
            TAIL_ALL => Ok(self.component_tail(a as u64).lower),
            _ => Err(Error::InvalidState(format!(
                "{} is not an HPM state (components start at i = 2)",
                self.label(key)
            ))),
        }
    }

    fn support(&self, _eps: f64, horizon: usize) -> Support {
        let cut = Self::cut_for(horizon);
        let mut entries = Vec::new();
        for i in 2..=cut {
            for j in 1..=i {
                entries.push((node(i, j), self.weight(i)));
            }
        }
        let m2 = self.state_tail(cut as u64);
        let m1 = self.component_tail(cut as u64);
        let h = horizon.max(1) as u32;
        for d in 0..h {
            entries.push((StateKey::new(TAIL_EXACT, [cut, d, 0]), m2.lower));
        }
        let rest = (m1.lower - h as f64 * m2.upper).max(0.0);
        entries.push((StateKey::new(TAIL_AT_LEAST, [cut, h, 0]), rest));
        let named: f64 = entries.iter().map(|(_, w)| w).sum();
        Support {
            entries,
            tail: (1.0 - named).max(0.0),
        }
    }

    fn lumped_support(&self, _eps: f64) -> Support {
        let mut entries = Vec::new();
        for i in 2..=LUMP_CUT {
            for j in 1..=i {
                entries.push((node(i, j), self.weight(i)));
            }
        }
        let far = self.component_tail(LUMP_CUT as u64).lower;
        entries.push((StateKey::new(TAIL_ALL, [LUMP_CUT, 0, 0]), far));
        let named: f64 = entries.iter().map(|(_, w)| w).sum();
        Support {
            entries,
            tail: (1.0 - named).max(0.0),
        }
    }

    fn state_entropy(&self, _key: &StateKey) -> Enclosure {
        Enclosure::point(0.0)
    }

    fn is_point(&self, key: &StateKey) -> bool {
        key.tag == NODE
    }

    fn is_resolved(&self, key: &StateKey) -> bool {
        key.tag == NODE
    }

    fn resolve(&self, key: &StateKey, rng: &mut dyn RngCore) -> StateKey {
        let [cut, b, _] = key.idx;
        match key.tag {
            TAIL_EXACT => match self.draw_component(rng, cut as u64, None) {
                Some(i) => node(i as u32, i as u32 - b),
                None => StateKey::new(TAIL_AT_LEAST, [cut, b, 0]),
            },
            TAIL_AT_LEAST => match self.draw_component(rng, cut as u64, Some(b as u64)) {
                Some(i) => {
                    let j = rng.gen_range(1..=(i - b as u64)) as u32;
                    node(i as u32, j)
                }
                None => StateKey::new(TAIL_AT_LEAST, [cut, u32::MAX, 0]),
            },
            _ => *key,
        }
    }

    fn label(&self, key: &StateKey) -> String {
        let [a, b, _] = key.idx;
        match key.tag {
            NODE => format!("s{a},{b}"),
            TAIL_EXACT => format!("tail>{a}[d={b}]"),
            TAIL_AT_LEAST => format!("tail>{a}[d>={b}]"),
            _ => format!("tail>{a}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::step_stationarity_residual;
    use crate::machine::{reachable_sample, validate_machine};

    #[test]
    fn normalizer_width_and_first_term() {
        assert_eq!(component_term(2.0), 0.5);
        let c = hpm_normalizer(1e-6);
        assert!(c.width() <= 1e-6, "{c}");
        // reference value, partial sum to 1e7 plus integral tail
        assert!(c.contains_within(0.986_551_052_47, 1e-9), "{c}");
    }

    #[test]
    fn component_masses_sum_to_one() {
        let m = hpm_machine();
        let head: f64 = (2..=1000).map(|i| component_term(i as f64)).sum();
        let total = m.normalizer().scale(head) + m.component_tail(1000);
        assert!(total.contains_within(1.0, 1e-9), "{total}");
    }

    #[test]
    fn expansion_follows_the_cycle() {
        let m = hpm_machine();
        assert_eq!(m.expand(&node(3, 2)), vec![Edge::new(1, 1.0, node(3, 3))]);
        assert_eq!(m.expand(&node(3, 3)), vec![Edge::new(0, 1.0, node(3, 1))]);
        let w = m.stationary_weight(&node(2, 1)).unwrap();
        assert!((w - m.normalizer().lower / 4.0).abs() < 1e-15);
        assert!(matches!(m.stationary_weight(&node(1, 1)), Err(Error::InvalidState(_))));
    }

    #[test]
    fn log_integral_bracket() {
        // J(a) = e^{-a}/a − E1(a), E1(10) = 4.156968929685324e-6
        let j = inverse_square_log_integral(10.0);
        assert!(j.contains((-10f64).exp() / 10.0 - 4.156_968_929_685_324e-6), "{j}");
        assert!(j.width() < 1e-8);
        let far = inverse_square_log_integral(20.0);
        assert!(far.width() < 1e-6 * far.upper && far.lower > 0.0, "{far}");
        let direct = state_series(3).sum(1e-13);
        assert!(direct.width() < 1e-12, "{direct}");
    }

    #[test]
    fn support_is_valid_and_unifilar() {
        let m = hpm_machine();
        let keys = reachable_sample(&m, 6, 1e-9);
        let report = validate_machine(&m, &keys, true).unwrap();
        assert!(report.unifilar);
        let s = m.support(1e-9, 8);
        assert!(s.tail < 1e-8, "tail {}", s.tail);
        assert!((s.mass() + s.tail - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationarity_residual_is_small() {
        let m = hpm_machine();
        for eps in [1e-4, 1e-6] {
            assert!(step_stationarity_residual(&m, eps) <= 2.0 * eps);
        }
    }
}
