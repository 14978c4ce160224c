use std::collections::BTreeMap;

use serde::Serialize;

use crate::analysis::explore::{ExploreOptions, WordExplorer};
use crate::enclosure::{binary_entropy, plogp, Enclosure};
use crate::error::Result;
use crate::machine::{Machine, Symbol};

/// Length-`t` words with (lower bounds on) their probabilities. `tail` is the
/// probability of everything not listed, so entries and tail sum to one.
#[derive(Debug, Clone, Serialize)]
pub struct WordTable {
    pub t: usize,
    pub entries: BTreeMap<Vec<u8>, f64>,
    pub tail: f64,
    pub log_alphabet: f64,
}

impl WordTable {
    pub fn get(&self, word: &[Symbol]) -> f64 {
        let codes: Vec<u8> = word.iter().map(|s| s.0).collect();
        self.entries.get(&codes).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }
}

pub fn word_table(machine: &dyn Machine, t: usize, mass_tol: f64) -> Result<WordTable> {
    let log_alphabet = machine.alphabet().log_size();
    if t == 0 {
        return Ok(WordTable {
            t,
            entries: BTreeMap::from([(Vec::new(), 1.0)]),
            tail: 0.0,
            log_alphabet,
        });
    }
    let mut ex = WordExplorer::new(machine, t, ExploreOptions::exhaustive_words(mass_tol));
    for _ in 0..t {
        ex.advance()?;
    }
    let entries: BTreeMap<Vec<u8>, f64> = ex
        .nodes()
        .iter()
        .map(|n| (n.word.iter().map(|s| s.0).collect(), n.dist.named_mass()))
        .filter(|(_, m)| *m > 0.0)
        .collect();
    let tail = ex.dropped_mass();
    Ok(WordTable {
        t,
        entries,
        tail,
        log_alphabet,
    })
}

/// Enclosure of `H[X^t]` from a table with named masses `n_w ≤ P(w)` and
/// unaccounted mass `τ`.
///
/// Lower: by Gibbs' inequality against the renormalized named part,
/// `H ≥ −Σ n lg n + (1−τ) lg(1−τ)`. Upper: splitting `P` into named and
/// unnamed parts bounds `H` by the mixture entropy `h_b(τ)` plus the parts'
/// entropies, the unnamed part having at most `t lg|X|`.
pub fn block_entropy(table: &WordTable) -> Enclosure {
    let tau = table.tail.clamp(0.0, 1.0);
    let named: f64 = table.entries.values().map(|&p| plogp(p)).sum();
    let renorm = -plogp(1.0 - tau);
    let lower = (named + renorm).max(0.0);
    let upper = named + renorm + binary_entropy(tau) + tau * table.t as f64 * table.log_alphabet;
    // round-off in the sums
    let slack = 1e-13 * (1.0 + upper.abs());
    Enclosure::new((lower - slack).max(0.0), upper + slack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::even::even_machine;
    use crate::processes::hpm::{hpm_machine, state_term};

    fn table(entries: &[(&[u8], f64)], tail: f64, t: usize) -> WordTable {
        WordTable {
            t,
            entries: entries.iter().map(|(w, p)| (w.to_vec(), *p)).collect(),
            tail,
            log_alphabet: 1.0,
        }
    }

    #[test]
    fn even_length_two_words() {
        let m = even_machine(0.5).unwrap();
        let t = word_table(&m, 2, 1e-12).unwrap();
        let sixth = 1.0 / 6.0;
        for (w, p) in [([0u8, 0], sixth), ([0, 1], sixth), ([1, 0], sixth), ([1, 1], 0.5)] {
            assert!((t.entries[&w.to_vec()] - p).abs() < 1e-15, "{w:?}");
        }
        assert!(t.tail < 1e-15);
    }

    #[test]
    fn empty_word_has_probability_one() {
        let t = word_table(&hpm_machine(), 0, 1e-9).unwrap();
        assert_eq!(t.entries[&Vec::new()], 1.0);
    }

    #[test]
    fn hpm_word_101_collects_every_component() {
        // 1,0,1 is read exactly from phase σ_i,i−1 in each component i
        let m = hpm_machine();
        let t = word_table(&m, 3, 1e-12).unwrap();
        let c = m.normalizer();
        let head: f64 = (2..=2000).map(|i| state_term(i as f64)).sum();
        let oracle = c.scale(head) + m.state_tail(2000);
        let p = t.entries[&vec![1, 0, 1]];
        assert!(p <= oracle.upper + 1e-15 && p + t.tail >= oracle.lower, "{p} vs {oracle}");
        assert!(p > c.upper / 4.0, "more than component 2 alone");
    }

    #[test]
    fn block_entropy_examples() {
        let det = block_entropy(&table(&[(&[0], 1.0)], 0.0, 1));
        assert!(det.upper < 1e-12);
        let even = block_entropy(&table(&[(&[0], 1.0 / 3.0), (&[1], 2.0 / 3.0)], 0.0, 1));
        assert!(even.contains_within(binary_entropy(1.0 / 3.0), 1e-12));
        assert!((binary_entropy(1.0 / 3.0) - 0.918_295_834_054_489_6).abs() < 1e-15);
        let uni = block_entropy(&table(&[(&[0, 0], 0.25), (&[0, 1], 0.25), (&[1, 0], 0.25), (&[1, 1], 0.25)], 0.0, 2));
        assert!(uni.contains_within(2.0, 1e-12));
    }

    #[test]
    fn block_entropy_bounds_a_truncated_distribution() {
        // true law: uniform on 8 words of length 3; only 6 are listed
        let entries: Vec<(Vec<u8>, f64)> = (0..6u8).map(|i| (vec![i >> 2 & 1, i >> 1 & 1, i & 1], 0.125)).collect();
        let t = WordTable {
            t: 3,
            entries: entries.into_iter().collect(),
            tail: 0.25,
            log_alphabet: 1.0,
        };
        assert!(block_entropy(&t).contains(3.0));
    }
}
