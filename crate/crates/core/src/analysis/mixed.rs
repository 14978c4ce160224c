use crate::enclosure::{binary_entropy, entropy_bits, Enclosure};
use crate::error::{Error, Result};
use crate::forward::{forward_vector, SparseDistribution};
use crate::machine::{symbol_marginal, Machine, Symbol};

/// `φ(w)`: the state distribution conditioned on having seen `w`.
///
/// Named entries are lower bounds `v_σ / (‖v‖ + τ)`; the tail bounds the
/// conditional mass not accounted for.
#[derive(Debug, Clone)]
pub struct MixedState {
    pub word: Vec<Symbol>,
    pub dist: SparseDistribution,
    pub probability: Enclosure,
}

pub fn mixed_state(machine: &dyn Machine, word: &[Symbol], eps: f64) -> Result<MixedState> {
    let v = forward_vector(machine, word, eps)?;
    let probability = v.norm();
    if probability.upper <= eps || v.is_empty() {
        return Err(Error::ZeroProbability {
            word: machine.alphabet().render(word),
        });
    }
    let scale = 1.0 / probability.upper;
    let mut dist = v.scaled(scale);
    dist.set_tail(v.tail() * scale);
    Ok(MixedState {
        word: word.to_vec(),
        dist,
        probability,
    })
}

/// `(h_w, h̃_w)`: the entropy of the next symbol given `w`, and the
/// `φ(w)`-average of the per-state next-symbol entropies.
pub fn entropy_gap(machine: &dyn Machine, word: &[Symbol], eps: f64) -> Result<(Enclosure, Enclosure)> {
    let ms = mixed_state(machine, word, eps)?;
    Ok(gap_of(machine, &ms.dist))
}

/// Bounds on `(h_w, h̃_w)` for a (sub-)distribution with tail.
pub fn gap_of(machine: &dyn Machine, dist: &SparseDistribution) -> (Enclosure, Enclosure) {
    let n = machine.alphabet().len();
    let log_size = machine.alphabet().log_size();
    let mut marginal = vec![0.0; n];
    let mut h_lo = 0.0;
    let mut h_hi = 0.0;
    let named = dist.named_mass();
    for (key, &mass) in dist.iter() {
        for (x, m) in symbol_marginal(&machine.expand(key), n).into_iter().enumerate() {
            marginal[x] += mass * m;
        }
        let h = machine.state_entropy(key);
        h_lo += mass * h.lower;
        h_hi += mass * h.upper;
    }
    let emitted: f64 = marginal.iter().sum();
    // mass whose next symbol is not accounted for
    let unknown = dist.tail() + (named - emitted).max(0.0);
    let total = emitted + unknown;
    let rho = if total > 0.0 { unknown / total } else { 1.0 };
    let h_hat = if emitted > 0.0 {
        entropy_bits(marginal.iter().map(|m| m / emitted))
    } else {
        0.0
    };
    let slack = 1e-13;
    let h_w = Enclosure::new(
        ((1.0 - rho) * h_hat - slack).max(0.0),
        (h_hat + binary_entropy(rho.min(0.5)) + rho * log_size + slack).min(log_size + slack),
    );
    let full = named + dist.tail();
    let h_tilde = Enclosure::new(
        (h_lo / full.max(f64::MIN_POSITIVE) - slack).max(0.0),
        h_hi / named.max(f64::MIN_POSITIVE) + (dist.tail() / full.max(f64::MIN_POSITIVE)) * log_size + slack,
    );
    (h_w, h_tilde)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::even::{even_machine, sigma1, sigma2};

    #[test]
    fn even_zero_synchronizes() {
        let m = even_machine(0.5).unwrap();
        let ms = mixed_state(&m, &[Symbol(0)], 1e-12).unwrap();
        assert!((ms.dist.get(&sigma1()) - 1.0).abs() < 1e-15);
        assert_eq!(ms.dist.len(), 1);
        let (h, ht) = entropy_gap(&m, &[Symbol(0)], 1e-12).unwrap();
        assert!(h.overlaps(&ht, 1e-12));
    }

    #[test]
    fn even_one_is_an_even_mixture() {
        let m = even_machine(0.5).unwrap();
        let ms = mixed_state(&m, &[Symbol(1)], 1e-12).unwrap();
        assert!((ms.dist.get(&sigma1()) - 0.5).abs() < 1e-15);
        assert!((ms.dist.get(&sigma2()) - 0.5).abs() < 1e-15);
        let (h, ht) = entropy_gap(&m, &[Symbol(1)], 1e-12).unwrap();
        // next symbol: 0 w.p. 1/4, 1 w.p. 3/4
        assert!(h.contains_within(binary_entropy(0.25), 1e-12), "{h}");
        assert!(ht.contains_within(0.5, 1e-12), "{ht}");
    }

    #[test]
    fn impossible_word_is_rejected() {
        let m = even_machine(0.5).unwrap();
        let w = m.alphabet().parse_word("010").unwrap();
        assert!(matches!(mixed_state(&m, &w, 1e-12), Err(Error::ZeroProbability { .. })));
    }
}
