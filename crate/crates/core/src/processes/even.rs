//! The Even Process: binary sequences whose maximal blocks of 1s bounded by
//! 0s have even length.

use crate::error::{Error, Result};
use crate::machine::{Alphabet, Edge, Machine, StateKey, Support};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvenParams {
    pub p: f64,
}

impl EvenParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Param(format!("Even process needs 0 < p < 1, got {p}")));
        }
        Ok(EvenParams { p })
    }
}

pub struct EvenMachine {
    params: EvenParams,
    alphabet: Alphabet,
}

/// σ1, the state in which a 0 may be emitted.
pub fn sigma1() -> StateKey {
    StateKey::new(0, [1, 0, 0])
}

/// σ2, the middle of a pair of 1s.
pub fn sigma2() -> StateKey {
    StateKey::new(0, [2, 0, 0])
}

pub fn even_machine(p: f64) -> Result<EvenMachine> {
    Ok(EvenMachine {
        params: EvenParams::new(p)?,
        alphabet: Alphabet::digits(2),
    })
}

impl EvenMachine {
    pub fn p(&self) -> f64 {
        self.params.p
    }

    /// `(1/(2−p), (1−p)/(2−p))`.
    pub fn stationary(&self) -> [f64; 2] {
        let p = self.params.p;
        [1.0 / (2.0 - p), (1.0 - p) / (2.0 - p)]
    }
}

impl Machine for EvenMachine {
    fn name(&self) -> &str {
        "even"
    }

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn expand(&self, key: &StateKey) -> Vec<Edge> {
        let p = self.params.p;
        match (key.tag, key.idx[0]) {
            (0, 1) => vec![Edge::new(0, p, sigma1()), Edge::new(1, 1.0 - p, sigma2())],
            (0, 2) => vec![Edge::new(1, 1.0, sigma1())],
            _ => Vec::new(),
        }
    }

    fn stationary_weight(&self, key: &StateKey) -> Result<f64> {
        match (key.tag, key.idx[0]) {
            (0, 1) => Ok(self.stationary()[0]),
            (0, 2) => Ok(self.stationary()[1]),
            _ => Err(Error::InvalidState(key.to_string())),
        }
    }

    fn support(&self, _eps: f64, _horizon: usize) -> Support {
        let [a, b] = self.stationary();
        Support {
            entries: vec![(sigma1(), a), (sigma2(), b)],
            tail: 0.0,
        }
    }

    fn label(&self, key: &StateKey) -> String {
        format!("s{}", key.idx[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{apply_symbol, SparseDistribution};
    use crate::machine::{validate_machine, Symbol};

    #[test]
    fn stationary_matches_caption() {
        let m = even_machine(0.5).unwrap();
        let [a, b] = m.stationary();
        assert!((a - 2.0 / 3.0).abs() < 1e-15);
        assert!((b - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_parameters_rejected() {
        assert!(matches!(even_machine(0.0), Err(Error::Param(_))));
        assert!(matches!(even_machine(1.0), Err(Error::Param(_))));
        assert!(matches!(even_machine(f64::NAN), Err(Error::Param(_))));
    }

    #[test]
    fn sigma1_edges_and_unifilarity() {
        let m = even_machine(0.5).unwrap();
        let edges = m.expand(&sigma1());
        assert_eq!(edges.len(), 2);
        assert_eq!((edges[0].symbol, edges[0].prob, edges[0].target), (Symbol(0), 0.5, sigma1()));
        assert_eq!((edges[1].symbol, edges[1].prob, edges[1].target), (Symbol(1), 0.5, sigma2()));
        let report = validate_machine(&m, &[sigma1(), sigma2()], true).unwrap();
        assert!(report.unifilar);
    }

    #[test]
    fn apply_symbol_examples() {
        let m = even_machine(0.5).unwrap();
        let out = apply_symbol(&SparseDistribution::point(sigma2()), Symbol(1), &m);
        assert_eq!(out.get(&sigma1()), 1.0);
        assert_eq!(out.len(), 1);

        let out = apply_symbol(&SparseDistribution::point(sigma2()), Symbol(0), &m);
        assert!(out.is_empty());

        let pi = SparseDistribution::from_support(&m.support(0.0, 1));
        let out = apply_symbol(&pi, Symbol(0), &m);
        assert!((out.get(&sigma1()) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(out.get(&sigma2()), 0.0);
    }
}
