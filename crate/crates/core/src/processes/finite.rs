//! Small explicit machines given by edge lists, with the stationary
//! distribution solved numerically.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::machine::{Alphabet, Edge, Machine, StateKey, Support};

pub struct FiniteMachine {
    name: String,
    alphabet: Alphabet,
    edges: Vec<Vec<Edge>>,
    pi: Vec<f64>,
}

fn key(i: usize) -> StateKey {
    StateKey::new(0, [i as u32, 0, 0])
}

impl FiniteMachine {
    /// `transitions[s]` lists `(symbol, probability, target)` for state `s`.
    pub fn new(
        name: &str,
        alphabet: Alphabet,
        transitions: &[Vec<(u8, f64, usize)>],
    ) -> Result<Self> {
        let n = transitions.len();
        if n == 0 {
            return Err(Error::Param("machine needs at least one state".into()));
        }
        let mut t = DMatrix::<f64>::zeros(n, n);
        let mut edges = Vec::with_capacity(n);
        for (s, row) in transitions.iter().enumerate() {
            let mut es = Vec::new();
            for &(x, p, target) in row {
                if target >= n || x as usize >= alphabet.len() {
                    return Err(Error::Param(format!("bad edge from state {s}")));
                }
                t[(s, target)] += p;
                es.push(Edge::new(x, p, key(target)));
            }
            es.sort_by(|a, b| a.symbol.cmp(&b.symbol).then(a.target.cmp(&b.target)));
            edges.push(es);
        }
        // π (T − I) = 0 with Σ π = 1: replace one balance equation by normalization.
        let mut a = t.transpose() - DMatrix::<f64>::identity(n, n);
        for c in 0..n {
            a[(n - 1, c)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(n);
        b[n - 1] = 1.0;
        let pi = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Param("stationary distribution is not unique".into()))?;
        Ok(FiniteMachine {
            name: name.to_string(),
            alphabet,
            edges,
            pi: pi.iter().map(|&x| x.max(0.0)).collect(),
        })
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    pub fn state(i: usize) -> StateKey {
        key(i)
    }
}

/// One state with two self-loops of probability 1/2: the fair coin.
pub fn iid_coin() -> FiniteMachine {
    FiniteMachine::new(
        "coin",
        Alphabet::digits(2),
        &[vec![(0, 0.5, 0), (1, 0.5, 0)]],
    )
    .expect("coin machine is well formed")
}

/// Two-state machine whose first state has two edges labelled 0.
pub fn nonunifilar_fixture() -> FiniteMachine {
    FiniteMachine::new(
        "nonunifilar",
        Alphabet::digits(2),
        &[
            vec![(0, 0.5, 0), (0, 0.25, 1), (1, 0.25, 1)],
            vec![(1, 0.6, 0), (0, 0.4, 1)],
        ],
    )
    .expect("fixture is well formed")
}

impl Machine for FiniteMachine {
    fn name(&self) -> &str {
        &self.name
    }

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn expand(&self, key: &StateKey) -> Vec<Edge> {
        self.edges
            .get(key.idx[0] as usize)
            .filter(|_| key.tag == 0)
            .cloned()
            .unwrap_or_default()
    }

    fn stationary_weight(&self, key: &StateKey) -> Result<f64> {
        self.pi
            .get(key.idx[0] as usize)
            .copied()
            .filter(|_| key.tag == 0)
            .ok_or_else(|| Error::InvalidState(key.to_string()))
    }

    fn support(&self, _eps: f64, _horizon: usize) -> Support {
        Support {
            entries: self
                .pi
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(i, &w)| (key(i), w))
                .collect(),
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
    use crate::forward::step_stationarity_residual;
    use crate::machine::validate_machine;

    #[test]
    fn fixture_stationary_solves_balance() {
        let m = nonunifilar_fixture();
        // A → B with 1/2, B → A with 0.6: π_A = 0.6/1.1.
        assert!((m.stationary()[0] - 0.6 / 1.1).abs() < 1e-14);
        assert!(step_stationarity_residual(&m, 1e-9) < 1e-14);
    }

    #[test]
    fn fixture_is_reported_nonunifilar() {
        let m = nonunifilar_fixture();
        let keys = [FiniteMachine::state(0), FiniteMachine::state(1)];
        let report = validate_machine(&m, &keys, false).unwrap();
        assert!(!report.unifilar);
        assert_eq!(report.non_unifilar, vec!["s0".to_string()]);
        assert!(matches!(
            validate_machine(&m, &keys, true),
            Err(Error::DuplicateEdge { .. })
        ));
    }

    #[test]
    fn underweight_state_fails_normalization() {
        let m = FiniteMachine::new(
            "bad",
            Alphabet::digits(2),
            &[vec![(0, 0.5, 0), (1, 0.4, 0)]],
        )
        .unwrap();
        let err = validate_machine(&m, &[FiniteMachine::state(0)], false).unwrap_err();
        assert!(matches!(err, Error::Normalization { sum, .. } if (sum - 0.9).abs() < 1e-12));
    }
}
