use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::analysis::word_table;
use crate::claims::{kac_consistency, ClaimCheck, ClaimReport, Relation};
use crate::enclosure::Enclosure;
use crate::error::Result;
use crate::machine::{reachable_sample, validate_machine, Machine, StateKey};
use crate::processes::even::{sigma1, sigma2, EvenMachine};

/// Word probabilities of a finite machine by dense products
/// `π T^(x_1) ⋯ T^(x_t) 1`, one labelled matrix per symbol.
pub fn dense_word_probabilities(machine: &dyn Machine, states: &[StateKey], t: usize) -> Result<BTreeMap<Vec<u8>, f64>> {
    let n = states.len();
    let k = machine.alphabet().len();
    let mut mats = vec![DMatrix::<f64>::zeros(n, n); k];
    for (a, s) in states.iter().enumerate() {
        for e in machine.expand(s) {
            let b = states.iter().position(|x| *x == e.target).expect("closed state set");
            mats[e.symbol.code()][(a, b)] += e.prob;
        }
    }
    let pi = DVector::from_iterator(n, states.iter().map(|s| machine.stationary_weight(s).unwrap_or(0.0)));
    let mut level: Vec<(Vec<u8>, DVector<f64>)> = vec![(Vec::new(), pi)];
    for _ in 0..t {
        level = level
            .iter()
            .flat_map(|(w, v)| {
                mats.iter().enumerate().map(move |(x, m)| {
                    let mut w = w.clone();
                    w.push(x as u8);
                    (w, m.transpose() * v)
                })
            })
            .collect();
    }
    Ok(level.into_iter().map(|(w, v)| (w, v.sum())).filter(|(_, p)| *p > 0.0).collect())
}

/// Unifilarity, the dense-oracle word tables for `t ≤ min(t_max, 10)`, and
/// the Kac time of σ1.
pub fn even_suite(m: &EvenMachine, t_max: usize, mass_tol: f64) -> Result<ClaimReport> {
    let mut report = ClaimReport::default();
    let keys = reachable_sample(m, 4, mass_tol);
    let unifilar = validate_machine(m, &keys, false)?.unifilar;
    report.push(
        ClaimCheck::new("even.unifilar", 0, Enclosure::point(f64::from(u8::from(unifilar))), Relation::AtLeast, 0.5)
            .with_note(format!("{} states checked", keys.len())),
    );
    let states = [sigma1(), sigma2()];
    for t in 1..=t_max.min(10) {
        let table = word_table(m, t, mass_tol)?;
        let oracle = dense_word_probabilities(m, &states, t)?;
        let mut delta = table.tail;
        for w in oracle.keys().chain(table.entries.keys()) {
            let a = oracle.get(w).copied().unwrap_or(0.0);
            let b = table.entries.get(w).copied().unwrap_or(0.0);
            delta = delta.max((a - b).abs());
        }
        report.push(
            ClaimCheck::new("even.oracle", t, Enclosure::point(delta), Relation::AtMost, 1e-12)
                .with_note(format!("{} words, tail {:.1e}", table.entries.len(), table.tail)),
        );
        report.push(ClaimCheck::agreement("even.total_mass", t, Enclosure::point(table.total()), Enclosure::point(1.0), 1e-12));
    }
    let kac = kac_consistency(m, &sigma1(), mass_tol)?;
    report.push(ClaimCheck::agreement("even.kac_sigma1", 0, kac, Enclosure::point(2.0 - m.p()), 1e-12));
    Ok(report)
}
