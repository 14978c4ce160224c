use rayon::prelude::*;

use crate::analysis::{entropy_gap_curve, mixed_state, word_table};
use crate::analysis::mixed::gap_of;
use crate::claims::{ClaimCheck, ClaimReport, Relation};
use crate::enclosure::Enclosure;
use crate::error::Result;
use crate::forward::{apply_symbol, forward_vector, word_probability, SparseDistribution};
use crate::machine::{Machine, Symbol};
use crate::processes::bc::{bc_state, p_at, root, BcMachine};
use crate::series::{zeta2_tail, Series};

/// Precision used for single-word forward computations.
const WORD_EPS: f64 = 1e-15;

/// All words of `{2,3}^t`, in lexicographic order.
pub fn copy_words(t: usize) -> Vec<Vec<Symbol>> {
    (0..1u64 << t)
        .map(|n| (0..t).map(|k| Symbol(2 + ((n >> (t - 1 - k)) & 1) as u8)).collect())
        .collect()
}

/// `P(W_t) = C Σ_{i≥t} (i−t+1)(2i+1)/(i²(i+1)²)`: the return mass of depth
/// `i` is `C p_i/i²` per state and `i−t+1` of the states at that depth
/// still have `t` copies ahead.
pub fn bc_prob_wt(m: &BcMachine, t: u64) -> Enclosure {
    let tf = t as f64;
    let series = Series {
        term: move |x: f64| (x - tf + 1.0) * (2.0 * x + 1.0) / (x * x * (x + 1.0) * (x + 1.0)),
        // (x+1−t)/x² − (x+1−t)/(x+1)² integrated from N
        tail_integral: move |n: f64| {
            Enclosure::point((1.0 + 1.0 / n).ln() - (tf - 1.0) / n + tf / (n + 1.0))
        },
        start: t,
        monotone_from: 3 * t.max(1),
    };
    m.normalizer() * series.sum(1e-13 / tf)
}

/// Probability that the next `t` symbols are copies, for a start spread over
/// the block `R_ij` in proportion to stationary weight.
pub fn block_future_copy_probability(t: u64, i: u64) -> f64 {
    let p = p_at(i);
    p * (1.0 + i as f64 - t as f64) / (1.0 + (i as f64 - 1.0) * p)
}

/// The same probability obtained by propagating the block through the
/// machine.
pub fn block_future_copy_probability_forward(m: &BcMachine, t: usize, i: u32) -> f64 {
    let mut start = SparseDistribution::new();
    for k in 1..=i {
        start.add(bc_state(i, 1, k), m.stationary_weight(&bc_state(i, 1, k)).unwrap_or(0.0));
    }
    let total = start.named_mass();
    let mut level = vec![start];
    for _ in 0..t {
        level = level
            .iter()
            .flat_map(|d| [apply_symbol(d, Symbol(2), m), apply_symbol(d, Symbol(3), m)])
            .filter(|d| !d.is_empty())
            .collect();
    }
    level.iter().map(|d| d.named_mass()).sum::<f64>() / total
}

/// Bounds `C/(12t) ≤ P(W_t) ≤ 6C/t` plus the closed form `C Σ_{i≥t} 1/i²`.
pub fn bc_claim3(m: &BcMachine, t_max: u64) -> ClaimReport {
    let c = m.normalizer();
    let mut report = ClaimReport::default();
    for t in 1..=t_max {
        let p = bc_prob_wt(m, t);
        let tf = t as f64;
        report.push(ClaimCheck::new("claim3.lower", t as usize, p, Relation::AtLeast, c.upper / (12.0 * tf)));
        report.push(ClaimCheck::new("claim3.upper", t as usize, p, Relation::AtMost, 6.0 * c.lower / tf));
        let closed = c * zeta2_tail(t - 1);
        report.push(ClaimCheck::agreement("claim3.closed_form", t as usize, p, closed, 1e-15));
    }
    report
}

/// Series against the mass of `{2,3}^t` in the enumerated word table.
pub fn bc_claim3_enumeration(m: &BcMachine, t_max: usize, mass_tol: f64) -> Result<ClaimReport> {
    let mut report = ClaimReport::default();
    for t in 1..=t_max {
        let table = word_table(m, t, mass_tol)?;
        let named: f64 = table
            .entries
            .iter()
            .filter(|(w, _)| w.iter().all(|&s| s == 2 || s == 3))
            .map(|(_, p)| p)
            .sum();
        let enumerated = Enclosure::with_slack(named, table.tail);
        report.push(
            ClaimCheck::agreement("claim3.enumeration", t, enumerated, bc_prob_wt(m, t as u64), 1e-9)
                .with_note(format!("table tail {:.2e}", table.tail)),
        );
    }
    Ok(report)
}

/// `P(X_t ∈ {2,3} | w)` for a single word.
pub fn copy_continuation(m: &BcMachine, word: &[Symbol]) -> Result<Enclosure> {
    let denom = word_probability(m, word, WORD_EPS)?;
    let mut num = Enclosure::point(0.0);
    for s in [2u8, 3] {
        let mut longer = word.to_vec();
        longer.push(Symbol(s));
        num = num + word_probability(m, &longer, WORD_EPS)?;
    }
    Ok(Enclosure::new(
        num.lower / denom.upper,
        (num.upper / denom.lower).min(1.0),
    ))
}

/// Copy continuation bound on the given words of `W_t`, with the ratio route
/// `P(W_{t+1})/P(W_t)` as a cross-check.
pub fn bc_claim4(m: &BcMachine, t: usize, words: &[Vec<Symbol>]) -> Result<ClaimReport> {
    let mut report = ClaimReport::default();
    let ratio = {
        let a = bc_prob_wt(m, t as u64 + 1);
        let b = bc_prob_wt(m, t as u64);
        Enclosure::new(a.lower / b.upper, a.upper / b.lower)
    };
    let mut first: Option<Enclosure> = None;
    for w in words {
        let cond = copy_continuation(m, w)?;
        let label = m.alphabet().render(w);
        report.push(ClaimCheck::new("claim4.conditional", t, cond, Relation::AtLeast, 1.0 / 150.0).with_note(label.clone()));
        report.push(ClaimCheck::agreement("claim4.ratio_route", t, cond, ratio, 1e-9).with_note(label));
        match first {
            None => first = Some(cond),
            Some(f) => report.push(ClaimCheck::agreement("claim4.symmetry", t, cond, f, 1e-10)),
        }
    }
    Ok(report)
}

/// Conditional entropy bounds on up to `sample_cap` words of `W_t`: `h̃_w ≤ 1/300`,
/// `h_w ≥ 1/150`, and `h̃_w = φ(w)_root H[(p0,q0,q0)]`.
pub fn bc_claim5(m: &BcMachine, t: usize, sample_cap: usize) -> Result<ClaimReport> {
    let words: Vec<Vec<Symbol>> = copy_words(t).into_iter().take(sample_cap).collect();
    let rows: Vec<Result<Vec<ClaimCheck>>> = words
        .par_iter()
        .map(|w| {
            let ms = mixed_state(m, w, WORD_EPS)?;
            let (h, ht) = gap_of(m, &ms.dist);
            let label = m.alphabet().render(w);
            let root_lo = ms.dist.get(&root());
            let via_root = Enclosure::new(root_lo, root_lo + ms.dist.tail()).scale(m.root_entropy());
            Ok(vec![
                ClaimCheck::new("claim5.h_tilde", t, ht, Relation::AtMost, 1.0 / 300.0).with_note(label.clone()),
                ClaimCheck::new("claim5.h_w", t, h, Relation::AtLeast, 1.0 / 150.0).with_note(label.clone()),
                ClaimCheck::agreement("claim5.root_only", t, ht, via_root, 1e-12).with_note(label),
            ])
        })
        .collect();
    let mut report = ClaimReport::default();
    for r in rows {
        report.checks.extend(r?);
    }
    Ok(report)
}

/// `Σ_{w∈W_t} P(w)(h_w − h̃_w)`, lower bound from the named forward vectors.
pub fn copy_word_gap(m: &BcMachine, t: usize) -> Result<f64> {
    let parts: Vec<Result<f64>> = copy_words(t)
        .par_iter()
        .map(|w| {
            let v = forward_vector(m, w, WORD_EPS)?;
            let (h, ht) = gap_of(m, &v);
            Ok(v.named_mass() * (h.lower - ht.upper).max(0.0))
        })
        .collect();
    parts.into_iter().sum()
}

/// Gap lower bound: the certified gap sum against `C/(3600 t)`, the `W_t`-restricted
/// sum against `P(W_t)/300`, and the harmonic divergence exhibit.
pub fn bc_claim6(m: &BcMachine, t_max: usize, mass_tol: f64, restricted_up_to: usize) -> Result<ClaimReport> {
    let c = m.normalizer();
    let gaps = entropy_gap_curve(m, t_max, mass_tol)?;
    let mut report = ClaimReport::default();
    for (t, g) in gaps.iter().enumerate().take(t_max + 1).skip(1) {
        let bound = c.upper / (3600.0 * t as f64);
        let g = *g;
        report.push(
            ClaimCheck::new("claim6.gap_sum", t, g, Relation::AtLeast, bound)
                .with_note(format!("ratio to bound {:.3e}", g.lower / bound)),
        );
    }
    for t in 1..=restricted_up_to.min(t_max) {
        let restricted = copy_word_gap(m, t)?;
        report.push(ClaimCheck::new(
            "claim6.restricted",
            t,
            Enclosure::point(restricted),
            Relation::AtLeast,
            bc_prob_wt(m, t as u64).upper / 300.0,
        ));
    }
    let harmonic = |n: u64| c.lower / 3600.0 * crate::series::partial_sum(&|x: f64| 1.0 / x, 1, n + 1);
    let (small, large) = (harmonic(1_000), harmonic(1_000_000));
    report.push(
        ClaimCheck::new("claim6.divergence", 1_000_000, Enclosure::point(large), Relation::AtLeast, small)
            .with_note(format!("partial sum at 1e3 = {small:.6e}, growth {:.4e} per decade", (large - small) / 3.0)),
    );
    Ok(report)
}

/// `P(Future^t ∈ W_t | S_0 ∈ R_ij) ≥ 1/6` at `(t, i = 2t)`, by formula and by
/// propagation.
pub fn bc_block_spot_check(m: &BcMachine) -> ClaimReport {
    let mut report = ClaimReport::default();
    for (t, i) in [(2u64, 4u64), (3, 6), (4, 8)] {
        let v = block_future_copy_probability(t, i);
        let fwd = block_future_copy_probability_forward(m, t as usize, i as u32);
        report.push(ClaimCheck::new("block.copy_future", t as usize, Enclosure::point(v), Relation::AtLeast, 1.0 / 6.0).with_note(format!("i={i}")));
        report.push(ClaimCheck::agreement("block.forward", t as usize, Enclosure::point(fwd), Enclosure::point(v), 1e-12).with_note(format!("i={i}")));
    }
    report
}

/// Residual of `π(σ) = Σ_{σ'} π(σ') T_{σ'σ}` over all concrete states of depth
/// at most `max_depth`, with inflows read off the machine's edges. Returns
/// the number of states checked and the largest absolute residual.
pub fn bc_stationary_balance(m: &BcMachine, max_depth: u32) -> (u64, f64) {
    let flow = |from: &crate::machine::StateKey, to: &crate::machine::StateKey| -> f64 {
        let w = m.stationary_weight(from).unwrap_or(0.0);
        m.expand(from).iter().filter(|e| e.target == *to).map(|e| w * e.prob).sum()
    };
    let per_depth: Vec<(u64, f64, f64)> = (1..=max_depth)
        .into_par_iter()
        .map(|i| {
            let mut worst = 0.0f64;
            let mut into_root = 0.0;
            let mut count = 0u64;
            for j in 1..=(1u64 << i) {
                for k in 1..=i {
                    let s = bc_state(i, j, k);
                    let pred = match (i, k) {
                        (1, 1) => root(),
                        (_, 1) => bc_state(i - 1, j.div_ceil(2), 1),
                        _ => bc_state(i, j, k - 1),
                    };
                    let inflow = flow(&pred, &s);
                    let pi = m.stationary_weight(&s).unwrap_or(f64::NAN);
                    worst = worst.max((pi - inflow).abs());
                    count += 1;
                }
                into_root += flow(&bc_state(i, j, i), &root());
            }
            (count, worst, into_root)
        })
        .collect();
    let mut count = 1;
    let mut worst = 0.0f64;
    let mut root_in = m.stationary_weight(&root()).unwrap_or(0.0) * m.p0();
    for (n, w, r) in per_depth {
        count += n;
        worst = worst.max(w);
        root_in += r;
    }
    // deeper returns: C Σ_{i>d} p_i / i² = C/(d+1)² by telescoping
    root_in += m.normalizer().lower / ((max_depth as f64) + 1.0).powi(2);
    let root_w = m.stationary_weight(&root()).unwrap_or(0.0);
    (count, worst.max((root_w - root_in).abs()))
}

/// Two representative words of `W_t`: all 2s and all 3s.
pub fn representative_copy_words(t: usize) -> Vec<Vec<Symbol>> {
    vec![vec![Symbol(2); t], vec![Symbol(3); t]]
}

/// Claims 3 to 6 with their cross-checks, the block spot check, per-state
/// balance up to `balance_depth`, and the Kac time of the root.
pub fn bc_suite(m: &BcMachine, t_max: usize, mass_tol: f64, balance_depth: u32) -> Result<ClaimReport> {
    let small = t_max.min(8);
    let mut report = bc_claim3(m, 50);
    report.extend(bc_claim3_enumeration(m, small, mass_tol.min(1e-12))?);
    for t in 1..=small {
        report.extend(bc_claim4(m, t, &representative_copy_words(t))?);
        report.extend(bc_claim5(m, t, 1 << t)?);
    }
    report.extend(bc_claim6(m, t_max, mass_tol, small)?);
    report.extend(bc_block_spot_check(m));
    let (states, residual) = bc_stationary_balance(m, balance_depth);
    report.push(
        ClaimCheck::new("bc.balance", balance_depth as usize, Enclosure::point(residual), Relation::AtMost, 1e-12)
            .with_note(format!("{states} states")),
    );
    let kac = super::kac_consistency(m, &root(), 1e-12)?;
    report.push(ClaimCheck::agreement("bc.kac_root", 0, kac, m.root_mass().recip(), 1e-12));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::bc::{bc_machine, DEFAULT_Q0};

    fn m() -> BcMachine {
        bc_machine(DEFAULT_Q0).unwrap()
    }

    #[test]
    fn prob_wt_matches_inverse_square_tail() {
        let m = m();
        for t in [1u64, 2, 7, 30] {
            let closed = m.normalizer() * zeta2_tail(t - 1);
            assert!(bc_prob_wt(&m, t).overlaps(&closed, 1e-16), "t={t}");
        }
    }

    #[test]
    fn claim3_bounds_hold() {
        assert!(bc_claim3(&m(), 12).pass());
    }

    #[test]
    fn enumeration_agrees_at_small_t() {
        let r = bc_claim3_enumeration(&m(), 4, 1e-12).unwrap();
        assert!(r.pass(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn claim4_on_short_words() {
        let m = m();
        let words = vec![vec![Symbol(2), Symbol(2)], vec![Symbol(3), Symbol(3)]];
        let r = bc_claim4(&m, 2, &words).unwrap();
        assert!(r.pass(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn claim5_small_t() {
        let r = bc_claim5(&m(), 3, 8).unwrap();
        assert_eq!(r.checks.len(), 24);
        assert!(r.pass(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn descent_words_are_outside_claim5() {
        // all-0 words synchronize on the deep tree, where h̃ is about one bit
        let m = m();
        let w = vec![Symbol(0); 3];
        let ms = mixed_state(&m, &w, WORD_EPS).unwrap();
        let (_, ht) = gap_of(&m, &ms.dist);
        assert!(ht.lower > 1.0 / 300.0);
    }

    #[test]
    fn block_spot_checks() {
        assert!(bc_block_spot_check(&m()).pass());
    }

    #[test]
    fn balance_at_small_depth() {
        let (n, r) = bc_stationary_balance(&m(), 8);
        assert_eq!(n, 1 + (1..=8u64).map(|i| i << i).sum::<u64>());
        assert!(r < 1e-12, "{r}");
    }
}
