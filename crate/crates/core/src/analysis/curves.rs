use serde::Serialize;

use crate::analysis::explore::{ExploreOptions, LevelStats, WordExplorer};
use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::machine::{reachable_sample, validate_machine, Machine};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvePoint {
    pub t: usize,
    /// `H[X^t]`.
    pub block: Enclosure,
    /// `h_μ(t) = H[X^t] − H[X^(t−1)]`.
    pub hmu: Enclosure,
    /// `H[X^t] − t·h_μ`, when a rate enclosure is supplied.
    pub excess_direct: Option<Enclosure>,
    /// `Σ_{s≤t} (h_μ(s) − h_μ)`, when a rate enclosure is supplied.
    pub excess_sum: Option<Enclosure>,
    /// `Σ_{w∈L_t} P(w)(h_w − h̃_w) = h_μ(t+1) − h_μ` for unifilar machines.
    pub gap_sum: Enclosure,
    /// `P(NS_t)`.
    pub unsync: Enclosure,
    pub words: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyCurve {
    pub rate: Option<Enclosure>,
    pub points: Vec<CurvePoint>,
}

/// Run the explorer through levels `0..=t_max`, collecting per-level sums.
pub fn level_stats(machine: &dyn Machine, t_max: usize, mass_tol: f64) -> Result<Vec<LevelStats>> {
    level_stats_with(machine, t_max, ExploreOptions::new(mass_tol))
}

pub fn level_stats_with(machine: &dyn Machine, t_max: usize, options: ExploreOptions) -> Result<Vec<LevelStats>> {
    let mut ex = WordExplorer::new(machine, t_max, options);
    let mut out = Vec::with_capacity(t_max + 1);
    for _ in 0..t_max {
        out.push(ex.advance()?);
    }
    out.push(ex.stats());
    Ok(out)
}

fn unsync_enclosure(s: &LevelStats) -> Enclosure {
    let upper = (1.0 - s.synced).max(s.unsync_named);
    Enclosure::new(s.unsync_named, upper)
}

/// Block entropies and entropy-rate approximations for `t = 1..=t_max`.
///
/// `h_μ(t)` is accumulated through the chain rule `Σ_{w∈L_{t−1}} P(w) h_w`,
/// which equals the block-entropy difference without its cancellation.
pub fn hmu_curve(
    machine: &dyn Machine,
    t_max: usize,
    mass_tol: f64,
    rate: Option<Enclosure>,
) -> Result<EntropyCurve> {
    hmu_curve_with(machine, t_max, ExploreOptions::new(mass_tol), rate)
}

/// [`hmu_curve`] with explicit exploration options.
pub fn hmu_curve_with(
    machine: &dyn Machine,
    t_max: usize,
    options: ExploreOptions,
    rate: Option<Enclosure>,
) -> Result<EntropyCurve> {
    if t_max == 0 {
        return Err(Error::Param("t_max must be at least 1".into()));
    }
    let stats = level_stats_with(machine, t_max, options)?;
    let mut block = Enclosure::point(0.0);
    let mut sum = Enclosure::point(0.0);
    let mut points = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        let hmu = stats[t - 1].next_entropy;
        block = block + hmu;
        let excess_direct = rate.map(|h| block - h.scale(t as f64));
        if let Some(h) = rate {
            sum = sum + (hmu - h);
        }
        points.push(CurvePoint {
            t,
            block,
            hmu,
            excess_direct,
            excess_sum: rate.map(|_| sum),
            gap_sum: stats[t].gap,
            unsync: unsync_enclosure(&stats[t]),
            words: stats[t].nodes,
        });
    }
    Ok(EntropyCurve { rate, points })
}

/// `Σ_{w∈L_t} P(w)(h_w − h̃_w)`. Every term is nonnegative, so the sum over
/// surviving words is a certified lower bound.
pub fn entropy_gap_sum(machine: &dyn Machine, t: usize, mass_tol: f64) -> Result<Enclosure> {
    let mut ex = WordExplorer::new(machine, t, ExploreOptions::new(mass_tol));
    for _ in 0..t {
        ex.advance()?;
    }
    Ok(ex.stats().gap)
}

/// Entropy-gap sums for `t = 0..=t_max` from one exploration.
pub fn entropy_gap_curve(machine: &dyn Machine, t_max: usize, mass_tol: f64) -> Result<Vec<Enclosure>> {
    Ok(level_stats(machine, t_max, mass_tol)?.iter().map(|s| s.gap).collect())
}

fn require_unifilar(machine: &dyn Machine, eps: f64) -> Result<()> {
    let keys = reachable_sample(machine, 3, eps);
    let report = validate_machine(machine, &keys, false)?;
    match report.non_unifilar.first() {
        Some(key) => Err(Error::Unifilarity { key: key.clone() }),
        None => Ok(()),
    }
}

/// `Σ_σ π_σ h_σ` over the truncated stationary support, the unlisted mass
/// contributing at most `lg|X|` each.
pub fn generic_rate_lower_bound(machine: &dyn Machine, tol: f64) -> Enclosure {
    let support = machine.support(tol, 1);
    let (mut lo, mut hi) = (0.0, 0.0);
    for (key, w) in &support.entries {
        let h = machine.state_entropy(key);
        lo += w * h.lower;
        hi += w * h.upper;
    }
    let slack = 1e-14;
    Enclosure::new((lo - slack).max(0.0), hi + support.tail * machine.alphabet().log_size() + slack)
}

/// Entropy rate `h_μ = Σ_σ π_σ h_σ` of a unifilar machine.
pub fn unifilar_entropy_rate(machine: &dyn Machine, tol: f64) -> Result<Enclosure> {
    require_unifilar(machine, tol)?;
    Ok(generic_rate_lower_bound(machine, tol))
}

/// `P(NS_t)`: probability of length-`t` words after which the observer does
/// not know the state.
pub fn sync_probability(machine: &dyn Machine, t: usize, mass_tol: f64) -> Result<Enclosure> {
    Ok(*sync_curve(machine, t, mass_tol)?.last().expect("nonempty curve"))
}

/// `P(NS_t)` for `t = 0..=t_max`.
pub fn sync_curve(machine: &dyn Machine, t_max: usize, mass_tol: f64) -> Result<Vec<Enclosure>> {
    require_unifilar(machine, mass_tol)?;
    Ok(level_stats(machine, t_max, mass_tol)?.iter().map(unsync_enclosure).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enclosure::binary_entropy;
    use crate::processes::even::even_machine;
    use crate::processes::finite::{iid_coin, nonunifilar_fixture};
    use crate::processes::hpm::hpm_machine;

    #[test]
    fn coin_is_memoryless() {
        let m = iid_coin();
        let rate = unifilar_entropy_rate(&m, 1e-12).unwrap();
        let c = hmu_curve(&m, 5, 1e-12, Some(rate)).unwrap();
        for p in &c.points {
            assert!(p.hmu.contains_within(1.0, 1e-12));
            assert!(p.excess_sum.unwrap().contains_within(0.0, 1e-12));
            assert!(p.gap_sum.upper < 1e-12);
            assert!(p.unsync.upper < 1e-12);
        }
    }

    #[test]
    fn even_curve_starts_at_binary_entropy_and_decreases() {
        let m = even_machine(0.5).unwrap();
        let c = hmu_curve(&m, 8, 1e-12, None).unwrap();
        assert!(c.points[0].hmu.contains_within(binary_entropy(1.0 / 3.0), 1e-12));
        for w in c.points.windows(2) {
            assert!(w[1].hmu.lower <= w[0].hmu.upper + 1e-12);
            assert!(w[1].hmu.lower >= 2.0 / 3.0 - 1e-12);
        }
    }

    #[test]
    fn even_rate_and_gap_at_zero() {
        let m = even_machine(0.5).unwrap();
        let rate = unifilar_entropy_rate(&m, 1e-12).unwrap();
        assert!(rate.contains_within(2.0 / 3.0, 1e-14));
        let gap0 = entropy_gap_sum(&m, 0, 1e-12).unwrap();
        assert!(gap0.contains_within(binary_entropy(1.0 / 3.0) - 2.0 / 3.0, 1e-12), "{gap0}");
    }

    #[test]
    fn hpm_rate_is_zero() {
        let m = hpm_machine();
        let rate = unifilar_entropy_rate(&m, 1e-9).unwrap();
        assert!(rate.lower == 0.0 && rate.upper < 1e-8, "{rate}");
    }

    #[test]
    fn nonunifilar_rate_is_rejected() {
        let m = nonunifilar_fixture();
        assert!(matches!(unifilar_entropy_rate(&m, 1e-9), Err(Error::Unifilarity { .. })));
        assert!(generic_rate_lower_bound(&m, 1e-9).lower > 0.0);
    }

    #[test]
    fn even_sync_probability_is_no_zero_yet() {
        // the first 0 synchronizes; before that, 1-runs from π
        let m = even_machine(0.5).unwrap();
        let curve = sync_curve(&m, 6, 1e-12).unwrap();
        for (t, e) in curve.iter().enumerate().skip(1) {
            let exact: f64 = crate::analysis::words::word_table(&m, t, 1e-12)
                .unwrap()
                .entries
                .iter()
                .filter(|(w, _)| w.iter().all(|&s| s == 1))
                .map(|(_, p)| p)
                .sum();
            assert!(e.contains_within(exact, 1e-12), "t={t}: {e} vs {exact}");
        }
    }
}
