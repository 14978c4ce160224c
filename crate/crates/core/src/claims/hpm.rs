use crate::analysis::{block_entropy, hmu_curve, word_table};
use crate::claims::{ClaimCheck, ClaimReport, Relation};
use crate::enclosure::Enclosure;
use crate::error::Result;
use crate::processes::hpm::{component_term, HpmMachine};

/// `Σ_{i=2}^{⌊t/2⌋} μ_i lg(1/π_i1)`, a lower bound on `H[X^t]`.
///
/// Each term `C a lg(b/C)` increases with `C` while `b/C > e`, so the lower
/// end of the normalizer gives a lower bound.
pub fn hpm_block_entropy_lower(m: &HpmMachine, t: u64) -> f64 {
    let c = m.normalizer().lower;
    let mut acc = 0.0;
    for i in 2..=t / 2 {
        let x = i as f64;
        let l2 = x.log2().powi(2);
        acc += c * component_term(x) * (x * x * l2 / c).log2();
    }
    acc
}

/// `Σ_{i>t/2} μ_i`, an upper bound on `h_μ(t+1)`.
pub fn hpm_hmu_upper(m: &HpmMachine, t: u64) -> Enclosure {
    m.component_tail((t / 2).max(1))
}

/// Entropy-rate and block-entropy bounds along the enumerated range.
pub fn hpm_suite(m: &HpmMachine, t_max: usize, mass_tol: f64) -> Result<ClaimReport> {
    let mut report = ClaimReport::default();
    let curve = hmu_curve(m, t_max + 1, mass_tol, None)?;
    for t in 1..=t_max {
        let hmu_next = curve.points[t].hmu;
        let bound = hpm_hmu_upper(m, t as u64);
        report.push(
            ClaimCheck::new("hpm.hmu_upper", t, hmu_next, Relation::AtMost, bound.upper + 1e-12)
                .with_note("h_mu(t+1) <= sum_{i>t/2} mu_i"),
        );
    }
    for t in 4..=t_max.min(24) {
        let h = block_entropy(&word_table(m, t, mass_tol)?);
        let lower = hpm_block_entropy_lower(m, t as u64);
        report.push(
            ClaimCheck::new("hpm.block_lower", t, h, Relation::AtLeast, lower - 1e-9)
                .with_note("H[X^t] >= series lower bound"),
        );
    }
    let small = hpm_block_entropy_lower(m, 100);
    let large = hpm_block_entropy_lower(m, 1_000_000);
    report.push(
        ClaimCheck::new("hpm.block_growth", 1_000_000, Enclosure::point(large - small), Relation::AtLeast, 0.5)
            .with_note("series at 1e6 minus series at 1e2"),
    );
    Ok(report)
}
