//! Certified evaluation of positive series.
//!
//! A series `Σ_{k≥n0} f(k)` with `f` positive and eventually decreasing is
//! split into an explicit partial sum and a tail bracketed by integrals:
//!
//! ```text
//! ∫_N^∞ f(x) dx  ≤  Σ_{k≥N} f(k)  ≤  f(N) + ∫_N^∞ f(x) dx
//! ```
//!
//! The caller supplies an enclosure of the tail integral for each cut `N`.
//! The cut is doubled until the enclosure width meets the tolerance.

use crate::enclosure::Enclosure;

const MAX_CUT: u64 = 1 << 27;

/// A positive series together with bounds on its tail integral.
pub struct Series<F, G>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> Enclosure,
{
    /// Term function, evaluated at integer arguments.
    pub term: F,
    /// Enclosure of `∫_N^∞ term(x) dx` for a cut `N`.
    pub tail_integral: G,
    /// First index of the series.
    pub start: u64,
    /// Smallest cut from which the term is monotone decreasing.
    pub monotone_from: u64,
}

impl<F, G> Series<F, G>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> Enclosure,
{
    /// Integral-test bracket of the tail `Σ_{k≥cut} term(k)`.
    pub fn tail(&self, cut: u64) -> Enclosure {
        debug_assert!(cut >= self.monotone_from);
        let n = cut as f64;
        let integral = (self.tail_integral)(n);
        Enclosure::new(integral.lower.max(0.0), (self.term)(n) + integral.upper)
    }

    /// Sum from `start` to infinity with enclosure width at most `tol`
    /// (or the best achievable below an internal cut limit).
    pub fn sum(&self, tol: f64) -> Enclosure {
        let mut cut = self.monotone_from.max(self.start).max(16);
        let mut partial = partial_sum(&self.term, self.start, cut);
        loop {
            let tail = self.tail(cut);
            if tail.width() <= tol || cut >= MAX_CUT {
                return Enclosure::new(partial + tail.lower, partial + tail.upper);
            }
            let next = cut * 2;
            partial += partial_sum(&self.term, cut, next);
            cut = next;
        }
    }
}

/// `Σ_{k=from}^{to-1} f(k)`, summed from the small end.
pub fn partial_sum<F: Fn(f64) -> f64>(f: &F, from: u64, to: u64) -> f64 {
    let mut acc = 0.0;
    let mut comp = 0.0;
    for k in (from..to).rev() {
        // Neumaier compensated summation
        let x = f(k as f64);
        let t = acc + x;
        if acc.abs() >= x.abs() {
            comp += (acc - t) + x;
        } else {
            comp += (x - t) + acc;
        }
        acc = t;
    }
    acc + comp
}

/// `Σ_{i>m} 1/i²`.
pub fn inverse_square_tail(m: u64, tol: f64) -> Enclosure {
    Series {
        term: |x: f64| 1.0 / (x * x),
        tail_integral: |n: f64| Enclosure::point(1.0 / n),
        start: m + 1,
        monotone_from: 1,
    }
    .sum(tol)
}

/// `Σ_{i>m} 1/i²` without summing a long tail: `π²/6` minus a short head
/// for small `m`, the trigamma expansion otherwise.
pub fn zeta2_tail(m: u64) -> Enclosure {
    if m <= 10_000 {
        let head = partial_sum(&|x: f64| 1.0 / (x * x), 1, m + 1);
        let exact = std::f64::consts::PI.powi(2) / 6.0 - head;
        // head and constant each carry well under 1e-15 absolute error
        return Enclosure::with_slack(exact - 2e-15, 4e-15);
    }
    let x = m as f64;
    // ψ₁(m) − 1/m²; the alternating expansion is bracketed by its next term
    let v = 1.0 / x - 0.5 / (x * x) + 1.0 / (6.0 * x.powi(3)) - 1.0 / (30.0 * x.powi(5));
    let r = 1.0 / (42.0 * x.powi(7)) + v * 1e-15;
    Enclosure::new(v - r, v + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basel_sum_is_enclosed() {
        let s = inverse_square_tail(0, 1e-10);
        let exact = std::f64::consts::PI.powi(2) / 6.0;
        assert!(s.contains_within(exact, 1e-13), "{s}");
        assert!(s.width() <= 1e-10);
    }

    #[test]
    fn closed_form_tail_agrees_with_series() {
        for m in [0u64, 1, 7, 10_000, 10_001, 50_000] {
            let fast = zeta2_tail(m);
            let slow = inverse_square_tail(m, 1e-13);
            assert!(fast.overlaps(&slow, 1e-15), "m={m}: {fast} vs {slow}");
        }
    }

    #[test]
    fn tighter_tolerance_never_widens() {
        let a = inverse_square_tail(3, 1e-6);
        let b = inverse_square_tail(3, 1e-9);
        assert!(b.width() <= a.width());
        assert!(a.overlaps(&b, 0.0));
    }

    #[test]
    fn bracket_is_ordered_for_geometric_like_terms() {
        // Σ_{k≥1} 1/k³ = ζ(3)
        let s = Series {
            term: |x: f64| x.powi(-3),
            tail_integral: |n: f64| Enclosure::point(0.5 / (n * n)),
            start: 1,
            monotone_from: 1,
        }
        .sum(1e-12);
        assert!(s.contains_within(1.202_056_903_159_594_2, 1e-14), "{s}");
    }
}
