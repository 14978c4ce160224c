//! Closed real intervals used to carry truncation error alongside every
//! reported scalar.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::Serialize;

/// A closed interval `[lower, upper]` known to contain some real quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Enclosure {
    pub lower: f64,
    pub upper: f64,
}

impl Enclosure {
    pub fn new(lower: f64, upper: f64) -> Self {
        assert!(
            lower <= upper,
            "enclosure bounds out of order: [{lower}, {upper}]"
        );
        Enclosure { lower, upper }
    }

    pub fn point(x: f64) -> Self {
        Enclosure { lower: x, upper: x }
    }

    /// `[lower, lower + slack]`.
    pub fn with_slack(lower: f64, slack: f64) -> Self {
        Enclosure::new(lower, lower + slack.max(0.0))
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Membership with an absolute allowance on both sides.
    pub fn contains_within(&self, x: f64, tol: f64) -> bool {
        self.lower - tol <= x && x <= self.upper + tol
    }

    pub fn overlaps(&self, other: &Enclosure, tol: f64) -> bool {
        self.lower <= other.upper + tol && other.lower <= self.upper + tol
    }

    pub fn hull(&self, other: &Enclosure) -> Enclosure {
        Enclosure::new(self.lower.min(other.lower), self.upper.max(other.upper))
    }

    pub fn scale(&self, k: f64) -> Enclosure {
        if k >= 0.0 {
            Enclosure::new(self.lower * k, self.upper * k)
        } else {
            Enclosure::new(self.upper * k, self.lower * k)
        }
    }

    /// Reciprocal of a strictly positive enclosure.
    pub fn recip(&self) -> Enclosure {
        assert!(self.lower > 0.0, "reciprocal of non-positive enclosure");
        Enclosure::new(1.0 / self.upper, 1.0 / self.lower)
    }

    pub fn clamp_nonneg(&self) -> Enclosure {
        Enclosure::new(self.lower.max(0.0), self.upper.max(0.0))
    }
}

impl Add for Enclosure {
    type Output = Enclosure;
    fn add(self, rhs: Enclosure) -> Enclosure {
        Enclosure::new(self.lower + rhs.lower, self.upper + rhs.upper)
    }
}

impl Sub for Enclosure {
    type Output = Enclosure;
    fn sub(self, rhs: Enclosure) -> Enclosure {
        Enclosure::new(self.lower - rhs.upper, self.upper - rhs.lower)
    }
}

impl Mul for Enclosure {
    type Output = Enclosure;
    fn mul(self, rhs: Enclosure) -> Enclosure {
        let c = [
            self.lower * rhs.lower,
            self.lower * rhs.upper,
            self.upper * rhs.lower,
            self.upper * rhs.upper,
        ];
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Enclosure::new(lo, hi)
    }
}

impl fmt::Display for Enclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.12e}, {:.12e}]", self.lower, self.upper)
    }
}

/// `-x lg x`, zero at zero.
pub fn plogp(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.log2()
    }
}

/// Shannon entropy in bits of a (sub-)probability vector.
pub fn entropy_bits<I: IntoIterator<Item = f64>>(probs: I) -> f64 {
    probs.into_iter().map(plogp).sum()
}

pub fn binary_entropy(p: f64) -> f64 {
    plogp(p) + plogp(1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let a = Enclosure::new(1.0, 2.0);
        let b = Enclosure::new(0.5, 0.75);
        assert_eq!(a + b, Enclosure::new(1.5, 2.75));
        assert_eq!(a - b, Enclosure::new(0.25, 1.5));
        assert_eq!(a * b, Enclosure::new(0.5, 1.5));
        assert_eq!(b.recip(), Enclosure::new(1.0 / 0.75, 2.0));
        assert_eq!(a.scale(-1.0), Enclosure::new(-2.0, -1.0));
    }

    #[test]
    #[should_panic]
    fn rejects_inverted_bounds() {
        Enclosure::new(1.0, 0.0);
    }

    #[test]
    fn entropies() {
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
        assert!((entropy_bits([0.25; 4]) - 2.0).abs() < 1e-15);
        assert_eq!(plogp(0.0), 0.0);
    }
}
