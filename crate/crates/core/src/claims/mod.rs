//! Closed-form series for the quantitative claims about the example
//! processes, and checks of those claims against certified enumeration.
//!
//! A check passes only if the certified side of its enclosure satisfies
//! the bound strictly: lower side for `≥` bounds, upper side for `≤` bounds.

pub mod bc;
pub mod even;
pub mod hpm;

use std::fmt;

use serde::Serialize;

use crate::enclosure::Enclosure;
use crate::error::Result;
use crate::machine::{Machine, StateKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    AtLeast,
    AtMost,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClaimCheck {
    pub claim: String,
    pub t: usize,
    pub value: Enclosure,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
    pub note: String,
}

impl ClaimCheck {
    pub fn new(claim: &str, t: usize, value: Enclosure, relation: Relation, bound: f64) -> Self {
        let pass = match relation {
            Relation::AtLeast => value.lower > bound,
            Relation::AtMost => value.upper < bound,
        };
        ClaimCheck {
            claim: claim.to_string(),
            t,
            value,
            relation,
            bound,
            pass,
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// A consistency check: `value` must lie within `tol` of `target`.
    pub fn agreement(claim: &str, t: usize, value: Enclosure, target: Enclosure, tol: f64) -> Self {
        let delta = if value.overlaps(&target, 0.0) {
            0.0
        } else {
            (value.lower - target.upper).max(target.lower - value.upper)
        };
        ClaimCheck {
            claim: claim.to_string(),
            t,
            value,
            relation: Relation::AtMost,
            bound: tol,
            pass: delta <= tol,
            note: format!("target {target}, delta {delta:.3e}"),
        }
    }
}

impl fmt::Display for ClaimCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            Relation::AtLeast => ">=",
            Relation::AtMost => "<=",
        };
        write!(
            f,
            "{:<28} t={:<4} {} {rel} {:.6e} {}",
            self.claim,
            self.t,
            self.value,
            self.bound,
            if self.pass { "PASS" } else { "FAIL" }
        )?;
        if !self.note.is_empty() {
            write!(f, "  ({})", self.note)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ClaimReport {
    pub checks: Vec<ClaimCheck>,
}

impl ClaimReport {
    pub fn push(&mut self, check: ClaimCheck) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: ClaimReport) {
        self.checks.extend(other.checks);
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ClaimCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Kac's expected return time `1/π(state)`.
///
/// The named weight is a lower bound on `π(state)`; the support tail bounds
/// how far it can be off.
pub fn kac_consistency(machine: &dyn Machine, state: &StateKey, eps: f64) -> Result<Enclosure> {
    let w = machine.stationary_weight(state)?;
    let tail = machine.support(eps, 1).tail;
    Ok(Enclosure::new(1.0 / (w + tail), 1.0 / w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::bc::{bc_machine, root, DEFAULT_Q0};
    use crate::processes::even::{even_machine, sigma1};
    use crate::processes::hpm::{hpm_machine, node};

    #[test]
    fn kac_times() {
        let e = even_machine(0.5).unwrap();
        assert!(kac_consistency(&e, &sigma1(), 1e-9).unwrap().contains_within(1.5, 1e-14));

        let b = bc_machine(DEFAULT_Q0).unwrap();
        let k = kac_consistency(&b, &root(), 1e-9).unwrap();
        assert!(k.lower > 1.0 && k.upper < 1.001);
        assert!(k.overlaps(&b.root_mass().recip(), 1e-12));

        let h = hpm_machine();
        let k = kac_consistency(&h, &node(2, 1), 1e-9).unwrap();
        assert!(k.overlaps(&h.normalizer().recip().scale(4.0), 1e-9), "{k}");
    }

    #[test]
    fn strict_pass_flags() {
        let v = Enclosure::new(1.0, 2.0);
        assert!(ClaimCheck::new("x", 1, v, Relation::AtLeast, 0.5).pass);
        assert!(!ClaimCheck::new("x", 1, v, Relation::AtLeast, 1.0).pass);
        assert!(!ClaimCheck::new("x", 1, v, Relation::AtMost, 2.0).pass);
    }
}
