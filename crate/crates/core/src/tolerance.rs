//! Floating-point comparison policy shared by every check in the crate.
//!
//! A strict inequality `a < b` cannot be decided at machine precision, so
//! every comparison goes through a [`Tolerance`] whose margin scales with the
//! right-hand side: `margin(b) = rel * max(1, |b|)`.
//!
//! Two readings are used:
//!
//! * *verification* (`holds_le`): `a <= b + margin(b)`. A check only reports a
//!   violation when it is outside rounding noise.
//! * *witness search* (`strictly_below`): `a <= b - margin(b)`. A witness index
//!   is only accepted when it clears the bound by more than rounding noise.

use serde::{Deserialize, Serialize};

pub const DEFAULT_RELATIVE_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: DEFAULT_RELATIVE_MARGIN,
        }
    }
}

impl Tolerance {
    pub fn new(rel: f64) -> Self {
        Tolerance { rel }
    }

    #[inline]
    pub fn margin(&self, bound: f64) -> f64 {
        self.rel * bound.abs().max(1.0)
    }

    #[inline]
    pub fn holds_le(&self, lhs: f64, bound: f64) -> bool {
        lhs <= bound + self.margin(bound)
    }

    #[inline]
    pub fn strictly_below(&self, lhs: f64, bound: f64) -> bool {
        lhs <= bound - self.margin(bound)
    }

    /// `|a - b| <= margin(b)`: the comparison sits inside rounding noise.
    #[inline]
    pub fn near(&self, lhs: f64, bound: f64) -> bool {
        (lhs - bound).abs() <= self.margin(bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_is_absolute_below_one() {
        let t = Tolerance::default();
        assert_eq!(t.margin(0.0), 1e-12);
        assert_eq!(t.margin(0.5), 1e-12);
        assert_eq!(t.margin(-1e6), 1e-6);
    }

    #[test]
    fn readings_bracket_equality() {
        let t = Tolerance::default();
        assert!(t.holds_le(0.25, 0.25));
        assert!(!t.strictly_below(0.25, 0.25));
        assert!(t.strictly_below(0.125, 0.25));
        assert!(t.near(0.25 + 1e-13, 0.25));
    }
}
