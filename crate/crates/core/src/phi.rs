//! Comparison functions: increasing maps `[0, inf) -> [0, inf)` whose iterates
//! decay to zero pointwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::Tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiKind {
    /// `c * t`.
    Linear { c: f64 },
    /// `t / (1 + t)`.
    Rational,
    /// `c * t`, labelled as the image of a linear contraction under a
    /// `q`-snowflake (a map with Lipschitz constant `a` gives `c = a^q`).
    PowerLinear { c: f64, q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonFunction {
    pub kind: PhiKind,
    /// Parameter ranges were not enforced (negative controls).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unchecked: bool,
}

fn check_c(c: f64) -> Result<()> {
    if (0.0..1.0).contains(&c) {
        Ok(())
    } else {
        Err(Error::invalid("c", "must lie in [0,1)"))
    }
}

impl ComparisonFunction {
    pub fn new(kind: PhiKind) -> Result<Self> {
        match kind {
            PhiKind::Linear { c } => check_c(c)?,
            PhiKind::Rational => {}
            PhiKind::PowerLinear { c, q } => {
                check_c(c)?;
                if !(q.is_finite() && q >= 1.0) {
                    return Err(Error::invalid("q", "must be finite and >= 1"));
                }
            }
        }
        Ok(ComparisonFunction {
            kind,
            unchecked: false,
        })
    }

    /// Build without range checks. Only finiteness and non-negativity of the
    /// coefficients are required, so that `phi(t) >= 0` still holds.
    pub fn new_unchecked(kind: PhiKind) -> Result<Self> {
        let ok = match kind {
            PhiKind::Linear { c } => c.is_finite() && c >= 0.0,
            PhiKind::Rational => true,
            PhiKind::PowerLinear { c, q } => c.is_finite() && c >= 0.0 && q.is_finite(),
        };
        if !ok {
            return Err(Error::invalid("c", "must be finite and >= 0"));
        }
        Ok(ComparisonFunction {
            kind,
            unchecked: true,
        })
    }

    pub fn linear(c: f64) -> Result<Self> {
        Self::new(PhiKind::Linear { c })
    }

    pub fn rational() -> Self {
        ComparisonFunction {
            kind: PhiKind::Rational,
            unchecked: false,
        }
    }

    pub fn power_linear(c: f64, q: f64) -> Result<Self> {
        Self::new(PhiKind::PowerLinear { c, q })
    }

    #[inline]
    pub(crate) fn apply(&self, t: f64) -> f64 {
        match self.kind {
            PhiKind::Linear { c } | PhiKind::PowerLinear { c, .. } => c * t,
            PhiKind::Rational => t / (1.0 + t),
        }
    }

    pub(crate) fn apply_n(&self, mut t: f64, n: usize) -> f64 {
        for _ in 0..n {
            t = self.apply(t);
        }
        t
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        check_arg(t)?;
        Ok(self.apply(t))
    }

    /// `phi^n(t)`, with `phi^0(t) = t`.
    pub fn iterate(&self, t: f64, n: usize) -> Result<f64> {
        check_arg(t)?;
        Ok(self.apply_n(t, n))
    }
}

fn check_arg(t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::NonFinite {
            what: "phi argument".into(),
        });
    }
    if t < 0.0 {
        return Err(Error::invalid("t", "must be >= 0"));
    }
    Ok(())
}

/// Smallest `n` in `[1, n_max]` with `phi^n(eps) < eps / (2s)`, where strict
/// means clearing the bound by the tolerance margin.
pub fn find_n_tilde(
    phi: &ComparisonFunction,
    epsilon: f64,
    s: f64,
    n_max: usize,
    tol: Tolerance,
) -> Result<usize> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid("epsilon", "must be finite and > 0"));
    }
    if !(s.is_finite() && s >= 1.0) {
        return Err(Error::invalid("s", "must be finite and >= 1"));
    }
    if n_max == 0 {
        return Err(Error::invalid("n_max", "must be >= 1"));
    }
    let threshold = epsilon / (2.0 * s);
    let mut t = epsilon;
    for n in 1..=n_max {
        t = phi.apply(t);
        if tol.strictly_below(t, threshold) {
            return Ok(n);
        }
    }
    Err(Error::NTildeNotFound {
        n_max,
        last_value: t,
    })
}

/// Default verification grid: 0 plus 200 log-spaced points on `[1e-6, 1e3]`.
pub fn default_grid() -> Vec<f64> {
    let (lo, hi, n) = (1e-6f64.ln(), 1e3f64.ln(), 200);
    std::iter::once(0.0)
        .chain((0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiReport {
    pub grid_size: usize,
    /// Grid pairs `t_i <= t_j` with `phi(t_i) > phi(t_j) + margin`.
    pub monotone_violations: usize,
    /// Grid points `t > 0` with `phi(t) >= t`.
    pub below_identity_violations: usize,
    /// Grid points whose iterates never reached `tol` within `n_max` steps.
    pub decay_failures: usize,
    /// Largest number of iterations any grid point needed to reach `tol`.
    pub max_decay_steps: usize,
    pub n_max: usize,
    pub tol: f64,
}

impl PhiReport {
    pub fn passed(&self) -> bool {
        self.monotone_violations == 0
            && self.below_identity_violations == 0
            && self.decay_failures == 0
    }
}

/// First `n <= n_max` with `phi^n(t) <= tol`.
pub fn decay_steps(phi: &ComparisonFunction, t: f64, tol: f64, n_max: usize) -> Option<usize> {
    let mut v = t;
    for n in 0..=n_max {
        if v <= tol {
            return Some(n);
        }
        v = phi.apply(v);
    }
    None
}

/// Check monotonicity, `phi(t) < t` and iterate decay on a sorted grid.
///
/// `phi(t) < t` is tested exactly: the margin reading would let `phi = id`
/// through.
pub fn check_phi_properties(
    phi: &ComparisonFunction,
    grid: &[f64],
    tol: f64,
    n_max: usize,
    margin: Tolerance,
) -> Result<PhiReport> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "must be non-empty"));
    }
    for &t in grid {
        check_arg(t)?;
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("grid", "must be sorted ascending"));
    }
    let values: Vec<f64> = grid.iter().map(|&t| phi.apply(t)).collect();
    let mut monotone_violations = 0;
    for i in 0..values.len() {
        for j in i..values.len() {
            if !margin.holds_le(values[i], values[j]) {
                monotone_violations += 1;
            }
        }
    }
    let below_identity_violations = grid
        .iter()
        .zip(&values)
        .filter(|&(&t, &v)| t > 0.0 && v >= t)
        .count();
    let mut decay_failures = 0;
    let mut max_decay_steps = 0;
    for &t in grid {
        match decay_steps(phi, t, tol, n_max) {
            Some(n) => max_decay_steps = max_decay_steps.max(n),
            None => decay_failures += 1,
        }
    }
    Ok(PhiReport {
        grid_size: grid.len(),
        monotone_violations,
        below_identity_violations,
        decay_failures,
        max_decay_steps,
        n_max,
        tol,
    })
}
