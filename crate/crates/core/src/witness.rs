//! Witness indices for the Cauchy argument and checks of every inequality
//! that uses them, evaluated on a concrete orbit.
//!
//! For a tolerance `eps > 0` the argument builds, in order:
//!
//! * `n_tilde`: least `n` with `phi^n(eps) < eps / (2s)`;
//! * `m_tilde`: least `m` such that `d(x_{m n + n}, x_{m n}) < eps / (2s)` for
//!   every later `m` in the window, which makes `B(x_{m_tilde n}, eps)`
//!   invariant under `T^n`;
//! * `k0`: least index past which `d(x_k, x_{k+1}) < eps / (n s^n)`, and
//!   `m0`, the least `m` with `m n > k0`;
//! * `m_bar = max(m_tilde, m0)`.
//!
//! Every witness depends on `eps`; the orbit never does. [`run_pipeline`]
//! builds one orbit and hands the same object to every `eps`.
//!
//! Universally quantified tail conditions ("for all m >= m_tilde") are only
//! checked on the finite window `m <= window`, so `m_tilde` and `k0` are
//! the finite-horizon minimal indices.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::{check_contraction, SelfMap};
use crate::phi::{check_phi_properties, default_grid, find_n_tilde, ComparisonFunction};
use crate::sampling::{batch_rng, batch_seed, draw_in_box, map_batches};
use crate::solver::{agreement_tol, compute_orbit, solve_fixed_point, FixedPointResult, Orbit};
use crate::space::{check_axioms, BMetricSpace, Point};
use crate::tolerance::Tolerance;

/// `a < b`; false when either side is NaN.
fn below(a: f64, b: f64) -> bool {
    a.partial_cmp(&b) == Some(std::cmp::Ordering::Less)
}

pub const DEFAULT_WINDOW: usize = 64;
pub const EXHAUSTIVE_PAIR_LIMIT: usize = 10_000;
const LIMIT_LINKS: usize = 10;
const MIN_ACCEPTANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessSet {
    pub epsilon: f64,
    pub s: f64,
    pub n_tilde: usize,
    pub m_tilde: usize,
    pub k0: usize,
    pub m0: usize,
    pub m_bar: usize,
    /// Multiples of `n_tilde` examined: `m` ranges over `[0, window]`.
    pub window: usize,
    /// Largest orbit index examined, `window * n_tilde + n_tilde`.
    pub horizon: usize,
}

impl WitnessSet {
    /// The structural invariants linking the indices.
    pub fn is_consistent(&self, phi: &ComparisonFunction, tol: Tolerance) -> bool {
        tol.strictly_below(
            phi.apply_n(self.epsilon, self.n_tilde),
            self.epsilon / (2.0 * self.s),
        ) && self.m0 * self.n_tilde > self.k0
            && self.m_bar == self.m_tilde.max(self.m0)
            && self.horizon >= self.m_bar * self.n_tilde + self.n_tilde
    }
}

fn check_eps(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("epsilon", "must be finite and > 0"))
    }
}

fn check_n(n_tilde: usize) -> Result<()> {
    if n_tilde == 0 {
        return Err(Error::invalid("n_tilde", "must be >= 1"));
    }
    Ok(())
}

/// `d(x_{m n + n}, x_{m n}) < eps / (2s)` with the strict (witness) reading.
pub fn m_tilde_condition(
    orbit: &Orbit,
    n_tilde: usize,
    epsilon: f64,
    s: f64,
    m: usize,
    tol: Tolerance,
) -> bool {
    let i = m * n_tilde;
    tol.strictly_below(orbit.dist(i + n_tilde, i), epsilon / (2.0 * s))
}

/// Least `m_tilde` such that the condition holds for every `m` in
/// `[m_tilde, window]`.
pub fn find_m_tilde(
    orbit: &Orbit,
    n_tilde: usize,
    epsilon: f64,
    s: f64,
    window: usize,
    tol: Tolerance,
) -> Result<usize> {
    check_eps(epsilon)?;
    check_n(n_tilde)?;
    orbit.require(window * n_tilde + n_tilde)?;
    for m in (0..=window).rev() {
        if !m_tilde_condition(orbit, n_tilde, epsilon, s, m, tol) {
            if m == window {
                return Err(Error::WitnessNotFound {
                    witness: "m_tilde",
                    blocking_index: m * n_tilde,
                });
            }
            return Ok(m + 1);
        }
    }
    Ok(0)
}

/// Threshold for successive distances: `eps / (n s^n)`.
pub fn k0_threshold(n_tilde: usize, epsilon: f64, s: f64) -> f64 {
    epsilon / (n_tilde as f64 * s.powi(n_tilde as i32))
}

/// `d(x_k, x_{k+1}) < eps / (n s^n)` with the strict (witness) reading.
pub fn k0_condition(
    orbit: &Orbit,
    n_tilde: usize,
    epsilon: f64,
    s: f64,
    k: usize,
    tol: Tolerance,
) -> bool {
    tol.strictly_below(orbit.succ_dists[k], k0_threshold(n_tilde, epsilon, s))
}

/// `(k0, m0)`: `k0` is the least index such that every successive distance
/// the window uses, `d(x_k, x_{k+1})` for `k` in
/// `[k0, window * n + n - 1]`, is below `eps / (n s^n)`; `m0` is the least
/// integer with `m0 * n > k0`.
pub fn find_m0(
    orbit: &Orbit,
    n_tilde: usize,
    epsilon: f64,
    s: f64,
    window: usize,
    tol: Tolerance,
) -> Result<(usize, usize)> {
    check_eps(epsilon)?;
    check_n(n_tilde)?;
    let last = window * n_tilde + n_tilde - 1;
    orbit.require(last + 1)?;
    let mut k0 = 0;
    for k in (0..=last).rev() {
        if !k0_condition(orbit, n_tilde, epsilon, s, k, tol) {
            if k == last {
                return Err(Error::WitnessNotFound {
                    witness: "k0",
                    blocking_index: k,
                });
            }
            k0 = k + 1;
            break;
        }
    }
    Ok((k0, k0 / n_tilde + 1))
}

/// Assemble the full witness set for `eps` on `orbit`.
pub fn build_witness(
    orbit: &Orbit,
    phi: &ComparisonFunction,
    epsilon: f64,
    s: f64,
    window: usize,
    n_max: usize,
    tol: Tolerance,
) -> Result<WitnessSet> {
    let n_tilde = find_n_tilde(phi, epsilon, s, n_max, tol)?;
    let m_tilde = find_m_tilde(orbit, n_tilde, epsilon, s, window, tol)?;
    let (k0, m0) = find_m0(orbit, n_tilde, epsilon, s, window, tol)?;
    let m_bar = m_tilde.max(m0);
    if m_bar > window {
        return Err(Error::WitnessNotFound {
            witness: "m_bar",
            blocking_index: m_bar * n_tilde,
        });
    }
    Ok(WitnessSet {
        epsilon,
        s,
        n_tilde,
        m_tilde,
        k0,
        m0,
        m_bar,
        window,
        horizon: window * n_tilde + n_tilde,
    })
}

/// Whether lowering each searched index by one breaks its defining condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Minimality {
    pub n_tilde: bool,
    pub m_tilde: bool,
    pub k0: bool,
    pub m0: bool,
}

impl Minimality {
    pub fn all(&self) -> bool {
        self.n_tilde && self.m_tilde && self.k0 && self.m0
    }
}

pub fn check_minimality(
    w: &WitnessSet,
    orbit: &Orbit,
    phi: &ComparisonFunction,
    tol: Tolerance,
) -> Minimality {
    let threshold = w.epsilon / (2.0 * w.s);
    let n_tilde =
        w.n_tilde == 1 || !tol.strictly_below(phi.apply_n(w.epsilon, w.n_tilde - 1), threshold);
    let m_tilde =
        w.m_tilde == 0 || !m_tilde_condition(orbit, w.n_tilde, w.epsilon, w.s, w.m_tilde - 1, tol);
    let k0 = w.k0 == 0 || !k0_condition(orbit, w.n_tilde, w.epsilon, w.s, w.k0 - 1, tol);
    let m0 = w.m0 * w.n_tilde > w.k0 && (w.m0 - 1) * w.n_tilde <= w.k0;
    Minimality {
        n_tilde,
        m_tilde,
        k0,
        m0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallCheck {
    pub checked: usize,
    /// Samples `u` with `d(T^n u, center) >= eps - margin`.
    pub violations: usize,
    /// Samples breaking `d(T^n u, T^n center) <= phi^n(d(u, center))`.
    pub half_bound_violations: usize,
    /// `d(T^n center, center) <= eps / (2s)`.
    pub center_gap_ok: bool,
    pub attempts: usize,
    /// `max d(T^n u, center) / eps`.
    pub worst_ratio: f64,
}

impl BallCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.half_bound_violations == 0 && self.center_gap_ok
    }
}

/// Sample the ball `B(x_{m_tilde n}, eps)` by rejection from a box proposal
/// and check that `T^n` maps every sample back into the ball.
#[allow(clippy::too_many_arguments)]
pub fn verify_invariant_ball(
    map: &SelfMap,
    space: &BMetricSpace,
    phi: &ComparisonFunction,
    orbit: &Orbit,
    w: &WitnessSet,
    n_samples: usize,
    seed: u64,
    tol: Tolerance,
) -> Result<BallCheck> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be >= 1"));
    }
    let ci = w.m_tilde * w.n_tilde;
    orbit.require(ci)?;
    let center = orbit.point(ci);
    let eps = w.epsilon;
    let radius = space.kind.ball_box_radius(eps);
    let t_center = map.apply_n(center, w.n_tilde)?;
    let center_gap_ok = tol.holds_le(space.dist(&t_center, center), eps / (2.0 * w.s));

    let batches = map_batches(n_samples, seed, |rng, count| -> Result<BallCheck> {
        let mut out = BallCheck {
            checked: 0,
            violations: 0,
            half_bound_violations: 0,
            center_gap_ok,
            attempts: 0,
            worst_ratio: 0.0,
        };
        while out.checked < count {
            out.attempts += 1;
            if out.attempts >= 1000 && (out.checked as f64) < MIN_ACCEPTANCE * out.attempts as f64 {
                return Err(Error::LowAcceptance {
                    rate: out.checked as f64 / out.attempts as f64,
                });
            }
            let u = draw_in_box(rng, center, radius);
            let du = space.dist(&u, center);
            if du >= eps {
                continue;
            }
            out.checked += 1;
            let tu = map.apply_n(&u, w.n_tilde)?;
            let d_out = space.dist(&tu, center);
            out.worst_ratio = out.worst_ratio.max(d_out / eps);
            if d_out >= eps - tol.margin(eps) {
                out.violations += 1;
            }
            if !tol.holds_le(space.dist(&tu, &t_center), phi.apply_n(du, w.n_tilde)) {
                out.half_bound_violations += 1;
            }
        }
        Ok(out)
    });
    let mut total = BallCheck {
        checked: 0,
        violations: 0,
        half_bound_violations: 0,
        center_gap_ok,
        attempts: 0,
        worst_ratio: 0.0,
    };
    for b in batches {
        let b = b?;
        total.checked += b.checked;
        total.violations += b.violations;
        total.half_bound_violations += b.half_bound_violations;
        total.attempts += b.attempts;
        total.worst_ratio = total.worst_ratio.max(b.worst_ratio);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentCheck {
    pub checked: usize,
    /// `d(x_{mn}, x_{mn+p}) < eps` failed.
    pub segment_violations: usize,
    /// `d(x_{mn}, x_{mn+p}) <= sum_{i=0}^{p} s^{i+1} d(x_{mn+i}, x_{mn+i+1})` failed.
    pub telescope_violations: usize,
}

impl SegmentCheck {
    pub fn passed(&self) -> bool {
        self.segment_violations == 0 && self.telescope_violations == 0
    }
}

/// Check the within-block bound for every `m` in `[m0, window]` and
/// `p < n_tilde`, together with the telescoped relaxed triangle inequality
/// that produces it.
pub fn verify_segment_bound(orbit: &Orbit, w: &WitnessSet, tol: Tolerance) -> Result<SegmentCheck> {
    let n = w.n_tilde;
    orbit.require(w.window * n + n)?;
    let mut out = SegmentCheck {
        checked: 0,
        segment_violations: 0,
        telescope_violations: 0,
    };
    for m in w.m0..=w.window {
        let base = m * n;
        for p in 0..n {
            let d = orbit.dist(base, base + p);
            let telescope: f64 = (0..=p)
                .map(|i| w.s.powi(i as i32 + 1) * orbit.succ_dists[base + i])
                .sum();
            out.checked += 1;
            if !tol.holds_le(d, telescope) {
                out.telescope_violations += 1;
            }
            if !below(d, w.epsilon + tol.margin(w.epsilon)) {
                out.segment_violations += 1;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyCheck {
    pub checked: usize,
    pub exhaustive: bool,
    /// Pairs with `d(x_{k1}, x_{k2}) > 4 s^3 eps`.
    pub violations: usize,
    /// Pairs where one of the four hops was not below `eps`.
    pub hop_violations: usize,
    /// Pairs where `s h1 + s^2 h2 + s^3 h3 + s^3 h4` fell below the distance.
    pub chain_violations: usize,
    /// `max d(x_{k1}, x_{k2}) / (4 s^3 eps)`.
    pub worst_ratio: f64,
}

impl CauchyCheck {
    fn empty(exhaustive: bool) -> Self {
        CauchyCheck {
            checked: 0,
            exhaustive,
            violations: 0,
            hop_violations: 0,
            chain_violations: 0,
            worst_ratio: 0.0,
        }
    }

    fn absorb(&mut self, other: &CauchyCheck) {
        self.checked += other.checked;
        self.violations += other.violations;
        self.hop_violations += other.hop_violations;
        self.chain_violations += other.chain_violations;
        self.worst_ratio = self.worst_ratio.max(other.worst_ratio);
    }

    pub fn passed(&self, tol: Tolerance) -> bool {
        self.violations == 0
            && self.hop_violations == 0
            && self.chain_violations == 0
            && tol.holds_le(self.worst_ratio, 1.0)
    }
}

fn cauchy_pair(
    orbit: &Orbit,
    w: &WitnessSet,
    k1: usize,
    k2: usize,
    tol: Tolerance,
    out: &mut CauchyCheck,
) {
    let n = w.n_tilde;
    let s = w.s;
    let eps = w.epsilon;
    let (b1, b2, anchor) = ((k1 / n) * n, (k2 / n) * n, w.m_tilde * n);
    let hops = [
        orbit.dist(k1, b1),
        orbit.dist(b1, anchor),
        orbit.dist(anchor, b2),
        orbit.dist(b2, k2),
    ];
    let d = orbit.dist(k1, k2);
    let chain = s * hops[0] + s.powi(2) * hops[1] + s.powi(3) * hops[2] + s.powi(3) * hops[3];
    let bound = 4.0 * s.powi(3) * eps;
    out.checked += 1;
    if hops.iter().any(|&h| !below(h, eps + tol.margin(eps))) {
        out.hop_violations += 1;
    }
    if !tol.holds_le(d, chain) {
        out.chain_violations += 1;
    }
    if !tol.holds_le(d, bound) {
        out.violations += 1;
    }
    out.worst_ratio = out.worst_ratio.max(d / bound);
}

/// Check `d(x_{k1}, x_{k2}) <= 4 s^3 eps` for `k1, k2` in
/// `[m_bar n, window n + n - 1]`, replaying the four-hop chain through
/// `x_{m1 n}`, `x_{m_tilde n}` and `x_{m2 n}` for each pair. Exhaustive when
/// the window has at most [`EXHAUSTIVE_PAIR_LIMIT`] unordered pairs,
/// otherwise `n_pairs` seeded samples.
pub fn verify_cauchy_bound(
    orbit: &Orbit,
    w: &WitnessSet,
    n_pairs: usize,
    seed: u64,
    tol: Tolerance,
) -> Result<CauchyCheck> {
    let n = w.n_tilde;
    let lo = w.m_bar * n;
    let hi = w.window * n + n - 1;
    orbit.require(hi)?;
    if lo > hi {
        return Err(Error::OrbitTooShort {
            needed: lo,
            available: hi,
        });
    }
    let width = hi - lo + 1;
    let total_pairs = width * (width + 1) / 2;
    if total_pairs <= EXHAUSTIVE_PAIR_LIMIT {
        let mut out = CauchyCheck::empty(true);
        for k1 in lo..=hi {
            for k2 in k1..=hi {
                cauchy_pair(orbit, w, k1, k2, tol, &mut out);
            }
        }
        return Ok(out);
    }
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs", "must be >= 1"));
    }
    let batches = map_batches(n_pairs, seed, |rng, count| {
        use rand::Rng;
        let mut out = CauchyCheck::empty(false);
        for _ in 0..count {
            let k1 = rng.random_range(lo..=hi);
            let k2 = rng.random_range(lo..=hi);
            cauchy_pair(orbit, w, k1, k2, tol, &mut out);
        }
        out
    });
    let mut out = CauchyCheck::empty(false);
    for b in &batches {
        out.absorb(b);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCheck {
    pub limit_ok: bool,
    pub uniqueness_ok: bool,
    pub links_checked: usize,
    /// `min d(x_{k+1}, T x*) - d(x*, T x*) / s` over the checked links.
    pub liminf_slack: f64,
    /// `min phi(d(x_k, x*)) - d(T x_k, T x*)` over the checked links.
    pub limsup_slack: f64,
    /// `d(x*, y*)` for the independently computed fixed point `y*`.
    pub independent_distance: f64,
    pub agreement_tol: f64,
    /// First `n` with `phi^n(d(x*, y*))` strictly below `d(x*, y*)`.
    pub decay_step: Option<usize>,
}

/// Finite-index versions of the closing limit argument and of the
/// uniqueness argument, evaluated on the solver history of `result` and on a
/// second fixed point `independent` reached from another start.
pub fn verify_limit_and_uniqueness(
    map: &SelfMap,
    space: &BMetricSpace,
    phi: &ComparisonFunction,
    result: &FixedPointResult,
    independent: &FixedPointResult,
    n_max: usize,
    tol: Tolerance,
) -> Result<LimitCheck> {
    if !result.converged || !independent.converged {
        return Err(Error::NotConverged);
    }
    let orbit = &result.history;
    let s = space.s();
    let x_star = &result.x_star;
    let tx_star = map.apply(x_star)?;
    let residual = space.dist(x_star, &tx_star);
    let last = orbit.last_index();

    let mut links = 0;
    let mut limit_ok = true;
    let mut liminf_slack = f64::INFINITY;
    let mut limsup_slack = f64::INFINITY;
    for k in last.saturating_sub(LIMIT_LINKS)..last {
        let next = orbit.point(k + 1);
        let lhs1 = residual / s;
        let rhs1 = space.dist(next, &tx_star);
        let lhs2 = space.dist(next, &tx_star);
        let rhs2 = phi.apply(space.dist(orbit.point(k), x_star));
        links += 1;
        liminf_slack = liminf_slack.min(rhs1 - lhs1);
        limsup_slack = limsup_slack.min(rhs2 - lhs2);
        limit_ok &= tol.holds_le(lhs1, rhs1) && tol.holds_le(lhs2, rhs2);
    }

    let r = space.dist(x_star, &independent.x_star);
    let agreement = agreement_tol(s, result.tol.max(independent.tol));
    // strictness relative to r: near 0 a comparison function can sit within
    // the absolute margin of the identity for more than n_max steps
    let decay_step = (1..=n_max).find(|&n| phi.apply_n(r, n) < r * (1.0 - tol.rel));
    let uniqueness_ok = r <= agreement && (r <= tol.margin(0.0) || decay_step.is_some());

    Ok(LimitCheck {
        limit_ok,
        uniqueness_ok,
        links_checked: links,
        liminf_slack,
        limsup_slack,
        independent_distance: r,
        agreement_tol: agreement,
        decay_step,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub witness: WitnessSet,
    pub minimality: Minimality,
    pub ball_samples_checked: usize,
    pub ball_violations: usize,
    pub ball_half_bound_violations: usize,
    pub ball_center_gap_ok: bool,
    pub segment_checked: usize,
    pub segment_violations: usize,
    pub telescope_violations: usize,
    pub cauchy_pairs_checked: usize,
    pub cauchy_exhaustive: bool,
    pub cauchy_violations: usize,
    pub cauchy_hop_violations: usize,
    pub cauchy_chain_violations: usize,
    pub worst_cauchy_ratio: f64,
    pub limit_check_passed: bool,
    pub uniqueness_decay_passed: bool,
    /// Identifies the orbit every witness of the run was checked against.
    pub orbit_fingerprint: String,
    pub orbit_last_index: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EpsilonOutcome {
    Completed(Box<WitnessReport>),
    Aborted {
        epsilon: f64,
        stage: String,
        diagnostic: String,
    },
}

impl EpsilonOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, EpsilonOutcome::Completed(r) if r.passed)
    }

    pub fn report(&self) -> Option<&WitnessReport> {
        match self {
            EpsilonOutcome::Completed(r) => Some(r),
            EpsilonOutcome::Aborted { .. } => None,
        }
    }
}

/// Sample counts and limits for [`run_pipeline`].
#[derive(Debug, Clone, PartialEq)]
pub struct Budgets {
    pub window: usize,
    pub n_max: usize,
    pub ball_samples: usize,
    pub cauchy_pairs: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub margin: Tolerance,
    /// Start for the second fixed-point solve; sampled from the space when absent.
    pub independent_start: Option<Point>,
    /// Run the hypothesis checks first. `None` means the caller already did.
    pub precheck: Option<Precheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Precheck {
    pub axiom_samples: usize,
    pub contraction_pairs: usize,
    pub phi_tol: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            window: DEFAULT_WINDOW,
            n_max: 10_000,
            ball_samples: 10_000,
            cauchy_pairs: 10_000,
            seed: 42,
            tol: 1e-10,
            max_iter: crate::solver::DEFAULT_MAX_ITER,
            margin: Tolerance::default(),
            independent_start: None,
            precheck: Some(Precheck {
                axiom_samples: 10_000,
                contraction_pairs: 10_000,
                phi_tol: 1e-8,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    /// The single orbit every witness set was checked against.
    pub orbit: Orbit,
    pub fixed_point: FixedPointResult,
    pub independent: FixedPointResult,
    pub limit: Option<LimitCheck>,
    pub outcomes: Vec<EpsilonOutcome>,
}

fn hypothesis(stage: &str, diagnostic: String) -> Error {
    Error::HypothesisFailed {
        stage: stage.into(),
        diagnostic,
    }
}

fn run_prechecks(
    map: &SelfMap,
    space: &BMetricSpace,
    phi: &ComparisonFunction,
    pre: &Precheck,
    b: &Budgets,
) -> Result<()> {
    let axioms = check_axioms(space, pre.axiom_samples, b.seed, b.margin)?;
    if !axioms.passed() {
        return Err(hypothesis(
            "axioms",
            format!(
                "{} triangle violations, worst ratio {}",
                axioms.triangle_violations, axioms.worst_triangle_ratio
            ),
        ));
    }
    let phi_rep = check_phi_properties(phi, &default_grid(), pre.phi_tol, b.n_max, b.margin)?;
    if !phi_rep.passed() {
        return Err(hypothesis("phi", format!("{phi_rep:?}")));
    }
    let c = check_contraction(map, phi, space, pre.contraction_pairs, b.seed, b.margin)?;
    if !c.passed() {
        return Err(hypothesis(
            "contraction",
            format!("{}; witness pair {:?}", c.summary(), c.witness_pair),
        ));
    }
    Ok(())
}

/// Build and check the witnesses of every `eps` against one shared orbit.
pub fn run_pipeline(
    map: &SelfMap,
    space: &BMetricSpace,
    phi: &ComparisonFunction,
    x0: &Point,
    epsilons: &[f64],
    b: &Budgets,
) -> Result<PipelineRun> {
    space.check_point(x0)?;
    if let Some(pre) = &b.precheck {
        run_prechecks(map, space, phi, pre, b)?;
    }
    let s = space.s();
    let tol = b.margin;

    let fixed_point = solve_fixed_point(map, space, x0, b.tol, b.max_iter)?;
    let y0 = match &b.independent_start {
        Some(p) => p.clone(),
        None => space.sample_point(&mut batch_rng(b.seed, u64::MAX)),
    };
    let independent = solve_fixed_point(map, space, &y0, b.tol, b.max_iter)?;
    let limit =
        verify_limit_and_uniqueness(map, space, phi, &fixed_point, &independent, b.n_max, tol).ok();

    let n_tildes: Vec<Result<usize>> = epsilons
        .iter()
        .map(|&eps| find_n_tilde(phi, eps, s, b.n_max, tol))
        .collect();
    let k_needed = n_tildes
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|&n| (b.window + 1) * n)
        .max()
        .unwrap_or(0);
    let orbit = compute_orbit(map, space, x0, k_needed)?;
    let fingerprint = format!("{:016x}", orbit.fingerprint());

    let outcomes = epsilons
        .iter()
        .zip(n_tildes)
        .enumerate()
        .map(|(i, (&eps, nt))| {
            let abort = |stage: &str, e: Error| EpsilonOutcome::Aborted {
                epsilon: eps,
                stage: stage.into(),
                diagnostic: e.to_string(),
            };
            if let Err(e) = nt {
                return abort("n_tilde", e);
            }
            let w = match build_witness(&orbit, phi, eps, s, b.window, b.n_max, tol) {
                Ok(w) => w,
                Err(e) => return abort("witness", e),
            };
            let sub_seed = batch_seed(b.seed, i as u64);
            let ball = match verify_invariant_ball(
                map,
                space,
                phi,
                &orbit,
                &w,
                b.ball_samples,
                sub_seed,
                tol,
            ) {
                Ok(v) => v,
                Err(e) => return abort("invariant_ball", e),
            };
            let seg = match verify_segment_bound(&orbit, &w, tol) {
                Ok(v) => v,
                Err(e) => return abort("segment", e),
            };
            let cauchy = match verify_cauchy_bound(&orbit, &w, b.cauchy_pairs, sub_seed, tol) {
                Ok(v) => v,
                Err(e) => return abort("cauchy", e),
            };
            let minimality = check_minimality(&w, &orbit, phi, tol);
            let limit_ok = limit.as_ref().is_some_and(|l| l.limit_ok);
            let uniq_ok = limit.as_ref().is_some_and(|l| l.uniqueness_ok);
            let passed = ball.passed()
                && seg.passed()
                && cauchy.passed(tol)
                && limit_ok
                && uniq_ok
                && minimality.all()
                && w.is_consistent(phi, tol);
            EpsilonOutcome::Completed(Box::new(WitnessReport {
                witness: w,
                minimality,
                ball_samples_checked: ball.checked,
                ball_violations: ball.violations,
                ball_half_bound_violations: ball.half_bound_violations,
                ball_center_gap_ok: ball.center_gap_ok,
                segment_checked: seg.checked,
                segment_violations: seg.segment_violations,
                telescope_violations: seg.telescope_violations,
                cauchy_pairs_checked: cauchy.checked,
                cauchy_exhaustive: cauchy.exhaustive,
                cauchy_violations: cauchy.violations,
                cauchy_hop_violations: cauchy.hop_violations,
                cauchy_chain_violations: cauchy.chain_violations,
                worst_cauchy_ratio: cauchy.worst_ratio,
                limit_check_passed: limit_ok,
                uniqueness_decay_passed: uniq_ok,
                orbit_fingerprint: fingerprint.clone(),
                orbit_last_index: orbit.last_index(),
                passed,
            }))
        })
        .collect();

    Ok(PipelineRun {
        orbit,
        fixed_point,
        independent,
        limit,
        outcomes,
    })
}
