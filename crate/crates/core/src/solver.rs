//! Picard iteration: orbits, fixed-point solves with a residual certificate,
//! and the orbit-level bounds that follow from the contraction inequality.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::SelfMap;
use crate::phi::ComparisonFunction;
use crate::report::Verdict;
use crate::space::{BMetricSpace, Point};
use crate::tolerance::Tolerance;

pub const DEFAULT_MAX_ITER: usize = 10_000;

/// The sequence `x_k = T^k x_0`, `k = 0..=K`, with `d(x_k, x_{k+1})` cached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Orbit {
    pub x0: Point,
    pub points: Vec<Point>,
    pub succ_dists: Vec<f64>,
    #[serde(skip)]
    pub space: BMetricSpace,
    #[serde(skip)]
    pub map: SelfMap,
}

impl Orbit {
    /// Last index `K`.
    pub fn last_index(&self) -> usize {
        self.points.len() - 1
    }

    pub fn point(&self, k: usize) -> &Point {
        &self.points[k]
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.space.dist(&self.points[i], &self.points[j])
    }

    pub(crate) fn require(&self, index: usize) -> Result<()> {
        if index > self.last_index() {
            return Err(Error::OrbitTooShort {
                needed: index,
                available: self.last_index(),
            });
        }
        Ok(())
    }

    /// Append iterates until the orbit reaches index `k`.
    pub fn extend_to(&mut self, k: usize) -> Result<()> {
        while self.last_index() < k {
            let idx = self.points.len();
            let last = self.points.last().expect("orbit is never empty");
            let next = self
                .map
                .apply(last)
                .map_err(|_| Error::OrbitOverflow { index: idx })?;
            self.succ_dists.push(self.space.dist(last, &next));
            self.points.push(next);
        }
        Ok(())
    }

    /// FNV-1a over the bit patterns of every coordinate.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in &self.points {
            for c in p.coords() {
                for byte in c.to_bits().to_le_bytes() {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }
}

pub fn compute_orbit(map: &SelfMap, space: &BMetricSpace, x0: &Point, k: usize) -> Result<Orbit> {
    space.check_point(x0)?;
    if map.space_dim != space.dim {
        return Err(Error::DimensionMismatch {
            expected: space.dim,
            found: map.space_dim,
        });
    }
    let mut orbit = Orbit {
        x0: x0.clone(),
        points: vec![x0.clone()],
        succ_dists: Vec::new(),
        space: space.clone(),
        map: map.clone(),
    };
    orbit.extend_to(k)?;
    Ok(orbit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub x_star: Point,
    /// `d(x*, T x*)`, recomputed at the returned point.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tol: f64,
    /// Iterates `x_0 ..= x*`.
    #[serde(skip)]
    pub history: Orbit,
}

/// Iterate `T` from `x0` until `d(x_k, x_{k+1}) <= tol` and the returned
/// iterate `x_{k+1}` has residual `d(x_{k+1}, T x_{k+1}) <= tol`.
///
/// Hitting `max_iter` gives a non-converged result, not an error.
pub fn solve_fixed_point(
    map: &SelfMap,
    space: &BMetricSpace,
    x0: &Point,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointResult> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid("tol", "must be finite and > 0"));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter", "must be >= 1"));
    }
    let mut orbit = compute_orbit(map, space, x0, 0)?;
    for it in 1..=max_iter {
        orbit.extend_to(it)?;
        if orbit.succ_dists[it - 1] <= tol {
            let x = orbit.point(it);
            let tx = map
                .apply(x)
                .map_err(|_| Error::OrbitOverflow { index: it + 1 })?;
            let residual = space.dist(x, &tx);
            if residual <= tol {
                return Ok(FixedPointResult {
                    x_star: x.clone(),
                    residual,
                    iterations: it,
                    converged: true,
                    tol,
                    history: orbit,
                });
            }
        }
    }
    let x = orbit.point(max_iter).clone();
    let tx = map.apply(&x).map_err(|_| Error::OrbitOverflow {
        index: max_iter + 1,
    })?;
    Ok(FixedPointResult {
        residual: space.dist(&x, &tx),
        x_star: x,
        iterations: max_iter,
        converged: false,
        tol,
        history: orbit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundViolation {
    pub n: usize,
    pub m: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitBoundsReport {
    /// Checks of `d(x_k, x_{k+1}) <= phi^k(d(x_0, x_1))`.
    pub succ_checked: usize,
    pub succ_violations: usize,
    /// Checks of `d(x_{mn+n}, x_{mn}) <= phi^{mn}(d(x_n, x_0))`.
    pub block_checked: usize,
    pub block_violations: usize,
    /// Up to 16 block violations, smallest `n` first. Successive-distance
    /// violations appear here with `n = 1`.
    pub first_violations: Vec<BoundViolation>,
    pub worst_slack: f64,
}

impl OrbitBoundsReport {
    pub fn passed(&self) -> bool {
        self.succ_violations == 0 && self.block_violations == 0
    }
}

const MAX_LISTED: usize = 16;

pub fn check_orbit_bounds(
    orbit: &Orbit,
    phi: &ComparisonFunction,
    tol: Tolerance,
) -> Result<OrbitBoundsReport> {
    let k_last = orbit.last_index();
    if k_last < 1 {
        return Err(Error::OrbitTooShort {
            needed: 1,
            available: k_last,
        });
    }
    let mut rep = OrbitBoundsReport {
        succ_checked: 0,
        succ_violations: 0,
        block_checked: 0,
        block_violations: 0,
        first_violations: Vec::new(),
        worst_slack: f64::INFINITY,
    };
    let mut envelope = orbit.succ_dists[0];
    for k in 0..k_last {
        let lhs = orbit.succ_dists[k];
        rep.succ_checked += 1;
        rep.worst_slack = rep.worst_slack.min(envelope - lhs);
        if !tol.holds_le(lhs, envelope) {
            rep.succ_violations += 1;
            if rep.first_violations.len() < MAX_LISTED {
                rep.first_violations.push(BoundViolation {
                    n: 1,
                    m: k,
                    lhs,
                    rhs: envelope,
                });
            }
        }
        envelope = phi.apply(envelope);
    }
    for n in 1..=k_last {
        let base = orbit.dist(n, 0);
        // phi^{mn}(base), advanced n steps per m
        let mut rhs = base;
        let mut m = 0;
        while m * n + n <= k_last {
            let lhs = orbit.dist(m * n + n, m * n);
            rep.block_checked += 1;
            rep.worst_slack = rep.worst_slack.min(rhs - lhs);
            if !tol.holds_le(lhs, rhs) {
                rep.block_violations += 1;
                if rep.first_violations.len() < MAX_LISTED {
                    rep.first_violations.push(BoundViolation { n, m, lhs, rhs });
                }
            }
            rhs = phi.apply_n(rhs, n);
            m += 1;
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub starts: Vec<Point>,
    pub fixed_points: Vec<Point>,
    pub converged: Vec<bool>,
    pub max_pairwise: f64,
    /// `2 s^2 tol`.
    pub agreement_tol: f64,
    pub verdict: Verdict,
}

pub fn agreement_tol(s: f64, tol: f64) -> f64 {
    2.0 * s * s * tol
}

/// Solve from every start and compare the returned fixed points pairwise.
pub fn check_uniqueness(
    map: &SelfMap,
    space: &BMetricSpace,
    starts: &[Point],
    tol: f64,
    max_iter: usize,
) -> Result<UniquenessReport> {
    if starts.len() < 2 {
        return Err(Error::invalid("starts", "need at least 2 starting points"));
    }
    let results = starts
        .iter()
        .map(|x0| solve_fixed_point(map, space, x0, tol, max_iter))
        .collect::<Result<Vec<_>>>()?;
    let mut max_pairwise: f64 = 0.0;
    for (i, a) in results.iter().enumerate() {
        for b in &results[i + 1..] {
            max_pairwise = max_pairwise.max(space.dist(&a.x_star, &b.x_star));
        }
    }
    let agreement = agreement_tol(space.s(), tol);
    let verdict = if results.iter().any(|r| !r.converged) {
        Verdict::Inconclusive
    } else if max_pairwise <= agreement {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(UniquenessReport {
        starts: starts.to_vec(),
        fixed_points: results.iter().map(|r| r.x_star.clone()).collect(),
        converged: results.iter().map(|r| r.converged).collect(),
        max_pairwise,
        agreement_tol: agreement,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: usize,
    /// `d(x_k, x_{k+1})`; for the last row `x_{k+1} = T x_k` is computed.
    pub succ_dist: f64,
    pub dist_to_xstar: f64,
}

pub fn trace_rows(result: &FixedPointResult) -> Vec<TraceRow> {
    let orbit = &result.history;
    let space = &orbit.space;
    (0..=orbit.last_index())
        .map(|k| {
            let succ_dist = match orbit.succ_dists.get(k) {
                Some(&d) => d,
                None => orbit
                    .map
                    .apply(orbit.point(k))
                    .map(|t| space.dist(orbit.point(k), &t))
                    .unwrap_or(f64::NAN),
            };
            TraceRow {
                k,
                succ_dist,
                dist_to_xstar: space.dist(orbit.point(k), &result.x_star),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: Tolerance = Tolerance { rel: 1e-12 };

    fn half_map() -> SelfMap {
        SelfMap::scalar_affine(0.5, 1.0, 1).unwrap()
    }

    #[test]
    fn orbit_examples() {
        let e = BMetricSpace::euclidean(1).unwrap();
        let o = compute_orbit(&half_map(), &e, &0.0.into(), 3).unwrap();
        let xs: Vec<f64> = o.points.iter().map(|p| p.coords()[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 1.5, 1.75]);
        assert_eq!(o.succ_dists, vec![1.0, 0.5, 0.25]);

        let k = SelfMap::constant(5.0.into()).unwrap();
        let o = compute_orbit(&k, &e, &0.0.into(), 2).unwrap();
        assert_eq!(o.succ_dists, vec![5.0, 0.0]);
        assert_eq!(o.point(2), &Point::from(5.0));

        let o = compute_orbit(&half_map(), &e, &7.0.into(), 0).unwrap();
        assert_eq!(o.points.len(), 1);
        assert!(o.succ_dists.is_empty());
    }

    #[test]
    fn orbit_overflow_names_index() {
        let e = BMetricSpace::euclidean(1).unwrap();
        let t = SelfMap::scalar_affine(1e200, 0.0, 1).unwrap();
        assert_eq!(
            compute_orbit(&t, &e, &1.0.into(), 5).unwrap_err(),
            Error::OrbitOverflow { index: 2 }
        );
    }

    #[test]
    fn extension_preserves_prefix() {
        let e = BMetricSpace::euclidean(1).unwrap();
        let short = compute_orbit(&half_map(), &e, &0.0.into(), 10).unwrap();
        let mut long = short.clone();
        long.extend_to(40).unwrap();
        assert_eq!(&long.points[..11], &short.points[..]);
        assert_eq!(
            long,
            compute_orbit(&half_map(), &e, &0.0.into(), 40).unwrap()
        );
    }

    #[test]
    fn solve_half_map() {
        let e = BMetricSpace::euclidean(1).unwrap();
        let r = solve_fixed_point(&half_map(), &e, &0.0.into(), 1e-10, 100).unwrap();
        assert!(r.converged);
        assert!(r.residual <= 1e-10);
        assert!(r.iterations <= 40);
        assert!((r.x_star.coords()[0] - 2.0).abs() <= 2e-10);
        assert_eq!(r.history.last_index(), r.iterations);
    }

    #[test]
    fn solve_constant_map() {
        let e = BMetricSpace::euclidean(1).unwrap();
        let k = SelfMap::constant(5.0.into()).unwrap();
        let r = solve_fixed_point(&k, &e, &0.0.into(), 1e-10, 100).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2);
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.x_star, 5.0.into());
    }

    #[test]
    fn budget_exhaustion_is_not_an_error() {
        let e = BMetricSpace::euclidean(1).unwrap();
        let t = SelfMap::scalar_affine(-1.0, 0.0, 1).unwrap();
        let r = solve_fixed_point(&t, &e, &1.0.into(), 1e-10, 50).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 50);
        assert_eq!(r.residual, 2.0);
    }

    #[test]
    fn solve_argument_errors() {
        let e = BMetricSpace::euclidean(1).unwrap();
        assert!(solve_fixed_point(&half_map(), &e, &0.0.into(), 0.0, 10).is_err());
        assert!(solve_fixed_point(&half_map(), &e, &0.0.into(), 1e-3, 0).is_err());
        let e2 = BMetricSpace::euclidean(2).unwrap();
        assert!(solve_fixed_point(&half_map(), &e2, &0.0.into(), 1e-3, 10).is_err());
    }

    #[test]
    fn orbit_bounds_equality_case() {
        let e = BMetricSpace::euclidean(1).unwrap();
        let phi = ComparisonFunction::linear(0.5).unwrap();
        let o = compute_orbit(&half_map(), &e, &0.0.into(), 20).unwrap();
        let r = check_orbit_bounds(&o, &phi, TOL).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.worst_slack, 0.0);
        assert_eq!(r.succ_checked, 20);
    }

    #[test]
    fn orbit_bounds_constant_map() {
        let e = BMetricSpace::euclidean(1).unwrap();
        let k = SelfMap::constant(5.0.into()).unwrap();
        let o = compute_orbit(&k, &e, &0.0.into(), 6).unwrap();
        let r = check_orbit_bounds(&o, &ComparisonFunction::rational(), TOL).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn orbit_bounds_catch_expansion() {
        let e = BMetricSpace::euclidean(1).unwrap();
        let t = SelfMap::scalar_affine(2.0, 0.0, 1).unwrap();
        let o = compute_orbit(&t, &e, &1.0.into(), 8).unwrap();
        let r = check_orbit_bounds(&o, &ComparisonFunction::linear(0.5).unwrap(), TOL).unwrap();
        assert!(!r.passed());
        // 2^1 > 0.5^1 already at k = 1
        assert_eq!(r.first_violations[0].m, 1);
    }

    #[test]
    fn orbit_bounds_need_two_points() {
        let e = BMetricSpace::euclidean(1).unwrap();
        let o = compute_orbit(&half_map(), &e, &0.0.into(), 0).unwrap();
        assert!(check_orbit_bounds(&o, &ComparisonFunction::rational(), TOL).is_err());
    }

    #[test]
    fn uniqueness_examples() {
        let e = BMetricSpace::euclidean(1).unwrap();
        let r =
            check_uniqueness(&half_map(), &e, &[0.0.into(), 100.0.into()], 1e-10, 1000).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.max_pairwise <= 1e-8);

        let k = SelfMap::constant(3.0.into()).unwrap();
        let r =
            check_uniqueness(&k, &e, &[0.0.into(), 1.0.into(), (-7.0).into()], 1e-10, 100).unwrap();
        assert_eq!(r.max_pairwise, 0.0);

        let r = check_uniqueness(&half_map(), &e, &[4.0.into(), 4.0.into()], 1e-10, 1000).unwrap();
        assert_eq!(r.max_pairwise, 0.0);

        assert!(check_uniqueness(&half_map(), &e, &[0.0.into()], 1e-10, 10).is_err());
    }

    #[test]
    fn uniqueness_inconclusive_on_budget() {
        let e = BMetricSpace::euclidean(1).unwrap();
        let r = check_uniqueness(&half_map(), &e, &[0.0.into(), 100.0.into()], 1e-10, 3).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn trace_rows_follow_orbit() {
        let e = BMetricSpace::euclidean(1).unwrap();
        let r = solve_fixed_point(&half_map(), &e, &0.0.into(), 1e-10, 100).unwrap();
        let rows = trace_rows(&r);
        assert_eq!(rows.len(), r.iterations + 1);
        assert_eq!(rows[3].succ_dist, 0.125);
        assert_eq!(rows.last().unwrap().dist_to_xstar, 0.0);
        assert_eq!(rows.last().unwrap().succ_dist, r.residual);
    }
}
