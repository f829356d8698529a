//! Points, built-in b-metric spaces, and sampled checks of the b-metric axioms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{map_batches, Sampler};
use crate::tolerance::Tolerance;

/// A point of `R^dim` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                what: "point coordinates".into(),
            });
        }
        Ok(Point(coords))
    }

    /// Caller guarantees finiteness (sampler output, map output already checked).
    pub(crate) fn from_finite(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl From<f64> for Point {
    fn from(v: f64) -> Self {
        Point(vec![v])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    /// `||x - y||_2`.
    Euclidean,
    /// `||x - y||_2^q`.
    Snowflake { q: f64 },
    /// `(sum |x_i - y_i|^p)^(1/p)` for `p` in (0, 1).
    LpQuasi { p: f64 },
}

impl SpaceKind {
    fn validate(&self) -> Result<()> {
        match *self {
            SpaceKind::Euclidean => Ok(()),
            SpaceKind::Snowflake { q } if q.is_finite() && q > 0.0 => Ok(()),
            SpaceKind::Snowflake { .. } => Err(Error::invalid("q", "must be finite and > 0")),
            SpaceKind::LpQuasi { p } if p > 0.0 && p < 1.0 => Ok(()),
            SpaceKind::LpQuasi { .. } => Err(Error::invalid("p", "must lie in (0,1)")),
        }
    }

    /// Least relaxation constant of the kind.
    pub fn canonical_s(&self) -> f64 {
        match *self {
            SpaceKind::Euclidean => 1.0,
            SpaceKind::Snowflake { q } => 2f64.powf(q - 1.0).max(1.0),
            SpaceKind::LpQuasi { p } => 2f64.powf(1.0 / p - 1.0),
        }
    }

    /// Half-width of an axis-aligned box containing the ball of radius `r`
    /// around any point.
    pub fn ball_box_radius(&self, r: f64) -> f64 {
        match *self {
            SpaceKind::Euclidean => r,
            SpaceKind::Snowflake { q } => r.powf(1.0 / q),
            // (sum |t_i|^p)^(1/p) >= max |t_i|
            SpaceKind::LpQuasi { .. } => r,
        }
    }
}

/// A built-in b-metric space on `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BMetricSpace {
    pub kind: SpaceKind,
    pub dim: usize,
    pub s_declared: f64,
    /// `s_declared` was forced instead of derived from `kind`.
    pub s_overridden: bool,
    pub sampler: Sampler,
}

impl BMetricSpace {
    pub fn new(kind: SpaceKind, dim: usize) -> Result<Self> {
        kind.validate()?;
        if dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        Ok(BMetricSpace {
            kind,
            dim,
            s_declared: kind.canonical_s(),
            s_overridden: false,
            sampler: Sampler::default(),
        })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(SpaceKind::Euclidean, dim)
    }

    pub fn snowflake(q: f64, dim: usize) -> Result<Self> {
        Self::new(SpaceKind::Snowflake { q }, dim)
    }

    pub fn lp_quasi(p: f64, dim: usize) -> Result<Self> {
        Self::new(SpaceKind::LpQuasi { p }, dim)
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Result<Self> {
        sampler.validate()?;
        self.sampler = sampler;
        Ok(self)
    }

    /// Force the declared constant, e.g. to check a space against a too-small `s`.
    pub fn with_s_override(mut self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 1.0) {
            return Err(Error::invalid("s", "must be finite and >= 1"));
        }
        self.s_declared = s;
        self.s_overridden = true;
        Ok(self)
    }

    pub fn s(&self) -> f64 {
        self.s_declared
    }

    pub fn check_point(&self, x: &Point) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        if !x.is_finite() {
            return Err(Error::NonFinite {
                what: "point coordinates".into(),
            });
        }
        Ok(())
    }

    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.dist(x, y))
    }

    /// Distance without dimension checks. Symmetric by construction: every
    /// term depends on `x_i - y_i` only through its square or absolute value.
    pub(crate) fn dist(&self, x: &Point, y: &Point) -> f64 {
        let pairs = x.coords().iter().zip(y.coords());
        match self.kind {
            SpaceKind::Euclidean => pairs.map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
            SpaceKind::Snowflake { q } => {
                let sq: f64 = pairs.map(|(a, b)| (a - b) * (a - b)).sum();
                if q == 1.0 {
                    sq.sqrt()
                } else {
                    sq.powf(q / 2.0)
                }
            }
            SpaceKind::LpQuasi { p } => pairs
                .map(|(a, b)| (a - b).abs().powf(p))
                .sum::<f64>()
                .powf(1.0 / p),
        }
    }

    pub fn sample_point<R: rand::Rng>(&self, rng: &mut R) -> Point {
        self.sampler.draw(rng, self.dim)
    }
}

/// Evidence for the b-metric axioms on a sample of triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub samples_checked: usize,
    pub identity_violations: usize,
    pub symmetry_violations: usize,
    pub triangle_violations: usize,
    /// Triangle comparisons that landed within the margin of equality.
    pub near_boundary: usize,
    /// Triples skipped for the ratio because `d(x,z) + d(z,y) = 0`.
    pub zero_denominator_skipped: usize,
    pub worst_triangle_ratio: f64,
    /// `(x, z, y)` attaining `worst_triangle_ratio`.
    pub worst_triple: Option<[Point; 3]>,
    pub s_declared: f64,
    pub margin_used: f64,
}

impl AxiomReport {
    fn empty(s: f64, tol: Tolerance) -> Self {
        AxiomReport {
            samples_checked: 0,
            identity_violations: 0,
            symmetry_violations: 0,
            triangle_violations: 0,
            near_boundary: 0,
            zero_denominator_skipped: 0,
            worst_triangle_ratio: 0.0,
            worst_triple: None,
            s_declared: s,
            margin_used: tol.rel,
        }
    }

    /// Fold a later batch into this one. Ties on the worst ratio keep the
    /// earlier witness, so the merge order fixes the result.
    pub fn merge(mut self, other: AxiomReport) -> Self {
        self.samples_checked += other.samples_checked;
        self.identity_violations += other.identity_violations;
        self.symmetry_violations += other.symmetry_violations;
        self.triangle_violations += other.triangle_violations;
        self.near_boundary += other.near_boundary;
        self.zero_denominator_skipped += other.zero_denominator_skipped;
        if (other.worst_triangle_ratio > self.worst_triangle_ratio || self.worst_triple.is_none())
            && other.worst_triple.is_some()
        {
            self.worst_triangle_ratio = other.worst_triangle_ratio;
            self.worst_triple = other.worst_triple;
        }
        self
    }

    pub fn passed(&self) -> bool {
        let tol = Tolerance::new(self.margin_used);
        self.identity_violations == 0
            && self.symmetry_violations == 0
            && self.triangle_violations == 0
            && tol.holds_le(self.worst_triangle_ratio, self.s_declared)
    }
}

fn axiom_batch<R: rand::Rng>(
    space: &BMetricSpace,
    rng: &mut R,
    count: usize,
    tol: Tolerance,
) -> AxiomReport {
    let s = space.s();
    let mut rep = AxiomReport::empty(s, tol);
    for _ in 0..count {
        let x = space.sample_point(rng);
        let z = space.sample_point(rng);
        let y = space.sample_point(rng);
        rep.samples_checked += 1;

        if space.dist(&x, &x) != 0.0 || (x != y && space.dist(&x, &y) <= 0.0) {
            rep.identity_violations += 1;
        }
        let dxy = space.dist(&x, &y);
        let dyx = space.dist(&y, &x);
        if !tol.holds_le((dxy - dyx).abs(), 0.0) {
            rep.symmetry_violations += 1;
        }
        let denom = space.dist(&x, &z) + space.dist(&z, &y);
        let bound = s * denom;
        if !tol.holds_le(dxy, bound) {
            rep.triangle_violations += 1;
        } else if tol.near(dxy, bound) {
            rep.near_boundary += 1;
        }
        if denom > 0.0 {
            let ratio = dxy / denom;
            if ratio > rep.worst_triangle_ratio || rep.worst_triple.is_none() {
                rep.worst_triangle_ratio = ratio;
                rep.worst_triple = Some([x, z, y]);
            }
        } else {
            rep.zero_denominator_skipped += 1;
        }
    }
    rep
}

/// Check identity, symmetry and the relaxed triangle inequality on
/// `n_samples` seeded triples `(x, z, y)`.
pub fn check_axioms(
    space: &BMetricSpace,
    n_samples: usize,
    seed: u64,
    tol: Tolerance,
) -> Result<AxiomReport> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be >= 1"));
    }
    let batches = map_batches(n_samples, seed, |rng, count| {
        axiom_batch(space, rng, count, tol)
    });
    Ok(batches
        .into_iter()
        .fold(AxiomReport::empty(space.s(), tol), AxiomReport::merge))
}

/// Empirical lower bound on the least admissible relaxation constant:
/// `max(1, sup d(x,y) / (d(x,z) + d(z,y)))` over sampled triples.
pub fn estimate_min_s(space: &BMetricSpace, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be >= 1"));
    }
    let sups = map_batches(n_samples, seed, |rng, count| {
        let mut sup: Option<f64> = None;
        for _ in 0..count {
            let x = space.sample_point(rng);
            let z = space.sample_point(rng);
            let y = space.sample_point(rng);
            let denom = space.dist(&x, &z) + space.dist(&z, &y);
            if denom > 0.0 {
                let r = space.dist(&x, &y) / denom;
                sup = Some(sup.map_or(r, |m: f64| m.max(r)));
            }
        }
        sup
    });
    sups.into_iter()
        .flatten()
        .reduce(f64::max)
        .map(|m| m.max(1.0))
        .ok_or(Error::AllDenominatorsZero)
}

/// Same estimate, exhaustively over every triple of `points`.
pub fn estimate_min_s_exhaustive(space: &BMetricSpace, points: &[Point]) -> Result<f64> {
    for p in points {
        space.check_point(p)?;
    }
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = space.dist(&points[i], &points[j]);
        }
    }
    let mut sup: Option<f64> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            let dij = d[i * n + j];
            for k in 0..n {
                let denom = d[i * n + k] + d[k * n + j];
                if denom > 0.0 {
                    let r = dij / denom;
                    sup = Some(sup.map_or(r, |m: f64| m.max(r)));
                }
            }
        }
    }
    sup.map(|m| m.max(1.0)).ok_or(Error::AllDenominatorsZero)
}

/// `nodes` equally spaced points on `[-half_width, half_width]` along the
/// first coordinate axis of `R^dim`.
pub fn axis_grid(dim: usize, half_width: f64, nodes: usize) -> Vec<Point> {
    (0..nodes)
        .map(|i| {
            let t = if nodes > 1 {
                -half_width + 2.0 * half_width * i as f64 / (nodes - 1) as f64
            } else {
                0.0
            };
            let mut c = vec![0.0; dim];
            c[0] = t;
            Point::from_finite(c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{batch_plan, batch_rng};

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let e = BMetricSpace::euclidean(1).unwrap();
        assert_eq!(e.distance(&p(&[1.0]), &p(&[4.0])).unwrap(), 3.0);
        let sf = BMetricSpace::snowflake(2.0, 1).unwrap();
        assert_eq!(sf.distance(&p(&[0.0]), &p(&[3.0])).unwrap(), 9.0);
        let lp = BMetricSpace::lp_quasi(0.5, 2).unwrap();
        assert_eq!(lp.distance(&p(&[0.0, 0.0]), &p(&[1.0, 1.0])).unwrap(), 4.0);
    }

    #[test]
    fn distance_errors() {
        let e = BMetricSpace::euclidean(2).unwrap();
        assert!(matches!(
            e.distance(&p(&[1.0]), &p(&[1.0, 2.0])),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
        assert!(Point::new(vec![f64::NAN]).is_err());
        let bad = Point::from_finite(vec![f64::INFINITY, 0.0]);
        assert!(matches!(
            e.distance(&bad, &p(&[0.0, 0.0])),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn declared_constants() {
        assert_eq!(BMetricSpace::euclidean(3).unwrap().s(), 1.0);
        assert_eq!(BMetricSpace::snowflake(3.0, 1).unwrap().s(), 4.0);
        assert_eq!(BMetricSpace::snowflake(0.5, 1).unwrap().s(), 1.0);
        assert_eq!(BMetricSpace::lp_quasi(0.5, 2).unwrap().s(), 2.0);
        assert!(BMetricSpace::lp_quasi(1.0, 2).is_err());
        assert!(BMetricSpace::snowflake(-1.0, 2).is_err());
        assert!(BMetricSpace::euclidean(0).is_err());
        assert!(BMetricSpace::euclidean(1)
            .unwrap()
            .with_s_override(0.5)
            .is_err());
    }

    #[test]
    fn zero_samples_rejected() {
        let e = BMetricSpace::euclidean(1).unwrap();
        assert!(check_axioms(&e, 0, 1, Tolerance::default()).is_err());
        assert!(estimate_min_s(&e, 0, 1).is_err());
    }

    #[test]
    fn euclidean_axioms_pass() {
        let e = BMetricSpace::euclidean(2).unwrap();
        let r = check_axioms(&e, 100_000, 42, Tolerance::default()).unwrap();
        assert_eq!(r.samples_checked, 100_000);
        assert!(r.passed(), "{r:?}");
        assert!(r.worst_triangle_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn snowflake_against_forced_unit_constant_fails() {
        let sf = BMetricSpace::snowflake(2.0, 1)
            .unwrap()
            .with_s_override(1.0)
            .unwrap();
        // 0, 1, 2: d(0,2) = 4 > 1 * (1 + 1)
        let (x, z, y) = (p(&[0.0]), p(&[1.0]), p(&[2.0]));
        assert!(sf.dist(&x, &y) > sf.s() * (sf.dist(&x, &z) + sf.dist(&z, &y)));
        let r = check_axioms(&sf, 10_000, 3, Tolerance::default()).unwrap();
        assert!(r.triangle_violations > 0);
        assert!(!r.passed());
    }

    #[test]
    fn zero_denominator_triples_are_skipped() {
        // two-node lattice: x = z = y happens for a quarter of the triples
        let sf = BMetricSpace::euclidean(1)
            .unwrap()
            .with_sampler(Sampler::Lattice {
                half_width: 1.0,
                nodes: 2,
            })
            .unwrap();
        let r = check_axioms(&sf, 2000, 5, Tolerance::default()).unwrap();
        assert!(r.zero_denominator_skipped > 0);
        assert!(r.passed());
    }

    #[test]
    fn lattice_sampler_hits_midpoint_ratio_exactly() {
        let sf = BMetricSpace::snowflake(2.0, 1)
            .unwrap()
            .with_sampler(Sampler::Lattice {
                half_width: 2.0,
                nodes: 5,
            })
            .unwrap();
        assert_eq!(estimate_min_s(&sf, 20_000, 11).unwrap(), 2.0);
    }

    #[test]
    fn exhaustive_grid_with_zero_triples_only_errors() {
        let e = BMetricSpace::euclidean(1).unwrap();
        assert!(matches!(
            estimate_min_s_exhaustive(&e, &[p(&[1.0])]),
            Err(Error::AllDenominatorsZero)
        ));
    }

    #[test]
    fn parallel_batches_match_serial_fold() {
        let sp = BMetricSpace::lp_quasi(0.5, 2).unwrap();
        let tol = Tolerance::default();
        let n = 5000;
        let par = check_axioms(&sp, n, 99, tol).unwrap();
        let serial = batch_plan(n)
            .into_iter()
            .map(|(b, c)| axiom_batch(&sp, &mut batch_rng(99, b), c, tol))
            .fold(AxiomReport::empty(sp.s(), tol), AxiomReport::merge);
        assert_eq!(par, serial);
    }
}
