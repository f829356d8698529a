//! Self-maps of `R^dim` and sampled checks of `d(Tx, Ty) <= phi(d(x, y))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phi::ComparisonFunction;
use crate::sampling::map_batches;
use crate::space::{BMetricSpace, Point};
use crate::tolerance::Tolerance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapKind {
    /// `x -> A x + b`, `A` given row-major.
    Affine {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    /// `x_i -> a x_i + b` for every coordinate.
    ScalarAffine { a: f64, b: f64 },
    /// `x -> c`.
    Constant { c: Point },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfMap {
    pub kind: MapKind,
    pub space_dim: usize,
}

impl SelfMap {
    pub fn new(kind: MapKind, space_dim: usize) -> Result<Self> {
        if space_dim == 0 {
            return Err(Error::invalid("space_dim", "must be >= 1"));
        }
        match &kind {
            MapKind::Affine { matrix, offset } => {
                if matrix.len() != space_dim || matrix.iter().any(|r| r.len() != space_dim) {
                    return Err(Error::invalid(
                        "matrix",
                        format!("must be {space_dim}x{space_dim}"),
                    ));
                }
                if offset.len() != space_dim {
                    return Err(Error::DimensionMismatch {
                        expected: space_dim,
                        found: offset.len(),
                    });
                }
                if matrix
                    .iter()
                    .flatten()
                    .chain(offset)
                    .any(|v| !v.is_finite())
                {
                    return Err(Error::NonFinite {
                        what: "affine coefficients".into(),
                    });
                }
            }
            MapKind::ScalarAffine { a, b } => {
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::NonFinite {
                        what: "scalar_affine coefficients".into(),
                    });
                }
            }
            MapKind::Constant { c } => {
                if c.dim() != space_dim {
                    return Err(Error::DimensionMismatch {
                        expected: space_dim,
                        found: c.dim(),
                    });
                }
            }
        }
        Ok(SelfMap { kind, space_dim })
    }

    pub fn scalar_affine(a: f64, b: f64, space_dim: usize) -> Result<Self> {
        Self::new(MapKind::ScalarAffine { a, b }, space_dim)
    }

    pub fn constant(c: Point) -> Result<Self> {
        let dim = c.dim();
        Self::new(MapKind::Constant { c }, dim)
    }

    pub fn affine(matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Self> {
        let dim = offset.len();
        Self::new(MapKind::Affine { matrix, offset }, dim)
    }

    /// Image coordinates with no finiteness check.
    pub(crate) fn image(&self, x: &Point) -> Vec<f64> {
        match &self.kind {
            MapKind::Affine { matrix, offset } => matrix
                .iter()
                .zip(offset)
                .map(|(row, b)| {
                    row.iter()
                        .zip(x.coords())
                        .map(|(a, xi)| a * xi)
                        .sum::<f64>()
                        + b
                })
                .collect(),
            MapKind::ScalarAffine { a, b } => x.coords().iter().map(|xi| a * xi + b).collect(),
            MapKind::Constant { c } => c.coords().to_vec(),
        }
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        if x.dim() != self.space_dim {
            return Err(Error::DimensionMismatch {
                expected: self.space_dim,
                found: x.dim(),
            });
        }
        Point::new(self.image(x))
    }

    pub fn apply_n(&self, x: &Point, n: usize) -> Result<Point> {
        let mut p = x.clone();
        for _ in 0..n {
            p = self.apply(&p)?;
        }
        Ok(p)
    }
}

/// Outcome of a sampled contraction check. A passing report means no
/// violation was found in `pairs_checked` samples, nothing more.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub pairs_checked: usize,
    pub violations: usize,
    pub near_boundary: usize,
    /// `min phi(d(x,y)) - d(Tx,Ty)` over the sampled pairs.
    pub worst_slack: f64,
    /// Pair attaining `worst_slack`, reported whether or not the check passed.
    pub witness_pair: Option<(Point, Point)>,
}

impl ContractionReport {
    fn empty() -> Self {
        ContractionReport {
            pairs_checked: 0,
            violations: 0,
            near_boundary: 0,
            worst_slack: f64::INFINITY,
            witness_pair: None,
        }
    }

    pub fn merge(mut self, other: ContractionReport) -> Self {
        self.pairs_checked += other.pairs_checked;
        self.violations += other.violations;
        self.near_boundary += other.near_boundary;
        if other.worst_slack < self.worst_slack {
            self.worst_slack = other.worst_slack;
            self.witness_pair = other.witness_pair;
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn summary(&self) -> String {
        if self.passed() {
            format!("no violation found in {} samples", self.pairs_checked)
        } else {
            format!(
                "{} violations in {} samples",
                self.violations, self.pairs_checked
            )
        }
    }
}

/// Sample `n_pairs` pairs from the space's sampler and check
/// `d(Tx,Ty) <= phi(d(x,y))` on each.
pub fn check_contraction(
    map: &SelfMap,
    phi: &ComparisonFunction,
    space: &BMetricSpace,
    n_pairs: usize,
    seed: u64,
    tol: Tolerance,
) -> Result<ContractionReport> {
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs", "must be >= 1"));
    }
    if map.space_dim != space.dim {
        return Err(Error::DimensionMismatch {
            expected: space.dim,
            found: map.space_dim,
        });
    }
    let batches = map_batches(n_pairs, seed, |rng, count| -> Result<ContractionReport> {
        let mut rep = ContractionReport::empty();
        for _ in 0..count {
            let x = space.sample_point(rng);
            let y = space.sample_point(rng);
            let tx = map.apply(&x)?;
            let ty = map.apply(&y)?;
            let bound = phi.apply(space.dist(&x, &y));
            let lhs = space.dist(&tx, &ty);
            rep.pairs_checked += 1;
            if !tol.holds_le(lhs, bound) {
                rep.violations += 1;
            } else if tol.near(lhs, bound) {
                rep.near_boundary += 1;
            }
            let slack = bound - lhs;
            if slack < rep.worst_slack {
                rep.worst_slack = slack;
                rep.witness_pair = Some((x, y));
            }
        }
        Ok(rep)
    });
    batches
        .into_iter()
        .try_fold(ContractionReport::empty(), |acc, b| Ok(acc.merge(b?)))
}
