//! Deterministic, batch-partitioned sampling.
//!
//! A sampling run of `n` draws is split into fixed-size batches. Batch `b`
//! gets its own ChaCha8 stream seeded from `(seed, b)`, so batches can be
//! evaluated in any order or in parallel and still produce the same draws.
//! The first `n` draws of a run are always a prefix of the first `n' > n`
//! draws under the same seed (nested sampling).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Point;

pub const BATCH_SIZE: usize = 1024;
pub const DEFAULT_HALF_WIDTH: f64 = 10.0;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn batch_seed(seed: u64, batch: u64) -> u64 {
    splitmix64(seed ^ splitmix64(batch.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(batch_seed(seed, batch))
}

/// `(batch index, draws in batch)` for a run of `n` draws.
pub fn batch_plan(n: usize) -> Vec<(u64, usize)> {
    (0..n.div_ceil(BATCH_SIZE))
        .map(|b| (b as u64, BATCH_SIZE.min(n - b * BATCH_SIZE)))
        .collect()
}

/// Evaluate `f` on every batch of an `n`-draw run, in parallel, returning the
/// per-batch results in batch order.
pub(crate) fn map_batches<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    batch_plan(n)
        .into_par_iter()
        .map(|(b, count)| {
            let mut rng = batch_rng(seed, b);
            f(&mut rng, count)
        })
        .collect()
}

/// Distribution used to draw points of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case")]
pub enum Sampler {
    /// Coordinates uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    /// Coordinates drawn uniformly from `nodes` equally spaced values
    /// spanning `[-half_width, half_width]`. Produces exact collinear
    /// midpoint configurations with positive probability.
    Lattice { half_width: f64, nodes: usize },
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler::Uniform {
            half_width: DEFAULT_HALF_WIDTH,
        }
    }
}

impl Sampler {
    pub fn validate(&self) -> Result<()> {
        let hw = self.half_width();
        if !(hw.is_finite() && hw > 0.0) {
            return Err(Error::invalid("half_width", "must be finite and > 0"));
        }
        if let Sampler::Lattice { nodes, .. } = self {
            if *nodes < 2 {
                return Err(Error::invalid("nodes", "lattice needs at least 2 nodes"));
            }
        }
        Ok(())
    }

    pub fn half_width(&self) -> f64 {
        match *self {
            Sampler::Uniform { half_width } | Sampler::Lattice { half_width, .. } => half_width,
        }
    }

    fn coordinate<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Sampler::Uniform { half_width } => rng.random_range(-half_width..=half_width),
            Sampler::Lattice { half_width, nodes } => {
                let i = rng.random_range(0..nodes);
                -half_width + 2.0 * half_width * i as f64 / (nodes - 1) as f64
            }
        }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R, dim: usize) -> Point {
        Point::from_finite((0..dim).map(|_| self.coordinate(rng)).collect())
    }
}

/// Uniform proposal on the box `center + [-radius, radius]^dim`.
pub fn draw_in_box<R: Rng>(rng: &mut R, center: &Point, radius: f64) -> Point {
    Point::from_finite(
        center
            .coords()
            .iter()
            .map(|c| c + rng.random_range(-radius..=radius))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_plan_covers_run() {
        let plan = batch_plan(2 * BATCH_SIZE + 5);
        assert_eq!(plan.len(), 3);
        assert_eq!(plan[2], (2, 5));
        assert_eq!(plan.iter().map(|p| p.1).sum::<usize>(), 2 * BATCH_SIZE + 5);
        assert!(batch_plan(0).is_empty());
    }

    #[test]
    fn batch_streams_are_reproducible_and_distinct() {
        let s = Sampler::default();
        let a = s.draw(&mut batch_rng(7, 0), 3);
        let b = s.draw(&mut batch_rng(7, 0), 3);
        let c = s.draw(&mut batch_rng(7, 1), 3);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn lattice_values_are_nodes() {
        let s = Sampler::Lattice {
            half_width: 1.0,
            nodes: 3,
        };
        let mut rng = batch_rng(1, 0);
        for _ in 0..100 {
            let v = s.draw(&mut rng, 1).coords()[0];
            assert!(v == -1.0 || v == 0.0 || v == 1.0);
        }
    }

    #[test]
    fn rejects_degenerate_sampler() {
        assert!(Sampler::Uniform { half_width: 0.0 }.validate().is_err());
        assert!(Sampler::Lattice {
            half_width: 1.0,
            nodes: 1
        }
        .validate()
        .is_err());
    }
}
