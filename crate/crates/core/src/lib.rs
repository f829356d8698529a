//! Fixed-point iteration in b-metric spaces, with a checker for the
//! Cauchy-sequence argument behind convergence of Picard iterates of
//! `phi`-contractions.
//!
//! A b-metric space relaxes the triangle inequality to
//! `d(x, y) <= s (d(x, z) + d(z, y))` for a constant `s >= 1`. If
//! `d(Tx, Ty) <= phi(d(x, y))` for an increasing `phi` whose iterates decay
//! to zero, `T` has a unique fixed point and every orbit converges to it.
//!
//! Modules, bottom up:
//!
//! * [`space`]: built-in spaces and sampled axiom checks;
//! * [`phi`]: comparison functions and the index `n_tilde`;
//! * [`map`]: self-maps and sampled contraction checks;
//! * [`solver`]: orbits, fixed-point solves, orbit bounds, uniqueness;
//! * [`witness`]: the `eps`-dependent witness indices and the inequalities
//!   of the Cauchy argument;
//! * [`config`], [`runner`], [`report`]: configuration documents, stage
//!   orchestration and report output.

pub mod config;
pub mod error;
pub mod map;
pub mod phi;
pub mod report;
pub mod runner;
pub mod sampling;
pub mod solver;
pub mod space;
pub mod tolerance;
pub mod witness;

pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
pub use map::{check_contraction, ContractionReport, MapKind, SelfMap};
pub use phi::{check_phi_properties, find_n_tilde, ComparisonFunction, PhiKind, PhiReport};
pub use report::{emit_report, Format, Report, Verdict};
pub use runner::{execute, Command, ExecOptions};
pub use sampling::Sampler;
pub use solver::{
    check_orbit_bounds, check_uniqueness, compute_orbit, solve_fixed_point, FixedPointResult, Orbit,
};
pub use space::{check_axioms, estimate_min_s, AxiomReport, BMetricSpace, Point, SpaceKind};
pub use tolerance::Tolerance;
pub use witness::{
    find_m0, find_m_tilde, run_pipeline, verify_cauchy_bound, verify_invariant_ball,
    verify_limit_and_uniqueness, verify_segment_bound, Budgets, WitnessReport, WitnessSet,
};
