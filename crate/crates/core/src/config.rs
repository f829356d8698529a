//! Run configuration documents.
//!
//! A configuration is a TOML document with four tables:
//!
//! ```toml
//! [space]
//! kind = "snowflake"      # euclidean | snowflake | lp_quasi
//! dim = 1
//! q = 2.0                 # snowflake only; lp_quasi takes p
//!
//! [map]
//! kind = "scalar_affine"  # scalar_affine | affine | constant
//! a = 0.5
//! b = 1.0
//!
//! [phi]
//! kind = "linear"         # linear | rational | power_linear
//! c = 0.25
//!
//! [run]
//! x0 = [0.0]
//! epsilons = [1.0, 0.1, 0.01]
//! ```
//!
//! Unknown keys are rejected, including keys that exist but do not apply to
//! the chosen `kind`. See `docs/config.md` for every key and default.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{MapKind, SelfMap};
use crate::phi::{ComparisonFunction, PhiKind};
use crate::sampling::{Sampler, DEFAULT_HALF_WIDTH};
use crate::space::{BMetricSpace, Point, SpaceKind};
use crate::tolerance::{Tolerance, DEFAULT_RELATIVE_MARGIN};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_HORIZON: usize = 64;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_PAIRS: usize = 10_000;
pub const DEFAULT_N_MAX: usize = 10_000;
pub const DEFAULT_PHI_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub space: RawSpace,
    pub map: RawMap,
    pub phi: RawPhi,
    pub run: RawRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpace {
    pub kind: String,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMap {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPhi {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unchecked: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRun {
    pub x0: Vec<f64>,
    pub epsilons: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ball_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cauchy_pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<Vec<Vec<f64>>>,
}

/// Run block with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunParams {
    pub x0: Point,
    pub epsilons: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub horizon: usize,
    pub seed: u64,
    pub samples: usize,
    pub contraction_pairs: usize,
    pub ball_samples: usize,
    pub cauchy_pairs: usize,
    pub n_max: usize,
    pub phi_tol: f64,
    pub margin: Tolerance,
    /// Starting points for the uniqueness check; derived when absent.
    pub starts: Option<Vec<Point>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub space: BMetricSpace,
    pub map: SelfMap,
    pub phi: ComparisonFunction,
    pub run: RunParams,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn forbid(field: &str, present: bool, kind: &str) -> Result<()> {
    if present {
        return Err(Error::semantic(field, format!("not used by kind `{kind}`")));
    }
    Ok(())
}

fn need<T>(field: &str, v: Option<T>, kind: &str) -> Result<T> {
    v.ok_or_else(|| Error::semantic(field, format!("required for kind `{kind}`")))
}

fn point(field: &str, coords: &[f64], dim: usize) -> Result<Point> {
    if coords.len() != dim {
        return Err(Error::semantic(
            field,
            format!("must have {dim} coordinates, found {}", coords.len()),
        ));
    }
    Point::new(coords.to_vec()).map_err(|_| Error::semantic(field, "coordinates must be finite"))
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::semantic(field, "must be finite and > 0"))
    }
}

fn at_least_one(field: &str, v: usize) -> Result<usize> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(Error::semantic(field, "must be >= 1"))
    }
}

fn build_space(raw: &RawSpace) -> Result<BMetricSpace> {
    let k = raw.kind.as_str();
    let kind = match k {
        "euclidean" => {
            forbid("space.q", raw.q.is_some(), k)?;
            forbid("space.p", raw.p.is_some(), k)?;
            SpaceKind::Euclidean
        }
        "snowflake" => {
            forbid("space.p", raw.p.is_some(), k)?;
            let q = need("space.q", raw.q, k)?;
            if !(q.is_finite() && q > 0.0) {
                return Err(Error::semantic("space.q", "must be finite and > 0"));
            }
            SpaceKind::Snowflake { q }
        }
        "lp_quasi" => {
            forbid("space.q", raw.q.is_some(), k)?;
            let p = need("space.p", raw.p, k)?;
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::semantic("space.p", "must lie in (0,1)"));
            }
            SpaceKind::LpQuasi { p }
        }
        other => {
            return Err(Error::semantic(
                "space.kind",
                format!("unknown kind `{other}`; expected euclidean, snowflake or lp_quasi"),
            ))
        }
    };
    let dim = at_least_one("space.dim", raw.dim)?;
    let half_width = positive(
        "space.half_width",
        raw.half_width.unwrap_or(DEFAULT_HALF_WIDTH),
    )?;
    let sampler = match raw.sampler.as_deref().unwrap_or("uniform") {
        "uniform" => {
            forbid("space.nodes", raw.nodes.is_some(), "uniform")?;
            Sampler::Uniform { half_width }
        }
        "lattice" => {
            let nodes = need("space.nodes", raw.nodes, "lattice")?;
            if nodes < 2 {
                return Err(Error::semantic("space.nodes", "must be >= 2"));
            }
            Sampler::Lattice { half_width, nodes }
        }
        other => {
            return Err(Error::semantic(
                "space.sampler",
                format!("unknown sampler `{other}`; expected uniform or lattice"),
            ))
        }
    };
    let mut space = BMetricSpace::new(kind, dim)?.with_sampler(sampler)?;
    if let Some(s) = raw.s_override {
        space = space
            .with_s_override(s)
            .map_err(|_| Error::semantic("space.s_override", "must be finite and >= 1"))?;
    }
    Ok(space)
}

fn build_map(raw: &RawMap, dim: usize) -> Result<SelfMap> {
    let k = raw.kind.as_str();
    let kind = match k {
        "scalar_affine" => {
            forbid("map.matrix", raw.matrix.is_some(), k)?;
            forbid("map.offset", raw.offset.is_some(), k)?;
            forbid("map.c", raw.c.is_some(), k)?;
            let a = need("map.a", raw.a, k)?;
            let b = need("map.b", raw.b, k)?;
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::semantic("map.a", "coefficients must be finite"));
            }
            MapKind::ScalarAffine { a, b }
        }
        "affine" => {
            forbid("map.a", raw.a.is_some(), k)?;
            forbid("map.b", raw.b.is_some(), k)?;
            forbid("map.c", raw.c.is_some(), k)?;
            let matrix = need("map.matrix", raw.matrix.clone(), k)?;
            let offset = need("map.offset", raw.offset.clone(), k)?;
            if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
                return Err(Error::semantic(
                    "map.matrix",
                    format!("must be {dim}x{dim}"),
                ));
            }
            if offset.len() != dim {
                return Err(Error::semantic(
                    "map.offset",
                    format!("must have {dim} entries"),
                ));
            }
            if matrix
                .iter()
                .flatten()
                .chain(&offset)
                .any(|v| !v.is_finite())
            {
                return Err(Error::semantic("map.matrix", "entries must be finite"));
            }
            MapKind::Affine { matrix, offset }
        }
        "constant" => {
            forbid("map.a", raw.a.is_some(), k)?;
            forbid("map.b", raw.b.is_some(), k)?;
            forbid("map.matrix", raw.matrix.is_some(), k)?;
            forbid("map.offset", raw.offset.is_some(), k)?;
            let c = need("map.c", raw.c.as_deref(), k)?;
            MapKind::Constant {
                c: point("map.c", c, dim)?,
            }
        }
        other => {
            return Err(Error::semantic(
                "map.kind",
                format!("unknown kind `{other}`; expected scalar_affine, affine or constant"),
            ))
        }
    };
    SelfMap::new(kind, dim)
}

fn build_phi(raw: &RawPhi) -> Result<ComparisonFunction> {
    let k = raw.kind.as_str();
    let unchecked = raw.unchecked.unwrap_or(false);
    let kind = match k {
        "linear" => {
            forbid("phi.q", raw.q.is_some(), k)?;
            PhiKind::Linear {
                c: need("phi.c", raw.c, k)?,
            }
        }
        "rational" => {
            forbid("phi.c", raw.c.is_some(), k)?;
            forbid("phi.q", raw.q.is_some(), k)?;
            PhiKind::Rational
        }
        "power_linear" => PhiKind::PowerLinear {
            c: need("phi.c", raw.c, k)?,
            q: need("phi.q", raw.q, k)?,
        },
        other => {
            return Err(Error::semantic(
                "phi.kind",
                format!("unknown kind `{other}`; expected linear, rational or power_linear"),
            ))
        }
    };
    if unchecked {
        ComparisonFunction::new_unchecked(kind)
            .map_err(|_| Error::semantic("phi.c", "must be finite and >= 0"))
    } else {
        ComparisonFunction::new(kind).map_err(|e| match e {
            Error::InvalidParameter { name, constraint } => {
                Error::semantic(format!("phi.{name}"), constraint)
            }
            other => other,
        })
    }
}

fn build_run(raw: &RawRun, dim: usize) -> Result<RunParams> {
    let x0 = point("run.x0", &raw.x0, dim)?;
    if raw.epsilons.is_empty() {
        return Err(Error::semantic(
            "run.epsilons",
            "at least one epsilon required",
        ));
    }
    for &e in &raw.epsilons {
        positive("run.epsilons", e)?;
    }
    let margin = raw.margin.unwrap_or(DEFAULT_RELATIVE_MARGIN);
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::semantic("run.margin", "must be finite and >= 0"));
    }
    let starts = match &raw.starts {
        None => None,
        Some(v) => {
            if v.len() < 2 {
                return Err(Error::semantic(
                    "run.starts",
                    "need at least 2 starting points",
                ));
            }
            Some(
                v.iter()
                    .map(|c| point("run.starts", c, dim))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
    };
    let seed = raw.seed.unwrap_or(DEFAULT_SEED);
    if seed > i64::MAX as u64 {
        // documents store integers as signed 64-bit
        return Err(Error::semantic(
            "run.seed",
            format!("must be <= {}", i64::MAX),
        ));
    }
    Ok(RunParams {
        x0,
        epsilons: raw.epsilons.clone(),
        tol: positive("run.tol", raw.tol.unwrap_or(DEFAULT_TOL))?,
        max_iter: at_least_one("run.max_iter", raw.max_iter.unwrap_or(DEFAULT_MAX_ITER))?,
        horizon: at_least_one("run.horizon", raw.horizon.unwrap_or(DEFAULT_HORIZON))?,
        seed,
        samples: at_least_one("run.samples", raw.samples.unwrap_or(DEFAULT_SAMPLES))?,
        contraction_pairs: at_least_one(
            "run.contraction_pairs",
            raw.contraction_pairs.unwrap_or(DEFAULT_PAIRS),
        )?,
        ball_samples: at_least_one(
            "run.ball_samples",
            raw.ball_samples.unwrap_or(DEFAULT_PAIRS),
        )?,
        cauchy_pairs: at_least_one(
            "run.cauchy_pairs",
            raw.cauchy_pairs.unwrap_or(DEFAULT_PAIRS),
        )?,
        n_max: at_least_one("run.n_max", raw.n_max.unwrap_or(DEFAULT_N_MAX))?,
        phi_tol: positive("run.phi_tol", raw.phi_tol.unwrap_or(DEFAULT_PHI_TOL))?,
        margin: Tolerance::new(margin),
        starts,
    })
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigSyntax {
            line: e.span().map_or(1, |s| line_of(text, s.start)),
            message: e.message().trim().to_string(),
        })
    }

    pub fn validate(&self) -> Result<RunConfig> {
        let space = build_space(&self.space)?;
        let map = build_map(&self.map, space.dim)?;
        let phi = build_phi(&self.phi)?;
        let run = build_run(&self.run, space.dim)?;
        Ok(RunConfig {
            space,
            map,
            phi,
            run,
        })
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    RawConfig::parse(text)?.validate()
}

impl RunConfig {
    /// The fully explicit document form, defaults written out.
    pub fn to_raw(&self) -> RawConfig {
        let (kind, q, p) = match self.space.kind {
            SpaceKind::Euclidean => ("euclidean", None, None),
            SpaceKind::Snowflake { q } => ("snowflake", Some(q), None),
            SpaceKind::LpQuasi { p } => ("lp_quasi", None, Some(p)),
        };
        let (sampler, half_width, nodes) = match self.space.sampler {
            Sampler::Uniform { half_width } => ("uniform", half_width, None),
            Sampler::Lattice { half_width, nodes } => ("lattice", half_width, Some(nodes)),
        };
        let space = RawSpace {
            kind: kind.into(),
            dim: self.space.dim,
            q,
            p,
            sampler: Some(sampler.into()),
            half_width: Some(half_width),
            nodes,
            s_override: self.space.s_overridden.then_some(self.space.s_declared),
        };
        let blank_map = RawMap {
            kind: String::new(),
            a: None,
            b: None,
            matrix: None,
            offset: None,
            c: None,
        };
        let map = match &self.map.kind {
            MapKind::ScalarAffine { a, b } => RawMap {
                kind: "scalar_affine".into(),
                a: Some(*a),
                b: Some(*b),
                ..blank_map
            },
            MapKind::Affine { matrix, offset } => RawMap {
                kind: "affine".into(),
                matrix: Some(matrix.clone()),
                offset: Some(offset.clone()),
                ..blank_map
            },
            MapKind::Constant { c } => RawMap {
                kind: "constant".into(),
                c: Some(c.coords().to_vec()),
                ..blank_map
            },
        };
        let (pk, c, q) = match self.phi.kind {
            PhiKind::Linear { c } => ("linear", Some(c), None),
            PhiKind::Rational => ("rational", None, None),
            PhiKind::PowerLinear { c, q } => ("power_linear", Some(c), Some(q)),
        };
        let phi = RawPhi {
            kind: pk.into(),
            c,
            q,
            unchecked: self.phi.unchecked.then_some(true),
        };
        let r = &self.run;
        let run = RawRun {
            x0: r.x0.coords().to_vec(),
            epsilons: r.epsilons.clone(),
            tol: Some(r.tol),
            max_iter: Some(r.max_iter),
            horizon: Some(r.horizon),
            seed: Some(r.seed),
            samples: Some(r.samples),
            contraction_pairs: Some(r.contraction_pairs),
            ball_samples: Some(r.ball_samples),
            cauchy_pairs: Some(r.cauchy_pairs),
            n_max: Some(r.n_max),
            phi_tol: Some(r.phi_tol),
            margin: Some(r.margin.rel),
            starts: r
                .starts
                .as_ref()
                .map(|v| v.iter().map(|p| p.coords().to_vec()).collect()),
        };
        RawConfig {
            space,
            map,
            phi,
            run,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_raw()).expect("config tables always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[space]
kind = "euclidean"
dim = 1

[map]
kind = "scalar_affine"
a = 0.5
b = 1.0

[phi]
kind = "linear"
c = 0.5

[run]
x0 = [0]
epsilons = [0.1]
"#;

    #[test]
    fn minimal_document_fills_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.run.tol, 1e-10);
        assert_eq!(c.run.horizon, 64);
        assert_eq!(c.run.seed, 42);
        assert_eq!(c.run.max_iter, 10_000);
        assert_eq!(c.space.sampler, Sampler::Uniform { half_width: 10.0 });
        assert_eq!(c.map, SelfMap::scalar_affine(0.5, 1.0, 1).unwrap());
    }

    #[test]
    fn phi_range_is_semantic_error() {
        let text = MINIMAL.replace("c = 0.5", "c = 1.0");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(
            err.to_string(),
            "config error in `phi.c`: must lie in [0,1)"
        );
        let ok = text.replace("c = 1.0", "c = 1.0\nunchecked = true");
        assert!(parse_config(&ok).unwrap().phi.unchecked);
    }

    #[test]
    fn empty_epsilons_rejected() {
        let err = parse_config(&MINIMAL.replace("[0.1]", "[]")).unwrap_err();
        assert!(err.to_string().contains("at least one epsilon required"));
        assert!(parse_config(&MINIMAL.replace("[0.1]", "[0.1, -1.0]")).is_err());
    }

    #[test]
    fn syntax_error_has_line_number() {
        let text = MINIMAL.replace("dim = 1", "dim = = 1");
        match parse_config(&text).unwrap_err() {
            Error::ConfigSyntax { line, .. } => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("dim = 1", "dim = 1\ncolour = \"red\"");
        assert!(matches!(
            parse_config(&text),
            Err(Error::ConfigSyntax { line: 5, .. })
        ));
        let text = MINIMAL.replace("dim = 1", "dim = 1\nq = 2.0");
        assert_eq!(
            parse_config(&text).unwrap_err(),
            Error::semantic("space.q", "not used by kind `euclidean`")
        );
    }

    #[test]
    fn x0_dimension_checked() {
        let err = parse_config(&MINIMAL.replace("x0 = [0]", "x0 = [0, 1]")).unwrap_err();
        assert!(err.to_string().contains("run.x0"));
    }

    #[test]
    fn explicit_form_round_trips() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&c.to_toml_string()).unwrap(), c);
    }
}
