//! Report document, text summary and CSV trace.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::RawConfig;
use crate::error::{Error, Result};
use crate::map::ContractionReport;
use crate::phi::PhiReport;
use crate::solver::{FixedPointResult, OrbitBoundsReport, TraceRow, UniquenessReport};
use crate::space::AxiomReport;
use crate::witness::{EpsilonOutcome, LimitCheck};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// 0 pass, 1 fail, 3 inconclusive. Code 2 is reserved for usage and
    /// configuration errors, which never produce a verdict.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomSection {
    #[serde(flatten)]
    pub report: AxiomReport,
    pub estimated_min_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionSection {
    #[serde(flatten)]
    pub report: ContractionReport,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub verdict: Verdict,
    /// Stage that decided a non-passing verdict.
    pub first_failure: Option<String>,
    pub diagnostics: Vec<Diagnostic>,
    pub config: RawConfig,
    pub axioms: Option<AxiomSection>,
    pub phi: Option<PhiReport>,
    pub contraction: Option<ContractionSection>,
    pub fixed_point: Option<FixedPointResult>,
    pub orbit_bounds: Option<OrbitBoundsReport>,
    pub uniqueness: Option<UniquenessReport>,
    pub limit: Option<LimitCheck>,
    pub witnesses: Vec<EpsilonOutcome>,
    /// Absent unless requested; reports without timing are reproducible byte for byte.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(format!("unknown format `{other}`; expected json or text")),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn to_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

pub fn to_text(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "bmfix {} report (schema {})",
        r.command, r.schema_version
    );
    let _ = writeln!(out, "verdict: {}", r.verdict.as_str());
    if let Some(stage) = &r.first_failure {
        let _ = writeln!(out, "first failure: {stage}");
    }
    for d in &r.diagnostics {
        let _ = writeln!(out, "  [{}] {}", d.stage, d.message);
    }
    if let Some(a) = &r.axioms {
        let _ = writeln!(
            out,
            "axioms: {} triples, violations identity={} symmetry={} triangle={}, worst ratio {:.6} vs s={} ({})",
            a.report.samples_checked,
            a.report.identity_violations,
            a.report.symmetry_violations,
            a.report.triangle_violations,
            a.report.worst_triangle_ratio,
            a.report.s_declared,
            yes_no(a.report.passed()),
        );
        if let Some(s) = a.estimated_min_s {
            let _ = writeln!(out, "  estimated least s: {s:.6}");
        }
    }
    if let Some(p) = &r.phi {
        let _ = writeln!(
            out,
            "phi: grid {} points, monotone={} below_identity={} decay_failures={} ({})",
            p.grid_size,
            p.monotone_violations,
            p.below_identity_violations,
            p.decay_failures,
            yes_no(p.passed()),
        );
    }
    if let Some(c) = &r.contraction {
        let _ = writeln!(
            out,
            "contraction: {}, worst slack {:e} ({})",
            c.summary,
            c.report.worst_slack,
            yes_no(c.report.passed())
        );
        if let Some((x, y)) = &c.report.witness_pair {
            let _ = writeln!(out, "  witness pair: {:?} {:?}", x.coords(), y.coords());
        }
    }
    if let Some(f) = &r.fixed_point {
        let _ = writeln!(
            out,
            "solve: x* = {:?}, residual {:e}, {} iterations, converged={}",
            f.x_star.coords(),
            f.residual,
            f.iterations,
            f.converged
        );
    }
    if let Some(b) = &r.orbit_bounds {
        let _ = writeln!(
            out,
            "orbit bounds: {} + {} checks, {} violations ({})",
            b.succ_checked,
            b.block_checked,
            b.succ_violations + b.block_violations,
            yes_no(b.passed())
        );
    }
    if let Some(u) = &r.uniqueness {
        let _ = writeln!(
            out,
            "uniqueness: {} starts, max pairwise {:e} vs {:e} ({})",
            u.starts.len(),
            u.max_pairwise,
            u.agreement_tol,
            u.verdict.as_str()
        );
    }
    if let Some(l) = &r.limit {
        let _ = writeln!(
            out,
            "limit links: {} ({}), uniqueness decay: {}",
            l.links_checked,
            yes_no(l.limit_ok),
            yes_no(l.uniqueness_ok)
        );
    }
    for w in &r.witnesses {
        match w {
            EpsilonOutcome::Completed(rep) => {
                let ws = &rep.witness;
                let _ = writeln!(
                    out,
                    "eps={}: n~={} m~={} k0={} m0={} m_bar={} window={} | ball {}/{} seg {}/{} cauchy {}/{} worst {:.3e} ({})",
                    ws.epsilon,
                    ws.n_tilde,
                    ws.m_tilde,
                    ws.k0,
                    ws.m0,
                    ws.m_bar,
                    ws.window,
                    rep.ball_violations,
                    rep.ball_samples_checked,
                    rep.segment_violations + rep.telescope_violations,
                    rep.segment_checked,
                    rep.cauchy_violations,
                    rep.cauchy_pairs_checked,
                    rep.worst_cauchy_ratio,
                    yes_no(rep.passed)
                );
            }
            EpsilonOutcome::Aborted {
                epsilon,
                stage,
                diagnostic,
            } => {
                let _ = writeln!(out, "eps={epsilon}: aborted at {stage}: {diagnostic}");
            }
        }
    }
    out
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => to_json(report),
        Format::Text => to_text(report),
    }
}

/// CSV with header `k,succ_dist,dist_to_xstar`, LF line endings.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("k,succ_dist,dist_to_xstar\n");
    for r in rows {
        let _ = writeln!(out, "{},{:?},{:?}", r.k, r.succ_dist, r.dist_to_xstar);
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Serialize `report`, optionally writing the CSV trace to `trace_path`.
pub fn emit_report(report: &Report, format: Format, trace_path: Option<&Path>) -> Result<String> {
    if let Some(p) = trace_path {
        write_file(p, &trace_csv(&report.trace))?;
    }
    Ok(render(report, format))
}
