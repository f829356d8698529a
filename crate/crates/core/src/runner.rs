//! Orchestration of one configuration: hypothesis checks, solve, witnesses.

use std::time::Instant;

use crate::config::RunConfig;
use crate::error::Error;
use crate::map::check_contraction;
use crate::phi::{check_phi_properties, default_grid};
use crate::report::{
    AxiomSection, ContractionSection, Diagnostic, Report, Timing, Verdict, SCHEMA_VERSION,
};
use crate::sampling::batch_rng;
use crate::solver::{check_orbit_bounds, check_uniqueness, solve_fixed_point, trace_rows};
use crate::space::{check_axioms, estimate_min_s, Point};
use crate::witness::{run_pipeline, Budgets};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    CheckSpace,
    CheckPhi,
    CheckMap,
    Solve,
    Witness,
    Full,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckSpace => "check-space",
            Command::CheckPhi => "check-phi",
            Command::CheckMap => "check-map",
            Command::Solve => "solve",
            Command::Witness => "witness",
            Command::Full => "full",
        }
    }

    fn stages(self) -> Stages {
        let none = Stages::default();
        match self {
            Command::CheckSpace => Stages {
                axioms: true,
                ..none
            },
            Command::CheckPhi => Stages { phi: true, ..none },
            Command::CheckMap => Stages {
                contraction: true,
                ..none
            },
            Command::Solve => Stages {
                solve: true,
                uniqueness: true,
                ..none
            },
            Command::Witness => Stages {
                phi: true,
                contraction: true,
                solve: true,
                witness: true,
                ..none
            },
            Command::Full => Stages {
                axioms: true,
                phi: true,
                contraction: true,
                solve: true,
                uniqueness: true,
                witness: true,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Stages {
    axioms: bool,
    phi: bool,
    contraction: bool,
    solve: bool,
    uniqueness: bool,
    witness: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExecOptions {
    pub timing: bool,
}

/// Uniqueness starts: configured ones, or `x0` plus two points drawn from
/// the space sampler.
fn uniqueness_starts(config: &RunConfig) -> Vec<Point> {
    match &config.run.starts {
        Some(s) => s.clone(),
        None => {
            let mut rng = batch_rng(config.run.seed, u64::MAX - 1);
            let mut v = vec![config.run.x0.clone()];
            v.push(config.space.sample_point(&mut rng));
            v.push(config.space.sample_point(&mut rng));
            v
        }
    }
}

struct Recorder {
    verdict: Verdict,
    first_failure: Option<String>,
    diagnostics: Vec<Diagnostic>,
}

impl Recorder {
    fn fail(&mut self, stage: &str, message: String) {
        self.diagnostics.push(Diagnostic {
            stage: stage.into(),
            message,
        });
        if self.verdict != Verdict::Fail {
            self.verdict = Verdict::Fail;
            self.first_failure = Some(stage.into());
        }
    }

    fn inconclusive(&mut self, stage: &str, message: String) {
        self.diagnostics.push(Diagnostic {
            stage: stage.into(),
            message,
        });
        if self.verdict == Verdict::Pass {
            self.verdict = Verdict::Inconclusive;
            self.first_failure = Some(stage.into());
        }
    }

    fn error(&mut self, stage: &str, e: Error) {
        self.fail(stage, format!("error: {e}"));
    }

    fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

/// Run the stages of `command` on `config`. Stops at the first failing
/// hypothesis check; whatever was computed up to that point stays in the
/// report.
pub fn execute(config: &RunConfig, command: Command, opts: ExecOptions) -> Report {
    let started = Instant::now();
    let stages = command.stages();
    let run = &config.run;
    let tol = run.margin;
    let mut rec = Recorder {
        verdict: Verdict::Pass,
        first_failure: None,
        diagnostics: Vec::new(),
    };
    let mut report = Report {
        schema_version: SCHEMA_VERSION,
        command: command.name().into(),
        verdict: Verdict::Pass,
        first_failure: None,
        diagnostics: Vec::new(),
        config: config.to_raw(),
        axioms: None,
        phi: None,
        contraction: None,
        fixed_point: None,
        orbit_bounds: None,
        uniqueness: None,
        limit: None,
        witnesses: Vec::new(),
        timing: None,
        trace: Vec::new(),
    };

    'stages: {
        if stages.axioms {
            match check_axioms(&config.space, run.samples, run.seed, tol) {
                Ok(a) => {
                    if !a.passed() {
                        rec.fail(
                            "axioms",
                            format!(
                                "{} identity, {} symmetry, {} triangle violations; worst ratio {} vs s = {}",
                                a.identity_violations,
                                a.symmetry_violations,
                                a.triangle_violations,
                                a.worst_triangle_ratio,
                                a.s_declared
                            ),
                        );
                    }
                    report.axioms = Some(AxiomSection {
                        report: a,
                        estimated_min_s: estimate_min_s(&config.space, run.samples, run.seed).ok(),
                    });
                }
                Err(e) => rec.error("axioms", e),
            }
            if rec.failed() {
                break 'stages;
            }
        }

        if stages.phi {
            match check_phi_properties(&config.phi, &default_grid(), run.phi_tol, run.n_max, tol) {
                Ok(p) => {
                    if !p.passed() {
                        rec.fail(
                            "phi",
                            format!(
                                "{} monotonicity, {} below-identity violations, {} decay failures",
                                p.monotone_violations,
                                p.below_identity_violations,
                                p.decay_failures
                            ),
                        );
                    }
                    report.phi = Some(p);
                }
                Err(e) => rec.error("phi", e),
            }
            if rec.failed() {
                break 'stages;
            }
        }

        if stages.contraction {
            match check_contraction(
                &config.map,
                &config.phi,
                &config.space,
                run.contraction_pairs,
                run.seed,
                tol,
            ) {
                Ok(c) => {
                    if !c.passed() {
                        let pair = c
                            .witness_pair
                            .as_ref()
                            .map(|(x, y)| {
                                format!("; witness pair {:?} {:?}", x.coords(), y.coords())
                            })
                            .unwrap_or_default();
                        rec.fail("contraction", format!("{}{pair}", c.summary()));
                    }
                    report.contraction = Some(ContractionSection {
                        summary: c.summary(),
                        report: c,
                    });
                }
                Err(e) => rec.error("contraction", e),
            }
            if rec.failed() {
                break 'stages;
            }
        }

        let mut converged = false;
        if stages.solve {
            match solve_fixed_point(&config.map, &config.space, &run.x0, run.tol, run.max_iter) {
                Ok(f) => {
                    converged = f.converged;
                    if !f.converged {
                        rec.inconclusive(
                            "solve",
                            format!(
                                "no convergence within {} iterations; residual {}",
                                f.iterations, f.residual
                            ),
                        );
                    }
                    report.trace = trace_rows(&f);
                    if f.history.last_index() >= 1 {
                        match check_orbit_bounds(&f.history, &config.phi, tol) {
                            Ok(b) => {
                                if !b.passed() {
                                    rec.fail(
                                        "orbit_bounds",
                                        format!(
                                            "{} violations",
                                            b.succ_violations + b.block_violations
                                        ),
                                    );
                                }
                                report.orbit_bounds = Some(b);
                            }
                            Err(e) => rec.error("orbit_bounds", e),
                        }
                    }
                    report.fixed_point = Some(f);
                }
                Err(e) => rec.error("solve", e),
            }
            if rec.failed() {
                break 'stages;
            }
        }

        if stages.uniqueness {
            match check_uniqueness(
                &config.map,
                &config.space,
                &uniqueness_starts(config),
                run.tol,
                run.max_iter,
            ) {
                Ok(u) => {
                    match u.verdict {
                        Verdict::Fail => rec.fail(
                            "uniqueness",
                            format!(
                                "fixed points {} apart, agreement tol {}",
                                u.max_pairwise, u.agreement_tol
                            ),
                        ),
                        Verdict::Inconclusive => {
                            rec.inconclusive("uniqueness", "a start did not converge".into())
                        }
                        Verdict::Pass => {}
                    }
                    report.uniqueness = Some(u);
                }
                Err(e) => rec.error("uniqueness", e),
            }
            if rec.failed() {
                break 'stages;
            }
        }

        if stages.witness {
            if !converged {
                rec.inconclusive(
                    "witness",
                    "skipped: the fixed-point solve did not converge".into(),
                );
                break 'stages;
            }
            let budgets = Budgets {
                window: run.horizon,
                n_max: run.n_max,
                ball_samples: run.ball_samples,
                cauchy_pairs: run.cauchy_pairs,
                seed: run.seed,
                tol: run.tol,
                max_iter: run.max_iter,
                margin: tol,
                independent_start: uniqueness_starts(config).get(1).cloned(),
                precheck: None,
            };
            match run_pipeline(
                &config.map,
                &config.space,
                &config.phi,
                &run.x0,
                &run.epsilons,
                &budgets,
            ) {
                Ok(p) => {
                    match &p.limit {
                        Some(l) if !(l.limit_ok && l.uniqueness_ok) => rec.fail(
                            "limit",
                            format!(
                                "limit links ok={}, uniqueness decay ok={}",
                                l.limit_ok, l.uniqueness_ok
                            ),
                        ),
                        None => {
                            rec.inconclusive("limit", "independent solve did not converge".into())
                        }
                        _ => {}
                    }
                    for o in &p.outcomes {
                        if !o.passed() {
                            let eps = match o {
                                crate::witness::EpsilonOutcome::Completed(r) => r.witness.epsilon,
                                crate::witness::EpsilonOutcome::Aborted { epsilon, .. } => *epsilon,
                            };
                            rec.fail("witness", format!("epsilon {eps} did not pass"));
                        }
                    }
                    report.limit = p.limit;
                    report.witnesses = p.outcomes;
                }
                Err(e) => rec.error("witness", e),
            }
        }
    }

    report.verdict = rec.verdict;
    report.first_failure = rec.first_failure;
    report.diagnostics = rec.diagnostics;
    if opts.timing {
        report.timing = Some(Timing {
            elapsed_ms: started.elapsed().as_millis(),
        });
    }
    report
}
