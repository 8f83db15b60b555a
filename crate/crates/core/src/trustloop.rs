//! Trust-region iteration on forward-FD linear surrogates.
//!
//! Each trial solves the surrogate subproblem at the current radius, evaluates
//! the candidate, and compares the actual objective change with the predicted
//! one. Accepted candidates become the new center and trigger a fresh
//! Jacobian; rejected candidates keep the existing model and only shrink the
//! radius.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cache::{EvalCache, Lookup};
use crate::error::{Error, Result};
use crate::evaluator::Evaluator;
use crate::objective::objective_minmax;
use crate::perturb::{
    fd_jacobian_with_probes, resolve_steps, JacobianBuild, PerturbationScheme, StepVector,
};
use crate::surrogate::{solve_tr_subproblem, LinearModel, NormMode, SubproblemSpec};
use crate::types::{Bounds, DesignVector, ResponseCurve};

/// Predicted changes smaller than this are treated as no prediction at all.
pub const DEGENERATE_PREDICTION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustConfig {
    /// Shrink factor applied to the step length. Default 0.25.
    pub alpha1: f64,
    /// Growth factor applied to the step length. Default 2.5.
    pub alpha2: f64,
    /// Below this gain ratio the radius shrinks. Default 0.05.
    pub rho_low: f64,
    /// Above this gain ratio the radius may grow. Default 0.9.
    pub rho_high: f64,
    /// Initial radius. Default 1.
    pub delta0: f64,
    /// Radius / accepted-step termination threshold. Default 1e-2.
    pub term_eps: f64,
    /// Distinct-evaluation budget; `None` means `200 * (D + 1)`.
    pub max_evals: Option<usize>,
    pub norm: NormMode,
    pub scheme: PerturbationScheme,
}

impl Default for TrustConfig {
    fn default() -> Self {
        Self {
            alpha1: 0.25,
            alpha2: 2.5,
            rho_low: 0.05,
            rho_high: 0.9,
            delta0: 1.0,
            term_eps: 1e-2,
            max_evals: None,
            norm: NormMode::Euclidean,
            scheme: PerturbationScheme::FractionOfInitial(0.03),
        }
    }
}

impl TrustConfig {
    pub fn with_scheme(scheme: PerturbationScheme) -> Self {
        Self {
            scheme,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.alpha1 && self.alpha1 < 1.0 && 1.0 < self.alpha2 && self.alpha2.is_finite())
        {
            return Err(Error::config("need 0 < alpha1 < 1 < alpha2"));
        }
        if !(0.0 < self.rho_low && self.rho_low < self.rho_high && self.rho_high < 1.0) {
            return Err(Error::config("need 0 < rho_low < rho_high < 1"));
        }
        if !(self.delta0.is_finite() && self.delta0 > 0.0) {
            return Err(Error::config("delta0 must be positive"));
        }
        if !(self.term_eps.is_finite() && self.term_eps > 0.0) {
            return Err(Error::config("term_eps must be positive"));
        }
        if self.max_evals == Some(0) {
            return Err(Error::config("max_evals must be positive"));
        }
        self.scheme.validate()
    }

    pub fn budget(&self, dim: usize) -> usize {
        self.max_evals.unwrap_or(200 * (dim + 1))
    }
}

/// `(u_new - u_old) / (g_new - g_old)`; 0 when the predicted change is
/// below [`DEGENERATE_PREDICTION`].
pub fn gain_ratio(u_new: f64, u_old: f64, g_new: f64, g_old: f64) -> f64 {
    let predicted = g_new - g_old;
    if predicted.abs() < DEGENERATE_PREDICTION {
        return 0.0;
    }
    (u_new - u_old) / predicted
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
}

/// Accept only for a strictly positive gain ratio.
pub fn accept_or_reject(rho: f64) -> Decision {
    if rho > 0.0 {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

pub fn update_radius(rho: f64, step_norm: f64, delta: f64, cfg: &TrustConfig) -> f64 {
    if rho < cfg.rho_low {
        let shrunk = cfg.alpha1 * step_norm;
        if shrunk > 0.0 {
            shrunk
        } else {
            cfg.alpha1 * delta
        }
    } else if rho > cfg.rho_high {
        (cfg.alpha2 * step_norm).max(delta)
    } else {
        delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Updated radius fell below `term_eps`.
    Radius,
    /// Last accepted step was shorter than `term_eps`.
    Step,
    /// Distinct-evaluation budget exhausted.
    Budget,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Radius => "radius",
            Termination::Step => "step",
            Termination::Budget => "budget",
        })
    }
}

/// Iteration state after a trial.
#[derive(Debug, Clone)]
pub struct TrustState {
    pub iteration: usize,
    pub center: DesignVector,
    pub center_response: ResponseCurve,
    pub objective: f64,
    /// Radius for the next trial.
    pub radius: f64,
    pub model: LinearModel,
    pub last_step_norm: Option<f64>,
    pub last_rho: Option<f64>,
    pub last_accepted: bool,
    pub evaluations: usize,
}

pub fn should_terminate(state: &TrustState, cfg: &TrustConfig) -> Option<Termination> {
    if state.radius < cfg.term_eps {
        return Some(Termination::Radius);
    }
    if state.last_accepted && state.last_step_norm.is_some_and(|s| s < cfg.term_eps) {
        return Some(Termination::Step);
    }
    if state.evaluations >= cfg.budget(state.center.dim()) {
        return Some(Termination::Budget);
    }
    None
}

/// One candidate trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub candidate: DesignVector,
    pub accepted: bool,
    pub rho: f64,
    /// Radius after the update.
    pub delta: f64,
    pub step_norm: f64,
    /// Objective of the candidate.
    pub objective_db: f64,
    /// Surrogate objective at the candidate.
    pub predicted_db: f64,
    pub cum_evals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalKind {
    Center,
    Probe,
    Candidate,
}

/// Every design requested from the cache, in request order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub design: DesignVector,
    pub kind: EvalKind,
    pub cache_hit: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub best: DesignVector,
    pub best_objective: f64,
    pub best_response: ResponseCurve,
    pub initial_objective: f64,
    pub evaluations: usize,
    pub jacobian_builds: usize,
    pub steps: StepVector,
    pub trace: Vec<TraceRow>,
    pub eval_log: Vec<EvalRecord>,
    pub termination: Termination,
}

impl RunResult {
    pub fn accepted_iterations(&self) -> usize {
        self.trace.iter().filter(|r| r.accepted).count()
    }
}

/// A run that stopped on an error; the trace up to the failure is kept.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: Error,
    pub trace: Vec<TraceRow>,
    pub eval_log: Vec<EvalRecord>,
    pub evaluations: usize,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (after {} trials, {} evaluations)",
            self.error,
            self.trace.len(),
            self.evaluations
        )
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

struct Recorder {
    cache: EvalCache,
    trace: Vec<TraceRow>,
    log: Vec<EvalRecord>,
}

impl Recorder {
    fn fail(self, error: Error) -> RunFailure {
        RunFailure {
            error,
            evaluations: self.cache.evaluations(),
            trace: self.trace,
            eval_log: self.log,
        }
    }

    fn note(&mut self, design: &DesignVector, kind: EvalKind, lookup: Lookup) {
        self.log.push(EvalRecord {
            design: design.clone(),
            kind,
            cache_hit: lookup == Lookup::Hit,
        });
    }

    fn jacobian<E: Evaluator + ?Sized>(
        &mut self,
        ev: &E,
        x: &DesignVector,
        steps: &StepVector,
        bounds: &Bounds,
    ) -> Result<LinearModel> {
        // The center is always logged already, as the start point or as the
        // accepted candidate.
        let JacobianBuild { model, probes, .. } =
            fd_jacobian_with_probes(&self.cache, ev, x, steps, bounds)?;
        for p in &probes {
            self.note(&p.design, EvalKind::Probe, p.lookup);
        }
        Ok(model)
    }
}

/// Runs the trust-region loop from `x0`. All evaluations go through one
/// private [`EvalCache`]; the returned evaluation count is its counter.
pub fn optimize<E: Evaluator + ?Sized>(
    ev: &E,
    x0: &DesignVector,
    bounds: &Bounds,
    cfg: &TrustConfig,
) -> std::result::Result<RunResult, RunFailure> {
    let mut rec = Recorder {
        cache: EvalCache::new(),
        trace: Vec::new(),
        log: Vec::new(),
    };
    match run(ev, x0, bounds, cfg, &mut rec) {
        Ok(parts) => Ok(parts.finish(rec)),
        Err(e) => Err(rec.fail(e)),
    }
}

struct Finished {
    state: TrustState,
    initial_objective: f64,
    jacobian_builds: usize,
    steps: StepVector,
    termination: Termination,
}

impl Finished {
    fn finish(self, rec: Recorder) -> RunResult {
        RunResult {
            best: self.state.center,
            best_objective: self.state.objective,
            best_response: self.state.center_response,
            initial_objective: self.initial_objective,
            evaluations: rec.cache.evaluations(),
            jacobian_builds: self.jacobian_builds,
            steps: self.steps,
            trace: rec.trace,
            eval_log: rec.log,
            termination: self.termination,
        }
    }
}

fn run<E: Evaluator + ?Sized>(
    ev: &E,
    x0: &DesignVector,
    bounds: &Bounds,
    cfg: &TrustConfig,
    rec: &mut Recorder,
) -> Result<Finished> {
    cfg.validate()?;
    bounds.check_dim(x0.dim())?;
    if ev.dimension() != x0.dim() {
        return Err(Error::DimensionMismatch {
            expected: ev.dimension(),
            actual: x0.dim(),
        });
    }
    if !bounds.contains(x0) {
        return Err(Error::config("initial design lies outside the bounds"));
    }
    let sweep = ev.sweep();
    let steps = resolve_steps(&cfg.scheme, x0)?;

    let (r0, lookup) = rec.cache.evaluate(ev, x0)?;
    rec.note(x0, EvalKind::Center, lookup);
    let initial_objective = objective_minmax(&r0, sweep)?;
    let model = rec.jacobian(ev, x0, &steps, bounds)?;
    let mut jacobian_builds = 1;

    let mut state = TrustState {
        iteration: 0,
        center: x0.clone(),
        center_response: (*r0).clone(),
        objective: initial_objective,
        radius: cfg.delta0,
        model,
        last_step_norm: None,
        last_rho: None,
        last_accepted: false,
        evaluations: rec.cache.evaluations(),
    };
    if let Some(termination) = should_terminate(&state, cfg) {
        return Ok(Finished {
            state,
            initial_objective,
            jacobian_builds,
            steps,
            termination,
        });
    }

    loop {
        let spec = SubproblemSpec {
            model: &state.model,
            bounds,
            radius: state.radius,
            norm: cfg.norm,
            sweep,
        };
        let candidate = solve_tr_subproblem(&spec)?;
        let g_old = spec.model_objective(&state.center);
        let g_new = spec.model_objective(&candidate);

        let (response, lookup) = rec.cache.evaluate(ev, &candidate)?;
        rec.note(&candidate, EvalKind::Candidate, lookup);
        let u_new = objective_minmax(&response, sweep)?;

        let rho = gain_ratio(u_new, state.objective, g_new, g_old);
        let step_norm = cfg.norm.distance(bounds, &candidate, &state.center);
        let accepted = accept_or_reject(rho) == Decision::Accept;
        let radius = update_radius(rho, step_norm, state.radius, cfg);

        rec.trace.push(TraceRow {
            iter: state.iteration,
            candidate: candidate.clone(),
            accepted,
            rho,
            delta: radius,
            step_norm,
            objective_db: u_new,
            predicted_db: g_new,
            cum_evals: rec.cache.evaluations(),
        });

        state.iteration += 1;
        state.radius = radius;
        state.last_rho = Some(rho);
        state.last_accepted = accepted;
        state.last_step_norm = Some(step_norm);
        state.evaluations = rec.cache.evaluations();
        if accepted {
            state.center = candidate;
            state.center_response = (*response).clone();
            state.objective = u_new;
        }

        if let Some(termination) = should_terminate(&state, cfg) {
            return Ok(Finished {
                state,
                initial_objective,
                jacobian_builds,
                steps,
                termination,
            });
        }
        if accepted {
            state.model = rec.jacobian(ev, &state.center, &steps, bounds)?;
            jacobian_builds += 1;
            state.evaluations = rec.cache.evaluations();
        }
    }
}

pub const TRACE_HEADER: &str = "iter,accepted,rho,delta,step_norm,objective_db,cum_evals";

/// One row per candidate trial.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.iter,
            u8::from(r.accepted),
            r.rho,
            r.delta,
            r.step_norm,
            r.objective_db,
            r.cum_evals
        )?;
    }
    Ok(())
}
