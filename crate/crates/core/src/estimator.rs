//! The probabilistic gradient estimator and the loop that drives it.
//!
//! Each step moves `x ← x − ηg`, then flips a `p`-coin. Heads: `g` becomes a
//! fresh minibatch gradient of size `b` (the full gradient when `b = n`).
//! Tails: `g` is corrected by the average of `∇f_i(x_new) − ∇f_i(x_old)`
//! over `b'` sampled indices.
//!
//! Two gradient counters are kept. `grad_evals` counts oracle calls as they
//! happen (`b` per fresh batch, `2b'` per correction). `nominal_grad_evals`
//! charges `b'` per correction, the convention the complexity bounds use.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::Problem;
use crate::rng::{self, Streams, STREAM_OUTPUT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// A uniformly random iterate from `x⁰ … x^{T−1}`.
    UniformIterate,
    LastIterate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopRule {
    /// Run exactly `max_iters` steps.
    FixedIterations,
    /// Stop once the mean of the last `window` recorded `‖∇f‖` is `≤ ε`.
    GradNormWindow { window: usize },
    /// Stop once the mean of the last `window` recorded `f − f*` is `≤ ε`.
    FGapWindow { window: usize },
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule::GradNormWindow { window: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageConfig {
    pub eta: f64,
    pub b: usize,
    pub b_prime: usize,
    pub p: f64,
    pub seed: u64,
    pub max_iters: usize,
    pub target_eps: f64,
    pub output_mode: OutputMode,
    #[serde(default)]
    pub stop: StopRule,
    /// Compute `‖∇f‖`, `f − f*`, and `‖g − ∇f‖²` at every iterate. These
    /// oracle calls are not charged to either counter.
    #[serde(default = "default_true")]
    pub diagnostics: bool,
}

fn default_true() -> bool {
    true
}

impl PageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.b == 0 || self.b_prime == 0 {
            return Err(Error::config("batch sizes must be at least 1"));
        }
        if self.b_prime > self.b {
            return Err(Error::config(format!(
                "b' = {} exceeds b = {}",
                self.b_prime, self.b
            )));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::config(format!("p must lie in (0, 1], got {}", self.p)));
        }
        if !(self.target_eps > 0.0) {
            return Err(Error::config("target_eps must be positive"));
        }
        match self.stop {
            StopRule::GradNormWindow { window } | StopRule::FGapWindow { window }
                if window == 0 =>
            {
                Err(Error::config("stop window must be at least 1"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Full,
    Recursive,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Full => "full",
            Branch::Recursive => "recursive",
        }
    }
}

/// What happened at iterate `x^t`. The record for `t = 0` describes the
/// initial minibatch and is labelled [`Branch::Full`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub branch: Branch,
    pub grad_norm: Option<f64>,
    pub f_gap: Option<f64>,
    pub grad_evals_after: u64,
    pub nominal_grad_evals_after: u64,
    pub estimator_err_sq: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct PageState {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub t: usize,
    pub grad_evals: u64,
    pub nominal_grad_evals: u64,
    streams: Streams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub problem_id: String,
    pub config: PageConfig,
    pub records: Vec<StepRecord>,
    /// `t` of the returned iterate.
    pub output_index: usize,
    /// `t` at which the stop rule fired, if it did.
    pub stopped_at: Option<usize>,
}

impl Trace {
    /// Iterations performed.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.t)
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    /// Counters at the moment the stop rule fired.
    pub fn evals_at_stop(&self) -> Option<(u64, u64)> {
        let t = self.stopped_at?;
        self.records
            .iter()
            .find(|r| r.t == t)
            .map(|r| (r.nominal_grad_evals_after, r.grad_evals_after))
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: Trace,
    pub state: PageState,
}

/// Static parameters of one estimator update, split out so Monte-Carlo
/// checks can drive single updates from arbitrary points.
#[derive(Clone, Copy, Debug)]
pub struct UpdateParams {
    pub b: usize,
    pub b_prime: usize,
    pub p: f64,
}

/// Average of `b` sampled component gradients, or the full gradient when
/// `b = n`. Indices are drawn uniformly with replacement.
pub fn minibatch_grad(
    problem: &Problem,
    x: &[f64],
    b: usize,
    rng: &mut ChaCha8Rng,
    out: &mut [f64],
) {
    let n = problem.n();
    if b == n {
        problem.full_grad(x, out);
        return;
    }
    let mut tmp = vec![0.0; problem.dim()];
    out.fill(0.0);
    for _ in 0..b {
        let i = rng::index(rng, n);
        problem.component_grad(i, x, &mut tmp);
        linalg::axpy(1.0, &tmp, out);
    }
    let bf = b as f64;
    for v in out.iter_mut() {
        *v /= bf;
    }
}

/// One estimator update `g_prev → g_next` for the move `x_prev → x_next`.
pub fn next_estimate(
    problem: &Problem,
    params: UpdateParams,
    x_prev: &[f64],
    x_next: &[f64],
    g_prev: &[f64],
    streams: &mut Streams,
    g_next: &mut [f64],
) -> Branch {
    if rng::coin(&mut streams.coin, params.p) {
        minibatch_grad(problem, x_next, params.b, &mut streams.batch, g_next);
        return Branch::Full;
    }
    let d = problem.dim();
    let n = problem.n();
    let mut acc = vec![0.0; d];
    let mut gn = vec![0.0; d];
    let mut go = vec![0.0; d];
    for _ in 0..params.b_prime {
        let i = rng::index(&mut streams.batch_prime, n);
        problem.component_grad(i, x_next, &mut gn);
        problem.component_grad(i, x_prev, &mut go);
        for k in 0..d {
            acc[k] += gn[k] - go[k];
        }
    }
    let bp = params.b_prime as f64;
    for k in 0..d {
        g_next[k] = g_prev[k] + acc[k] / bp;
    }
    Branch::Recursive
}

fn check_batch(problem: &Problem, config: &PageConfig) -> Result<()> {
    if config.b > problem.n() && !problem.is_online() {
        return Err(Error::config(format!(
            "b = {} exceeds n = {} on a finite-sum problem",
            config.b,
            problem.n()
        )));
    }
    Ok(())
}

fn record(
    problem: &Problem,
    config: &PageConfig,
    state: &PageState,
    branch: Branch,
) -> StepRecord {
    let (grad_norm, f_gap, err) = if config.diagnostics {
        let full = problem.grad(&state.x);
        let gap = problem
            .constants
            .f_star
            .map(|fs| problem.value(&state.x) - fs);
        (
            Some(linalg::norm(&full)),
            gap,
            Some(linalg::dist_sq(&state.g, &full)),
        )
    } else {
        (None, None, None)
    };
    StepRecord {
        t: state.t,
        branch,
        grad_norm,
        f_gap,
        grad_evals_after: state.grad_evals,
        nominal_grad_evals_after: state.nominal_grad_evals,
        estimator_err_sq: err,
    }
}

/// `x⁰` from the problem and `g⁰` from a size-`b` minibatch.
pub fn init_state(problem: &Problem, config: &PageConfig) -> Result<PageState> {
    config.validate()?;
    check_batch(problem, config)?;
    let mut streams = Streams::from_seed(config.seed);
    let x = problem.x0().to_vec();
    let mut g = vec![0.0; problem.dim()];
    minibatch_grad(problem, &x, config.b, &mut streams.batch, &mut g);
    if !linalg::all_finite(&g) {
        return Err(Error::Divergence { t: 0, partial: None });
    }
    Ok(PageState {
        x,
        g,
        t: 0,
        grad_evals: config.b as u64,
        nominal_grad_evals: config.b as u64,
        streams,
    })
}

/// Advances `state` by one iteration and describes the new iterate.
pub fn step(state: &mut PageState, problem: &Problem, config: &PageConfig) -> Result<StepRecord> {
    if state.t >= config.max_iters {
        return Err(Error::Usage(format!(
            "step called at t = {} with max_iters = {}",
            state.t, config.max_iters
        )));
    }
    let x_next: Vec<f64> = state
        .x
        .iter()
        .zip(&state.g)
        .map(|(x, g)| x - config.eta * g)
        .collect();
    let mut g_next = vec![0.0; problem.dim()];
    let params = UpdateParams {
        b: config.b,
        b_prime: config.b_prime,
        p: config.p,
    };
    let branch = next_estimate(
        problem,
        params,
        &state.x,
        &x_next,
        &state.g,
        &mut state.streams,
        &mut g_next,
    );
    if !linalg::all_finite(&x_next) || !linalg::all_finite(&g_next) {
        return Err(Error::Divergence {
            t: state.t + 1,
            partial: None,
        });
    }
    match branch {
        Branch::Full => {
            state.grad_evals += config.b as u64;
            state.nominal_grad_evals += config.b as u64;
        }
        Branch::Recursive => {
            state.grad_evals += 2 * config.b_prime as u64;
            state.nominal_grad_evals += config.b_prime as u64;
        }
    }
    state.x = x_next;
    state.g = g_next;
    state.t += 1;
    Ok(record(problem, config, state, branch))
}

fn window_mean(records: &[StepRecord], window: usize, pick: fn(&StepRecord) -> Option<f64>) -> Option<f64> {
    if records.len() < window {
        return None;
    }
    let tail = &records[records.len() - window..];
    let mut sum = 0.0;
    for r in tail {
        sum += pick(r)?;
    }
    Some(sum / window as f64)
}

fn should_stop(records: &[StepRecord], config: &PageConfig) -> bool {
    let m = match config.stop {
        StopRule::FixedIterations => return false,
        StopRule::GradNormWindow { window } => window_mean(records, window, |r| r.grad_norm),
        StopRule::FGapWindow { window } => window_mean(records, window, |r| r.f_gap),
    };
    m.is_some_and(|m| m <= config.target_eps)
}

/// Picks the reported iterate: uniform over `0..T` (or `0` when `T = 0`),
/// or `T` itself.
pub fn select_output(trace: &Trace, mode: OutputMode, rng: &mut ChaCha8Rng) -> Result<usize> {
    let last = trace
        .records
        .last()
        .ok_or_else(|| Error::Usage("cannot select an output from an empty trace".into()))?;
    let t = last.t;
    Ok(match mode {
        OutputMode::LastIterate => t,
        OutputMode::UniformIterate if t == 0 => 0,
        OutputMode::UniformIterate => rng::index(rng, t),
    })
}

/// Runs until the stop rule fires or `max_iters` steps are done.
pub fn run(problem: &Problem, config: &PageConfig) -> Result<RunOutcome> {
    let mut state = init_state(problem, config)?;
    let mut trace = Trace {
        problem_id: problem.id().to_string(),
        config: config.clone(),
        records: vec![record(problem, config, &state, Branch::Full)],
        output_index: 0,
        stopped_at: None,
    };
    if should_stop(&trace.records, config) {
        trace.stopped_at = Some(0);
    }
    while trace.stopped_at.is_none() && state.t < config.max_iters {
        match step(&mut state, problem, config) {
            Ok(rec) => trace.records.push(rec),
            Err(Error::Divergence { t, .. }) => {
                return Err(Error::Divergence {
                    t,
                    partial: Some(Box::new(trace)),
                })
            }
            Err(e) => return Err(e),
        }
        if should_stop(&trace.records, config) {
            trace.stopped_at = Some(state.t);
        }
    }
    let mut out_rng = rng::stream(config.seed, STREAM_OUTPUT);
    trace.output_index = select_output(&trace, config.output_mode, &mut out_rng)?;
    Ok(RunOutcome { trace, state })
}

/// Recomputes `x^t` by replaying the run with the same seed.
pub fn iterate_at(problem: &Problem, config: &PageConfig, t: usize) -> Result<Vec<f64>> {
    if t > config.max_iters {
        return Err(Error::Usage(format!("t = {t} is past max_iters")));
    }
    let mut state = init_state(problem, config)?;
    while state.t < t {
        step(&mut state, problem, config)?;
    }
    Ok(state.x)
}
