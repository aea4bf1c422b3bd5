//! Numerical checks of the inequalities the convergence analysis rests on.
//!
//! Every check returns a [`CheckReport`]. One-sided checks pass when
//! `observed ≤ bound + slack`. Monte-Carlo checks give each trial its own
//! random streams and sum the trial results in trial order, so a report is
//! reproducible bit-for-bit from its seed regardless of thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{self, next_estimate, PageConfig, StopRule, Trace, UpdateParams};
use crate::linalg::{self, mean_and_std_err};
use crate::problems::Problem;
use crate::rng::Streams;
use crate::theory::{self, estimate, GridSpec, Plan, SampleSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The check ran but cannot resolve the inequality (too few trials, or
    /// the test point lies outside the region the constants were declared
    /// for). Counts as a pass with a warning.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub status: CheckStatus,
    pub passed: bool,
    pub observed: f64,
    pub bound: f64,
    pub slack: f64,
    pub trials: u64,
    pub std_err: Option<f64>,
    pub detail: Option<String>,
}

impl CheckReport {
    pub fn one_sided(name: impl Into<String>, observed: f64, bound: f64, slack: f64) -> Self {
        let passed = observed <= bound + slack;
        Self {
            name: name.into(),
            status: if passed {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            passed,
            observed,
            bound,
            slack,
            trials: 1,
            std_err: None,
            detail: None,
        }
    }

    fn trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self
    }

    fn std_err(mut self, se: f64) -> Self {
        self.std_err = Some(se);
        self
    }

    fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    fn inconclusive(mut self, why: &str) -> Self {
        self.status = CheckStatus::Inconclusive;
        self.passed = true;
        let d = match self.detail.take() {
            Some(d) => format!("{d}; inconclusive: {why}"),
            None => format!("inconclusive: {why}"),
        };
        self.detail = Some(d);
        self
    }

    fn failed(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::Fail,
            passed: false,
            observed: f64::NAN,
            bound: f64::NAN,
            slack: 0.0,
            trials: 0,
            std_err: None,
            detail: Some(detail.into()),
        }
    }

    /// Inconclusive reports count as passes.
    pub fn is_ok(&self) -> bool {
        self.status != CheckStatus::Fail
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("reports always serialize")
    }
}

fn declared_l(problem: &Problem) -> Result<f64> {
    problem.constants.l.ok_or_else(|| {
        Error::Unsupported(format!("{} declares no smoothness constant", problem.id()))
    })
}

fn declared_f_star(problem: &Problem) -> Result<f64> {
    problem.constants.f_star.ok_or_else(|| {
        Error::Unsupported(format!("{} has no known optimal value", problem.id()))
    })
}

fn check_point(problem: &Problem, x: &[f64]) -> Result<()> {
    if x.len() != problem.dim() {
        return Err(Error::config(format!(
            "point has dimension {}, problem has {}",
            x.len(),
            problem.dim()
        )));
    }
    Ok(())
}

/// Central finite differences of `f` against `∇f`, coordinate-wise.
/// `observed = ‖fd − ∇f(x)‖_∞ / max(‖∇f(x)‖_∞, 1)`, bound `10⁻⁵`.
pub fn check_grad_fd(problem: &Problem, x: &[f64], h: f64) -> Result<CheckReport> {
    check_point(problem, x)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::config("finite-difference step must be positive"));
    }
    let g = problem.grad(x);
    let mut xp = x.to_vec();
    let mut worst: f64 = 0.0;
    for k in 0..x.len() {
        xp[k] = x[k] + h;
        let fp = problem.value(&xp);
        xp[k] = x[k] - h;
        let fm = problem.value(&xp);
        xp[k] = x[k];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Divergence { t: 0, partial: None });
        }
        worst = worst.max(((fp - fm) / (2.0 * h) - g[k]).abs());
    }
    let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Ok(CheckReport::one_sided("grad_fd", worst / scale, 1e-5, 0.0).trials(x.len() as u64))
}

/// `∇f(x)` against the average of the component gradients.
pub fn check_full_grad_consistency(problem: &Problem, x: &[f64]) -> Result<CheckReport> {
    check_point(problem, x)?;
    let fast = problem.grad(x);
    let mut slow = vec![0.0; problem.dim()];
    let mut tmp = vec![0.0; problem.dim()];
    for i in 0..problem.n() {
        problem.component_grad(i, x, &mut tmp);
        linalg::axpy(1.0, &tmp, &mut slow);
    }
    let n = problem.n() as f64;
    let mut worst: f64 = 0.0;
    for (a, b) in fast.iter().zip(&slow) {
        worst = worst.max((a - b / n).abs());
    }
    let scale = fast.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Ok(CheckReport::one_sided("full_grad_consistency", worst / scale, 1e-12, 0.0)
        .trials(problem.n() as u64))
}

/// Both sides of
/// `f(x − ηg) ≤ f(x) − (η/2)‖∇f(x)‖² − (1/(2η) − L/2)‖ηg‖² + (η/2)‖g − ∇f(x)‖²`
/// with the declared `L`. Rounding slack is `10⁻¹⁰·max(|RHS|, |f(x)|)`.
pub fn check_descent_lemma(
    problem: &Problem,
    x: &[f64],
    g: &[f64],
    eta: f64,
) -> Result<CheckReport> {
    let l = declared_l(problem)?;
    check_point(problem, x)?;
    check_point(problem, g)?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::config("eta must be positive"));
    }
    let x_next: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - eta * b).collect();
    let fx = problem.value(x);
    let grad = problem.grad(x);
    let lhs = problem.value(&x_next);
    let rhs = fx - 0.5 * eta * linalg::norm_sq(&grad)
        - (0.5 / eta - 0.5 * l) * linalg::dist_sq(&x_next, x)
        + 0.5 * eta * linalg::dist_sq(g, &grad);
    if !lhs.is_finite() || !rhs.is_finite() {
        return Err(Error::Divergence { t: 1, partial: None });
    }
    let slack = 1e-10 * rhs.abs().max(fx.abs());
    Ok(CheckReport::one_sided("descent_lemma", lhs, rhs, slack))
}

/// One estimator update from a fixed `(x^t, g^t)` to a fixed `x^{t+1}`.
#[derive(Clone, Debug)]
pub struct RecursionSetup<'a> {
    pub x_t: &'a [f64],
    pub x_t1: &'a [f64],
    pub g_t: &'a [f64],
    pub p: f64,
    /// Fresh-batch size; `None` means `b = n`.
    pub b: Option<usize>,
    pub b_prime: usize,
    pub trials: u64,
    pub seed: u64,
}

/// Minimum trial count for a Monte-Carlo verdict.
pub const MIN_TRIALS: u64 = 1000;

/// Monte-Carlo mean of `‖g^{t+1} − ∇f(x^{t+1})‖²` against
/// `(1−p)L²/b'·‖x^{t+1} − x^t‖² + (1−p)‖g^t − ∇f(x^t)‖² + 1_{b<n}·pσ²/b`.
/// Passes if the mean is at most the bound plus three standard errors.
pub fn check_variance_recursion(problem: &Problem, s: &RecursionSetup<'_>) -> Result<CheckReport> {
    let l = declared_l(problem)?;
    for v in [s.x_t, s.x_t1, s.g_t] {
        check_point(problem, v)?;
    }
    if !(s.p > 0.0 && s.p <= 1.0) {
        return Err(Error::config("p must lie in (0, 1]"));
    }
    if s.b_prime == 0 {
        return Err(Error::config("b' must be at least 1"));
    }
    let n = problem.n();
    let b = s.b.unwrap_or(n);
    if b == 0 {
        return Err(Error::config("b must be at least 1"));
    }
    if b != n && !problem.is_online() {
        return Err(Error::config(
            "finite-sum recursion check needs b = n; use a stream view for minibatches",
        ));
    }
    let params = UpdateParams {
        b,
        b_prime: s.b_prime,
        p: s.p,
    };
    let grad_t = problem.grad(s.x_t);
    let grad_t1 = problem.grad(s.x_t1);
    let errs: Vec<f64> = (0..s.trials)
        .into_par_iter()
        .map(|trial| {
            let mut streams = Streams::for_trial(s.seed, trial);
            let mut g_next = vec![0.0; problem.dim()];
            next_estimate(problem, params, s.x_t, s.x_t1, s.g_t, &mut streams, &mut g_next);
            linalg::dist_sq(&g_next, &grad_t1)
        })
        .collect();
    let (mean, se) = if errs.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        mean_and_std_err(&errs)
    };

    let q = 1.0 - s.p;
    let mut bound = q * l * l / s.b_prime as f64 * linalg::dist_sq(s.x_t1, s.x_t)
        + q * linalg::dist_sq(s.g_t, &grad_t);
    let mut outside = false;
    if b < n {
        let sigma = problem.constants.sigma.ok_or_else(|| {
            Error::Unsupported("minibatch recursion check needs a declared sigma".into())
        })?;
        bound += s.p * sigma * sigma / b as f64;
        outside = problem.gradient_variance(s.x_t1) > sigma * sigma;
    }
    let slack = 3.0 * se + 1e-12 * bound.abs();
    let mut report = CheckReport::one_sided("variance_recursion", mean, bound, slack)
        .trials(s.trials)
        .std_err(se);
    if s.trials < MIN_TRIALS {
        report = report.inconclusive(&format!("{} trials is below {MIN_TRIALS}", s.trials));
    } else if outside && !report.passed {
        report = report.inconclusive("variance at x^{t+1} exceeds the declared sigma");
    }
    Ok(report)
}

/// `μ` against the smallest `‖∇f(x)‖²/(2(f(x) − f*))` on the grid; passes
/// when no admissible grid point violates the PL inequality (up to a
/// `10⁻¹²` relative rounding allowance).
pub fn check_pl_constant(problem: &Problem, mu: f64, grid: &GridSpec) -> Result<CheckReport> {
    let ratios = estimate::pl_ratios(problem, grid)?;
    if ratios.is_empty() {
        return Err(Error::Estimation(
            "no grid point is far enough from the minimum".into(),
        ));
    }
    let (min, argmin) = ratios
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(r, x)| (*r, x.clone()))
        .expect("nonempty");
    let slack = 1e-12 * mu;
    let violations = ratios.iter().filter(|r| r.0 + slack < mu).count();
    Ok(CheckReport::one_sided("pl_constant", mu, min, slack)
        .trials(ratios.len() as u64)
        .detail(format!("{violations} violating points; smallest ratio at {argmin:?}")))
}

fn plan_config(plan: &Plan, seed: u64, iters: usize) -> PageConfig {
    let mut c = plan.page_config(seed, 1.0, None);
    c.max_iters = iters;
    c.stop = StopRule::FixedIterations;
    c.diagnostics = true;
    c
}

fn check_plan_stepsize(problem: &Problem, plan: &Plan, use_mu: bool) -> Result<f64> {
    let l = declared_l(problem)?;
    let mu = if use_mu { problem.constants.mu } else { None };
    if !theory::satisfies_stepsize_bound(plan.eta, plan.p, plan.b_prime, l, mu) {
        return Err(Error::config(format!(
            "plan stepsize {} violates the bound for L = {l}",
            plan.eta
        )));
    }
    Ok(l)
}

/// Runs every seed; the first divergence is reported as `Err((seed, t))`.
fn run_seeds(
    problem: &Problem,
    plan: &Plan,
    seeds: &[u64],
    iters: usize,
) -> std::result::Result<Vec<Trace>, (u64, usize)> {
    let results: Vec<(u64, Result<Trace>)> = seeds
        .par_iter()
        .map(|&seed| {
            let c = plan_config(plan, seed, iters);
            (seed, estimator::run(problem, &c).map(|o| o.trace))
        })
        .collect();
    let mut traces = Vec::with_capacity(seeds.len());
    for (seed, r) in results {
        match r {
            Ok(t) => traces.push(t),
            Err(Error::Divergence { t, .. }) => return Err((seed, t)),
            Err(e) => panic!("run with a validated plan failed: {e}"),
        }
    }
    Ok(traces)
}

/// Extra drift per step from fresh minibatches smaller than `n`:
/// `ησ²/(2b)`.
fn minibatch_drift(problem: &Problem, plan: &Plan) -> Result<f64> {
    if plan.b >= problem.n() {
        return Ok(0.0);
    }
    let sigma = problem.constants.sigma.ok_or_else(|| {
        Error::Unsupported("minibatch plans need a declared sigma".into())
    })?;
    Ok(plan.eta * sigma * sigma / (2.0 * plan.b as f64))
}

/// Seed-averaged one-step descent of
/// `Φ_t = f(x^t) − f* + (η/(2p))‖g^t − ∇f(x^t)‖²`:
/// `E[Φ_{t+1} − Φ_t + (η/2)‖∇f(x^t)‖²] ≤ 1_{b<n}·ησ²/(2b)` at every
/// `t < horizon`, within three standard errors of the paired differences.
pub fn check_lyapunov_descent(
    problem: &Problem,
    plan: &Plan,
    seeds: &[u64],
    horizon: usize,
) -> Result<CheckReport> {
    let f_star = declared_f_star(problem)?;
    check_plan_stepsize(problem, plan, false)?;
    if seeds.is_empty() {
        return Err(Error::config("no seeds given"));
    }
    let drift = minibatch_drift(problem, plan)?;
    let traces = match run_seeds(problem, plan, seeds, horizon) {
        Ok(t) => t,
        Err((seed, t)) => {
            return Ok(CheckReport::failed(
                "lyapunov_descent",
                format!("seed {seed} diverged at t = {t}"),
            ))
        }
    };
    let w = plan.eta / (2.0 * plan.p);
    let phi = |tr: &Trace, t: usize| {
        let r = &tr.records[t];
        r.f_gap.expect("f* known") + w * r.estimator_err_sq.expect("diagnostics on")
    };
    let mut worst: Option<(usize, f64, f64, f64)> = None;
    for t in 0..horizon {
        let diffs: Vec<f64> = traces
            .iter()
            .map(|tr| {
                let g = tr.records[t].grad_norm.expect("diagnostics on");
                phi(tr, t + 1) - phi(tr, t) + 0.5 * plan.eta * g * g - drift
            })
            .collect();
        let (m, se) = mean_and_std_err(&diffs);
        // f(x) − f* loses absolute precision on the order of |f*|·ε_mach.
        let scale = f_star.abs()
            + linalg::mean(&traces.iter().map(|tr| phi(tr, t).abs()).collect::<Vec<_>>());
        let slack = 3.0 * se + 1e-12 * scale;
        if worst.is_none_or(|(_, wm, _, ws)| m - slack > wm - ws) {
            worst = Some((t, m, se, slack));
        }
    }
    let Some((t, m, se, slack)) = worst else {
        return Ok(CheckReport::one_sided("lyapunov_descent", 0.0, 0.0, 0.0)
            .trials(seeds.len() as u64)
            .detail("empty horizon"));
    };
    Ok(CheckReport::one_sided("lyapunov_descent", m, 0.0, slack)
        .trials(seeds.len() as u64)
        .std_err(se)
        .detail(format!("tightest step t = {t}")))
}

/// Seed-averaged `f(x^T) − f*` against `(1−μη)^T·Φ₀`, plus the stationary
/// minibatch term when `b < n`, within three standard errors. `iters`
/// defaults to the plan's `T`.
pub fn check_pl_rate(
    problem: &Problem,
    plan: &Plan,
    seeds: &[u64],
    iters: Option<usize>,
) -> Result<CheckReport> {
    let f_star = declared_f_star(problem)?;
    let mu = problem
        .constants
        .mu
        .ok_or_else(|| Error::Unsupported(format!("{} declares no PL constant", problem.id())))?;
    check_plan_stepsize(problem, plan, true)?;
    if seeds.is_empty() {
        return Err(Error::config("no seeds given"));
    }
    let t = iters.unwrap_or_else(|| usize::try_from(plan.t).unwrap_or(usize::MAX));
    let delta0 = problem.delta0().expect("f* known");
    let rate = (1.0 - mu * plan.eta).powi(i32::try_from(t).unwrap_or(i32::MAX));
    let mut bound = rate * delta0;
    if plan.b < problem.n() {
        let sigma = problem.constants.sigma.ok_or_else(|| {
            Error::Unsupported("minibatch plans need a declared sigma".into())
        })?;
        let s2b = sigma * sigma / plan.b as f64;
        // Φ₀ carries the initial minibatch error; each step adds ησ²/(2b).
        bound += rate * plan.eta / (2.0 * plan.p) * s2b + (1.0 - rate) * s2b / (2.0 * mu);
    }
    let traces = match run_seeds(problem, plan, seeds, t) {
        Ok(tr) => tr,
        Err((seed, t)) => {
            return Ok(CheckReport::failed(
                "pl_rate",
                format!("seed {seed} diverged at t = {t}"),
            ))
        }
    };
    let gaps: Vec<f64> = traces
        .iter()
        .map(|tr| tr.records[t].f_gap.expect("f* known"))
        .collect();
    let (m, se) = mean_and_std_err(&gaps);
    Ok(CheckReport::one_sided("pl_rate", m, bound, 3.0 * se + 1e-12 * (delta0 + f_star.abs()))
        .trials(seeds.len() as u64)
        .std_err(se)
        .detail(format!("T = {t}, (1 - mu*eta)^T = {rate:e}")))
}

/// Estimates `L` and `σ` with safety factor 1 and compares them with the
/// declared values; with `f*` and `μ` declared also checks the PL
/// inequality on the same ball.
pub fn check_declared_constants(problem: &Problem, spec: &SampleSpec) -> Result<Vec<CheckReport>> {
    let spec = spec.clone().with_safety(1.0);
    let mut out = Vec::new();
    if let Some(l) = problem.constants.l {
        let est = theory::estimate_l(problem, &spec)?;
        out.push(
            CheckReport::one_sided("declared_l", est, l, 1e-9 * l).trials(spec.count as u64),
        );
    }
    if let Some(sigma) = problem.constants.sigma {
        let est = theory::estimate_sigma(problem, &spec)?;
        out.push(
            CheckReport::one_sided("declared_sigma", est, sigma, 1e-9 * sigma.max(1e-300))
                .trials(spec.count as u64),
        );
    }
    if let (Some(mu), Some(_)) = (problem.constants.mu, problem.constants.f_star) {
        let grid = GridSpec::Ball {
            center: spec.center.clone(),
            radius: spec.radius,
            points: spec.count,
            seed: spec.seed,
        };
        let mut r = check_pl_constant(problem, mu, &grid)?;
        r.name = "declared_mu".into();
        out.push(r);
    }
    Ok(out)
}

/// `‖∇f(x*)‖` at the declared minimizer, bound `10⁻¹²`.
pub fn check_minimizer(problem: &Problem) -> Result<CheckReport> {
    let xs = problem
        .x_star()
        .ok_or_else(|| Error::Unsupported(format!("{} has no known minimizer", problem.id())))?;
    let g = linalg::norm(&problem.grad(xs));
    Ok(CheckReport::one_sided("minimizer_stationary", g, 1e-12, 0.0))
}

/// `‖∇f(x⁰)‖² ≤ 2L·(f(x⁰) − f*)`, which holds for every `L`-smooth `f`
/// bounded below by `f*`.
pub fn check_initial_gradient(problem: &Problem) -> Result<CheckReport> {
    let l = declared_l(problem)?;
    let delta0 = problem
        .delta0()
        .ok_or_else(|| Error::Unsupported(format!("{} has no known optimal value", problem.id())))?;
    let g = linalg::norm(&problem.grad(problem.x0()));
    let bound = (2.0 * delta0 * l).sqrt();
    Ok(CheckReport::one_sided("initial_gradient_bound", g, bound, 1e-12 * bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_hard_instance, make_pl_sine, make_quadratic, make_synthetic_logreg};
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn randn(r: &mut rand_chacha::ChaCha8Rng, d: usize, s: f64) -> Vec<f64> {
        (0..d).map(|_| s * r.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn fd_exact_on_quadratic() {
        let p = make_quadratic(20, 4, 0.1, 1.0, 3).unwrap();
        let rep = check_grad_fd(&p, &[0.1, -0.2, 0.3, 0.05], 1e-6).unwrap();
        assert!(rep.observed <= 1e-9, "{rep:?}");
    }

    #[test]
    fn fd_pl_sine_at_one() {
        let p = make_pl_sine();
        assert_eq!(p.grad(&[1.0])[0], 2.0 + 3.0 * 2f64.sin());
        let rep = check_grad_fd(&p, &[1.0], 1e-6).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn fd_logreg_random_points() {
        let p = make_synthetic_logreg(50, 5, 0.3, 2).unwrap();
        let mut r = rng::stream(4, 0);
        for _ in 0..10 {
            let x = randn(&mut r, 5, 1.0);
            let rep = check_grad_fd(&p, &x, 1e-5).unwrap();
            assert!(rep.observed <= 1e-6, "{rep:?}");
        }
    }

    #[test]
    fn fd_rejects_nonpositive_step() {
        let p = make_pl_sine();
        assert!(matches!(check_grad_fd(&p, &[1.0], 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn descent_lemma_gradient_step() {
        let p = make_quadratic(20, 4, 0.1, 1.0, 3).unwrap();
        let x = [1.0, 2.0, -1.0, 0.5];
        let g = p.grad(&x);
        let rep = check_descent_lemma(&p, &x, &g, 1.0).unwrap();
        assert!(rep.passed, "{rep:?}");
        // f(x⁺) ≤ f(x) − ‖∇f‖²/(2L)
        let bound = p.value(&x) - 0.5 * linalg::norm_sq(&g);
        assert!((rep.bound - bound).abs() < 1e-12);
    }

    #[test]
    fn descent_lemma_zero_direction() {
        let p = make_quadratic(20, 4, 0.1, 1.0, 3).unwrap();
        let x = [1.0, 2.0, -1.0, 0.5];
        let rep = check_descent_lemma(&p, &x, &[0.0; 4], 0.3).unwrap();
        // Without movement and with g = 0 both sides equal f(x) − (η/2)‖∇f‖² + (η/2)‖∇f‖².
        assert!(rep.passed);
        assert!((rep.observed - rep.bound).abs() <= 1e-12 * rep.bound.abs().max(1.0));
    }

    #[test]
    fn descent_lemma_random_directions_hard_instance() {
        let p = make_hard_instance(4, 16, 1.0, 1.0).unwrap();
        let mut r = rng::stream(8, 0);
        for _ in 0..1000 {
            let x = randn(&mut r, 16, 2.0);
            let g = randn(&mut r, 16, 2.0);
            let eta = 0.01 + r.random::<f64>();
            assert!(check_descent_lemma(&p, &x, &g, eta).unwrap().passed);
        }
    }

    #[test]
    fn descent_lemma_needs_l() {
        let p = make_pl_sine().with_constants(Default::default());
        assert!(matches!(
            check_descent_lemma(&p, &[1.0], &[1.0], 0.1),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn recursion_with_p_one_is_exact() {
        let p = make_quadratic(30, 3, 0.1, 1.0, 1).unwrap();
        let s = RecursionSetup {
            x_t: &[0.0, 0.0, 0.0],
            x_t1: &[0.5, 0.1, -0.3],
            g_t: &[1.0, 1.0, 1.0],
            p: 1.0,
            b: None,
            b_prime: 3,
            trials: 2000,
            seed: 0,
        };
        let rep = check_variance_recursion(&p, &s).unwrap();
        assert!(rep.observed <= 1e-24, "{rep:?}");
        assert!(rep.passed);
    }

    #[test]
    fn recursion_without_movement() {
        let p = make_quadratic(30, 3, 0.1, 1.0, 1).unwrap();
        let x = [0.2, 0.1, 0.0];
        let g = [1.0, -1.0, 2.0];
        let s = RecursionSetup {
            x_t: &x,
            x_t1: &x,
            g_t: &g,
            p: 0.3,
            b: None,
            b_prime: 2,
            trials: 4000,
            seed: 5,
        };
        let rep = check_variance_recursion(&p, &s).unwrap();
        assert!(rep.passed);
        assert!((rep.observed - rep.bound).abs() <= 3.0 * rep.std_err.unwrap() + 1e-12);
    }

    #[test]
    fn recursion_with_few_trials_is_inconclusive() {
        let p = make_quadratic(30, 3, 0.1, 1.0, 1).unwrap();
        let s = RecursionSetup {
            x_t: &[0.0; 3],
            x_t1: &[0.1; 3],
            g_t: &[0.0; 3],
            p: 0.5,
            b: None,
            b_prime: 2,
            trials: 10,
            seed: 0,
        };
        assert_eq!(check_variance_recursion(&p, &s).unwrap().status, CheckStatus::Inconclusive);
    }

    #[test]
    fn recursion_is_reproducible() {
        let p = make_quadratic(30, 3, 0.1, 1.0, 1).unwrap();
        let s = RecursionSetup {
            x_t: &[0.0; 3],
            x_t1: &[0.1, 0.2, 0.3],
            g_t: &[0.5; 3],
            p: 0.4,
            b: None,
            b_prime: 2,
            trials: 3000,
            seed: 21,
        };
        let a = check_variance_recursion(&p, &s).unwrap();
        let b = check_variance_recursion(&p, &s).unwrap();
        assert_eq!(a.observed.to_bits(), b.observed.to_bits());
        assert_eq!(a.std_err.unwrap().to_bits(), b.std_err.unwrap().to_bits());
    }

    #[test]
    fn pl_sine_constant_checks() {
        let p = make_pl_sine();
        let grid = GridSpec::Interval { lo: -10.0, hi: 10.0, points: 100_000 };
        assert!(check_pl_constant(&p, 1.0 / 32.0, &grid).unwrap().passed);
        let bad = check_pl_constant(&p, 1.0, &grid).unwrap();
        assert!(!bad.passed);
        assert!(!bad.detail.unwrap().starts_with("0 violating"));
    }

    #[test]
    fn quadratic_pl_constant_at_bottom_eigenvalue() {
        let p = make_quadratic(30, 3, 0.2, 1.0, 2).unwrap();
        let grid = GridSpec::Ball { center: None, radius: 3.0, points: 5000, seed: 1 };
        assert!(check_pl_constant(&p, 0.2, &grid).unwrap().passed);
    }

    #[test]
    fn lyapunov_gd_is_deterministic_descent() {
        let p = make_quadratic(16, 3, 0.1, 1.0, 2).unwrap();
        let plan = theory::plan_gd(16, 1.0, p.delta0().unwrap(), 0.1).unwrap();
        let rep = check_lyapunov_descent(&p, &plan, &[0, 1, 2], 30).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.std_err, Some(0.0));
    }

    #[test]
    fn lyapunov_on_quadratic_with_recursive_estimator() {
        let p = make_quadratic(64, 4, 0.1, 1.0, 2).unwrap();
        let plan = theory::plan_finite(64, 1.0, p.delta0().unwrap(), 0.1, None).unwrap();
        let seeds: Vec<u64> = (0..300).collect();
        let rep = check_lyapunov_descent(&p, &plan, &seeds, 40).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn lyapunov_rejects_oversized_steps() {
        let p = make_quadratic(16, 3, 0.1, 1.0, 2).unwrap();
        let mut plan = theory::plan_finite(16, 1.0, 1.0, 0.1, None).unwrap();
        plan.eta *= 2.0;
        assert!(matches!(check_lyapunov_descent(&p, &plan, &[0], 5), Err(Error::Config(_))));
    }

    #[test]
    fn pl_rate_on_quadratic() {
        let p = make_quadratic(64, 3, 0.2, 1.0, 2).unwrap();
        let plan = theory::plan_finite_pl(64, 1.0, 0.2, p.delta0().unwrap(), 1e-3, None).unwrap();
        let seeds: Vec<u64> = (0..50).collect();
        let rep = check_pl_rate(&p, &plan, &seeds, Some(60)).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn declared_constants_of_shipped_problems() {
        let q = make_quadratic(40, 3, 0.1, 1.0, 7).unwrap();
        let r = linalg::norm(q.x_star().unwrap());
        let spec = SampleSpec::new(300, r, 3).centered(q.x_star().unwrap().to_vec());
        for rep in check_declared_constants(&q, &spec).unwrap() {
            assert!(rep.passed, "{rep:?}");
        }
        let h = make_hard_instance(4, 8, 1.0, 1.0).unwrap();
        for rep in check_declared_constants(&h, &SampleSpec::new(100, 2.0, 3)).unwrap() {
            assert!(rep.passed, "{rep:?}");
        }
    }

    #[test]
    fn closed_form_checks() {
        let h = make_hard_instance(8, 32, 2.0, 3.0).unwrap();
        assert!(check_minimizer(&h).unwrap().passed);
        assert!(check_initial_gradient(&h).unwrap().passed);
        let l = make_synthetic_logreg(10, 2, 0.1, 0).unwrap();
        assert!(matches!(check_minimizer(&l), Err(Error::Unsupported(_))));
    }

    #[test]
    fn reports_serialize_to_single_lines() {
        let rep = CheckReport::one_sided("x", 1.0, 2.0, 0.0);
        let line = rep.to_json_line();
        assert!(!line.contains('\n'));
        let back: CheckReport = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rep);
    }
}
