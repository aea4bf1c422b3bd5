//! Parameter planning and complexity formulas.
//!
//! Each planner turns problem constants and a target accuracy into the
//! estimator parameters `(η, b, b', p)`, an iteration budget `T`, and the
//! predicted gradient count `b + T·(pb + (1−p)b')` (corrections charged at
//! `b'`). Real-valued counts are rounded up.

pub(crate) mod estimate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{OutputMode, PageConfig, StopRule};

pub use estimate::{estimate_l, estimate_mu_pl, estimate_sigma, GridSpec, SampleSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Finite,
    Online,
    FinitePl,
    OnlinePl,
    Gd,
    Sgd,
}

impl Regime {
    pub fn is_pl(self) -> bool {
        matches!(self, Regime::FinitePl | Regime::OnlinePl)
    }

    /// Regimes that sample the full index set on fresh batches.
    pub fn is_finite_sum(self) -> bool {
        matches!(self, Regime::Finite | Regime::FinitePl | Regime::Gd)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Finite => "finite",
            Regime::Online => "online",
            Regime::FinitePl => "finite_pl",
            Regime::OnlinePl => "online_pl",
            Regime::Gd => "gd",
            Regime::Sgd => "sgd",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub regime: Regime,
    pub eta: f64,
    pub b: usize,
    pub b_prime: usize,
    pub p: f64,
    #[serde(rename = "T")]
    pub t: u64,
    pub grad_budget: f64,
    pub kappa: Option<f64>,
}

impl Plan {
    /// `1 + √((1−p)/(pb'))`, the factor in the stepsize bound.
    pub fn stepsize_factor(&self) -> f64 {
        stepsize_factor(self.p, self.b_prime)
    }

    /// Expected gradient count per iteration, corrections charged at `b'`.
    pub fn per_iteration_cost(&self) -> f64 {
        self.p * self.b as f64 + (1.0 - self.p) * self.b_prime as f64
    }

    pub fn output_mode(&self) -> OutputMode {
        if self.regime.is_pl() {
            OutputMode::LastIterate
        } else {
            OutputMode::UniformIterate
        }
    }

    /// Estimator configuration for one seed. PL plans stop on the function
    /// gap; the others on the gradient norm.
    pub fn page_config(&self, seed: u64, eps: f64, window: Option<usize>) -> PageConfig {
        let stop = match window {
            None => StopRule::FixedIterations,
            Some(window) if self.regime.is_pl() => StopRule::FGapWindow { window },
            Some(window) => StopRule::GradNormWindow { window },
        };
        PageConfig {
            eta: self.eta,
            b: self.b,
            b_prime: self.b_prime,
            p: self.p,
            seed,
            max_iters: usize::try_from(self.t).unwrap_or(usize::MAX),
            target_eps: eps,
            output_mode: self.output_mode(),
            stop,
            diagnostics: true,
        }
    }
}

pub fn stepsize_factor(p: f64, b_prime: usize) -> f64 {
    1.0 + ((1.0 - p) / (p * b_prime as f64)).sqrt()
}

/// True when `η·L·(1 + √((1−p)/(pb'))) ≤ 1` (with `10⁻¹²` slack) and, given
/// `μ`, `η ≤ p/(2μ)`.
pub fn satisfies_stepsize_bound(
    eta: f64,
    p: f64,
    b_prime: usize,
    l: f64,
    mu: Option<f64>,
) -> bool {
    let smooth = eta * l * stepsize_factor(p, b_prime) <= 1.0 + 1e-12;
    let pl = mu.is_none_or(|mu| eta <= p / (2.0 * mu) * (1.0 + 1e-12));
    smooth && pl
}

/// `⌈x⌉`, except that values within `10⁻⁹` (relative) of an integer snap to
/// it, so that e.g. `2·1·1/0.1²` gives 200 and not 201.
pub fn ceil_count(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("eps must be positive, got {eps}")))
    }
}

fn check_mu(mu: f64, l: f64) -> Result<()> {
    positive("mu", mu)?;
    if mu > l {
        return Err(Error::config(format!("mu = {mu} exceeds L = {l}")));
    }
    Ok(())
}

/// `b'` for a fresh-batch size `b`: the caller's choice, which must not
/// exceed `√b`, or `⌊√b⌋`.
fn pick_b_prime(b: usize, requested: Option<usize>) -> Result<usize> {
    let root = b.isqrt().max(1);
    match requested {
        None => Ok(root),
        Some(0) => Err(Error::config("b' must be at least 1")),
        Some(v) if v > root => Err(Error::config(format!(
            "b' = {v} exceeds √b for b = {b}"
        ))),
        Some(v) => Ok(v),
    }
}

/// Online variant: a larger request is clamped to `⌊√b⌋`.
fn clamp_b_prime(b: usize, requested: Option<usize>) -> Result<usize> {
    let root = b.isqrt().max(1);
    match requested {
        Some(0) => Err(Error::config("b' must be at least 1")),
        Some(v) => Ok(v.min(root)),
        None => Ok(root),
    }
}

fn optimal_p(b: usize, b_prime: usize) -> f64 {
    b_prime as f64 / (b + b_prime) as f64
}

/// `1 + √b/b'`.
fn root_ratio(b: usize, b_prime: usize) -> f64 {
    1.0 + (b as f64).sqrt() / b_prime as f64
}

/// `min(⌈x⌉, n)` with `n = None` meaning infinitely many components.
fn batch_rule(x: f64, n: Option<usize>) -> Result<usize> {
    if !x.is_finite() {
        return Err(Error::config("batch-size rule is not finite"));
    }
    let b = ceil_count(x).max(1);
    let b = usize::try_from(b).map_err(|_| Error::config("batch size overflows"))?;
    Ok(match n {
        Some(n) => b.min(n),
        None => b,
    })
}

fn budget(b: usize, b_prime: usize, p: f64, t: u64) -> f64 {
    b as f64 + t as f64 * (p * b as f64 + (1.0 - p) * b_prime as f64)
}

/// Iterations for the nonconvex finite-sum guarantee with general `p`:
/// `(2Δ₀L/ε²)(1 + √((1−p)/(pb')))`, before rounding.
pub fn finite_iterations(l: f64, delta0: f64, eps: f64, p: f64, b_prime: usize) -> f64 {
    2.0 * delta0 * l / (eps * eps) * stepsize_factor(p, b_prime)
}

/// Expected gradient count `b + T(pb + (1−p)b')` for a real-valued `T`.
pub fn grad_complexity(b: usize, b_prime: usize, p: f64, t: f64) -> f64 {
    b as f64 + t * (p * b as f64 + (1.0 - p) * b_prime as f64)
}

/// `n + 8Δ₀L√n/ε²`.
pub fn finite_bound(n: usize, l: f64, delta0: f64, eps: f64) -> f64 {
    n as f64 + 8.0 * delta0 * l * (n as f64).sqrt() / (eps * eps)
}

/// `3b + 16Δ₀L√b/ε²`.
pub fn online_bound(b: usize, l: f64, delta0: f64, eps: f64) -> f64 {
    3.0 * b as f64 + 16.0 * delta0 * l * (b as f64).sqrt() / (eps * eps)
}

/// `n + (4√n·κ + 4n)·log(Δ₀/ε)`.
pub fn finite_pl_bound(n: usize, kappa: f64, delta0: f64, eps: f64) -> f64 {
    let nf = n as f64;
    nf + (4.0 * nf.sqrt() * kappa + 4.0 * nf) * (delta0 / eps).ln().max(0.0)
}

/// `b + (4√b·κ + 4b)·log(2Δ₀/ε)`.
pub fn online_pl_bound(b: usize, kappa: f64, delta0: f64, eps: f64) -> f64 {
    let bf = b as f64;
    bf + (4.0 * bf.sqrt() * kappa + 4.0 * bf) * (2.0 * delta0 / eps).ln().max(0.0)
}

/// Nonconvex finite sum: `b = n`, `b' ≤ √n`, `p = b'/(b+b')`.
pub fn plan_finite(
    n: usize,
    l: f64,
    delta0: f64,
    eps: f64,
    b_prime: Option<usize>,
) -> Result<Plan> {
    check_eps(eps)?;
    positive("L", l)?;
    positive("delta0", delta0)?;
    if n == 0 {
        return Err(Error::config("n must be at least 1"));
    }
    let b = n;
    let bp = pick_b_prime(b, b_prime)?;
    let p = optimal_p(b, bp);
    let r = root_ratio(b, bp);
    let t = ceil_count(2.0 * delta0 * l / (eps * eps) * r);
    Ok(Plan {
        regime: Regime::Finite,
        eta: 1.0 / (l * r),
        b,
        b_prime: bp,
        p,
        t,
        grad_budget: budget(b, bp, p, t),
        kappa: None,
    })
}

/// Full gradient descent: `p = 1`, `b = n`, `η = 1/L`. `b'` is never used
/// and is set to `b`.
pub fn plan_gd(n: usize, l: f64, delta0: f64, eps: f64) -> Result<Plan> {
    check_eps(eps)?;
    positive("L", l)?;
    positive("delta0", delta0)?;
    if n == 0 {
        return Err(Error::config("n must be at least 1"));
    }
    let t = ceil_count(2.0 * delta0 * l / (eps * eps));
    Ok(Plan {
        regime: Regime::Gd,
        eta: 1.0 / l,
        b: n,
        b_prime: n,
        p: 1.0,
        t,
        grad_budget: budget(n, n, 1.0, t),
        kappa: None,
    })
}

fn online_batch(sigma: Option<f64>, n: Option<usize>, scale: f64) -> Result<usize> {
    match (sigma, n) {
        (None, None) => Err(Error::config(
            "online planning needs sigma or a finite number of components",
        )),
        (None, Some(n)) => Ok(n),
        (Some(s), n) => {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::config(format!("sigma must be nonnegative, got {s}")));
            }
            batch_rule(s * s * scale, n)
        }
    }
}

/// Nonconvex online (or large finite sum): `b = min(⌈2σ²/ε²⌉, n)`,
/// `b' ≤ √b`.
pub fn plan_online(
    sigma: Option<f64>,
    n: Option<usize>,
    l: f64,
    delta0: f64,
    eps: f64,
    b_prime: Option<usize>,
) -> Result<Plan> {
    check_eps(eps)?;
    positive("L", l)?;
    positive("delta0", delta0)?;
    let b = online_batch(sigma, n, 2.0 / (eps * eps))?;
    let bp = clamp_b_prime(b, b_prime)?;
    let p = optimal_p(b, bp);
    let r = root_ratio(b, bp);
    let t = ceil_count(4.0 * delta0 * l / (eps * eps) * r + (b + bp) as f64 / bp as f64);
    Ok(Plan {
        regime: Regime::Online,
        eta: 1.0 / (l * r),
        b,
        b_prime: bp,
        p,
        t,
        grad_budget: budget(b, bp, p, t),
        kappa: None,
    })
}

/// Minibatch SGD: `p = 1`, `b = min(⌈2σ²/ε²⌉, n)`, `η = 1/L`.
pub fn plan_sgd(
    sigma: Option<f64>,
    n: Option<usize>,
    l: f64,
    delta0: f64,
    eps: f64,
) -> Result<Plan> {
    check_eps(eps)?;
    positive("L", l)?;
    positive("delta0", delta0)?;
    let b = online_batch(sigma, n, 2.0 / (eps * eps))?;
    let t = ceil_count(4.0 * delta0 * l / (eps * eps) + 1.0);
    Ok(Plan {
        regime: Regime::Sgd,
        eta: 1.0 / l,
        b,
        b_prime: b,
        p: 1.0,
        t,
        grad_budget: budget(b, b, 1.0, t),
        kappa: None,
    })
}

fn pl_plan(
    regime: Regime,
    b: usize,
    bp: usize,
    l: f64,
    mu: f64,
    log_arg: f64,
) -> Plan {
    let p = optimal_p(b, bp);
    let r = root_ratio(b, bp);
    let kappa = l / mu;
    let inv_p = (b + bp) as f64 / bp as f64;
    let eta = (1.0 / (l * r)).min(bp as f64 / (2.0 * mu * (b + bp) as f64));
    let t = if log_arg <= 1.0 {
        log::warn!("target accuracy already met at the start point (log argument {log_arg} ≤ 1); T = 0");
        0
    } else {
        ceil_count((r * kappa + 2.0 * inv_p) * log_arg.ln())
    };
    Plan {
        regime,
        eta,
        b,
        b_prime: bp,
        p,
        t,
        grad_budget: budget(b, bp, p, t),
        kappa: Some(kappa),
    }
}

/// PL finite sum: stepsize also capped by `b'/(2μ(b+b'))`; the last iterate
/// is returned.
pub fn plan_finite_pl(
    n: usize,
    l: f64,
    mu: f64,
    delta0: f64,
    eps: f64,
    b_prime: Option<usize>,
) -> Result<Plan> {
    check_eps(eps)?;
    positive("L", l)?;
    positive("delta0", delta0)?;
    check_mu(mu, l)?;
    if n == 0 {
        return Err(Error::config("n must be at least 1"));
    }
    let bp = pick_b_prime(n, b_prime)?;
    Ok(pl_plan(Regime::FinitePl, n, bp, l, mu, delta0 / eps))
}

/// PL online: `b = min(⌈2σ²/(με)⌉, n)` and `log(2Δ₀/ε)`.
pub fn plan_online_pl(
    sigma: Option<f64>,
    n: Option<usize>,
    l: f64,
    mu: f64,
    delta0: f64,
    eps: f64,
    b_prime: Option<usize>,
) -> Result<Plan> {
    check_eps(eps)?;
    positive("L", l)?;
    positive("delta0", delta0)?;
    check_mu(mu, l)?;
    let b = online_batch(sigma, n, 2.0 / (mu * eps))?;
    let bp = clamp_b_prime(b, b_prime)?;
    Ok(pl_plan(Regime::OnlinePl, b, bp, l, mu, 2.0 * delta0 / eps))
}
