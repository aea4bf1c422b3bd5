use std::fs;
use std::path::PathBuf;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EXIT_CHECK_FAILED, EXIT_OK};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::{
    make_hard_instance, make_pl_sine, make_quadratic, make_synthetic_logreg, stream_view, Problem,
};
use crate::rng;
use crate::theory::{self, GridSpec, SampleSpec};
use crate::verify::{self, CheckReport, RecursionSetup};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    GradFd,
    FullGradConsistency,
    DeclaredConstants,
    DescentLemma,
    VarianceRecursion,
    PlConstant,
    LyapunovDescent,
    PlRate,
    ClosedForms,
}

impl CheckKind {
    pub const ALL: [CheckKind; 9] = [
        CheckKind::GradFd,
        CheckKind::FullGradConsistency,
        CheckKind::DeclaredConstants,
        CheckKind::DescentLemma,
        CheckKind::VarianceRecursion,
        CheckKind::PlConstant,
        CheckKind::LyapunovDescent,
        CheckKind::PlRate,
        CheckKind::ClosedForms,
    ];
}

fn all_checks() -> Vec<CheckKind> {
    CheckKind::ALL.to_vec()
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default = "all_checks")]
    pub checks: Vec<CheckKind>,
    /// Multiplies every declared `L` before checking (fault injection).
    #[serde(default = "one")]
    pub l_scale: f64,
    #[serde(default)]
    pub seed: u64,
    /// JSON-lines report file.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            checks: all_checks(),
            l_scale: 1.0,
            seed: 0,
            output: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub reports: Vec<CheckReport>,
    pub exit_code: i32,
}

struct Shipped {
    quadratic: Problem,
    pl_sine: Problem,
    hard: Problem,
    logreg: Problem,
}

impl Shipped {
    fn build(l_scale: f64) -> Result<Self> {
        let scale = |mut p: Problem| {
            p.constants.l = p.constants.l.map(|l| l * l_scale);
            p
        };
        Ok(Self {
            quadratic: scale(make_quadratic(64, 6, 0.1, 1.0, 11)?),
            pl_sine: scale(make_pl_sine()),
            hard: scale(make_hard_instance(4, 16, 1.0, 1.0)?),
            logreg: scale(make_synthetic_logreg(200, 5, 0.1, 5)?),
        })
    }

    fn all(&self) -> [&Problem; 4] {
        [&self.quadratic, &self.pl_sine, &self.hard, &self.logreg]
    }
}

fn tagged(mut r: CheckReport, problem: &Problem) -> CheckReport {
    r.name = format!("{}[{}]", r.name, problem.id());
    r
}

fn errored(name: &str, problem: &Problem, e: Error) -> CheckReport {
    let mut r = CheckReport::one_sided(format!("{name}[{}]", problem.id()), f64::NAN, f64::NAN, 0.0);
    r.detail = Some(format!("error: {e}"));
    r
}

fn push(out: &mut Vec<CheckReport>, name: &str, problem: &Problem, r: Result<CheckReport>) {
    out.push(match r {
        Ok(r) => tagged(r, problem),
        Err(e) => errored(name, problem, e),
    });
}

fn randn(r: &mut rand_chacha::ChaCha8Rng, d: usize, s: f64) -> Vec<f64> {
    (0..d).map(|_| s * r.sample::<f64, _>(StandardNormal)).collect()
}

/// Folds per-point reports into the one with the largest excess
/// `observed − bound − slack`.
fn worst_of(name: &str, reports: Vec<CheckReport>) -> CheckReport {
    let n = reports.len() as u64;
    let mut worst = reports
        .into_iter()
        .max_by(|a, b| {
            (a.observed - a.bound - a.slack).total_cmp(&(b.observed - b.bound - b.slack))
        })
        .expect("at least one point");
    worst.name = name.to_string();
    worst.trials = n;
    worst
}

fn descent_lemma(problem: &Problem, seed: u64) -> Result<CheckReport> {
    let l = problem
        .constants
        .l
        .ok_or_else(|| Error::Unsupported("no declared L".into()))?;
    let mut r = rng::stream(seed, 10);
    let d = problem.dim();
    let mut reports = Vec::new();
    for _ in 0..200 {
        let x = randn(&mut r, d, 2.0);
        let g = randn(&mut r, d, 2.0);
        let eta = (0.01 + r.random::<f64>()) * 2.0 / l;
        reports.push(verify::check_descent_lemma(problem, &x, &g, eta)?);
    }
    Ok(worst_of("descent_lemma", reports))
}

fn variance_recursion(problem: &Problem, b: Option<usize>, seed: u64) -> Result<CheckReport> {
    let mut r = rng::stream(seed, 11);
    let d = problem.dim();
    let x_t: Vec<f64> = match problem.x_star() {
        Some(xs) => {
            let noise = randn(&mut r, d, 0.3);
            xs.iter().zip(noise).map(|(a, b)| a + b).collect()
        }
        None => randn(&mut r, d, 1.0),
    };
    let grad = problem.grad(&x_t);
    let noise = randn(&mut r, d, 0.2);
    let g_t: Vec<f64> = grad.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let l = problem.constants.l.unwrap_or(1.0);
    let x_t1: Vec<f64> = x_t.iter().zip(&g_t).map(|(x, g)| x - 0.5 / l * g).collect();
    verify::check_variance_recursion(
        problem,
        &RecursionSetup {
            x_t: &x_t,
            x_t1: &x_t1,
            g_t: &g_t,
            p: 0.2,
            b,
            b_prime: 4,
            trials: 20_000,
            seed,
        },
    )
}

/// Runs the selected checks on the shipped problems. Exit code 0 iff no
/// report failed (inconclusive counts as a pass).
pub fn verify_suite(config: &SuiteConfig) -> Result<SuiteOutcome> {
    if config.checks.is_empty() {
        return Err(Error::Usage("no checks selected".into()));
    }
    if !(config.l_scale > 0.0 && config.l_scale.is_finite()) {
        return Err(Error::config("l_scale must be positive"));
    }
    let ps = Shipped::build(config.l_scale)?;
    let seed = config.seed;
    let mut out = Vec::new();
    for &kind in &config.checks {
        match kind {
            CheckKind::GradFd => {
                let mut r = rng::stream(seed, 12);
                for p in ps.all() {
                    let reps: Result<Vec<_>> = (0..5)
                        .map(|_| verify::check_grad_fd(p, &randn(&mut r, p.dim(), 1.0), 1e-6))
                        .collect();
                    push(&mut out, "grad_fd", p, reps.map(|v| worst_of("grad_fd", v)));
                }
            }
            CheckKind::FullGradConsistency => {
                let mut r = rng::stream(seed, 13);
                for p in ps.all() {
                    let reps: Result<Vec<_>> = (0..3)
                        .map(|_| verify::check_full_grad_consistency(p, &randn(&mut r, p.dim(), 1.0)))
                        .collect();
                    push(&mut out, "full_grad_consistency", p, reps.map(|v| worst_of("full_grad_consistency", v)));
                }
            }
            CheckKind::DeclaredConstants => {
                for p in ps.all() {
                    let spec = match p.x_star() {
                        Some(xs) => {
                            let r = linalg::dist_sq(xs, p.x0()).sqrt().max(1.0);
                            SampleSpec::new(300, r, seed).centered(xs.to_vec())
                        }
                        None => SampleSpec::new(300, 3.0, seed),
                    };
                    match verify::check_declared_constants(p, &spec) {
                        Ok(reps) => out.extend(reps.into_iter().map(|r| tagged(r, p))),
                        Err(e) => out.push(errored("declared_constants", p, e)),
                    }
                }
            }
            CheckKind::DescentLemma => {
                for p in ps.all() {
                    push(&mut out, "descent_lemma", p, descent_lemma(p, seed));
                }
            }
            CheckKind::VarianceRecursion => {
                push(&mut out, "variance_recursion", &ps.quadratic, variance_recursion(&ps.quadratic, None, seed));
                push(&mut out, "variance_recursion", &ps.hard, variance_recursion(&ps.hard, None, seed));
                let stream = stream_view(&ps.quadratic);
                push(&mut out, "variance_recursion", &stream, variance_recursion(&stream, Some(8), seed));
            }
            CheckKind::PlConstant => {
                let grid = GridSpec::Interval { lo: -10.0, hi: 10.0, points: 100_000 };
                push(&mut out, "pl_constant", &ps.pl_sine, verify::check_pl_constant(&ps.pl_sine, 1.0 / 32.0, &grid));
                let q = &ps.quadratic;
                let r = linalg::norm(q.x_star().expect("quadratic has x*"));
                let grid = GridSpec::Ball { center: None, radius: r, points: 20_000, seed };
                let mu = q.constants.mu.expect("quadratic has mu");
                push(&mut out, "pl_constant", q, verify::check_pl_constant(q, mu, &grid));
            }
            CheckKind::LyapunovDescent => {
                let seeds: Vec<u64> = (0..1000).map(|s| seed.wrapping_add(s)).collect();
                for p in [&ps.hard, &ps.quadratic] {
                    let r = p
                        .constants
                        .l
                        .zip(p.delta0())
                        .ok_or_else(|| Error::Unsupported("needs L and f*".into()))
                        .and_then(|(l, d0)| theory::plan_finite(p.n(), l, d0, 0.05, None))
                        .and_then(|plan| verify::check_lyapunov_descent(p, &plan, &seeds, 50));
                    push(&mut out, "lyapunov_descent", p, r);
                }
            }
            CheckKind::PlRate => {
                let q = &ps.quadratic;
                let seeds: Vec<u64> = (0..200).map(|s| seed.wrapping_add(s)).collect();
                let c = &q.constants;
                let r = theory::plan_finite_pl(
                    q.n(),
                    c.l.expect("quadratic has L"),
                    c.mu.expect("quadratic has mu"),
                    q.delta0().expect("quadratic has f*"),
                    1e-3 * q.delta0().expect("quadratic has f*"),
                    None,
                )
                .and_then(|plan| verify::check_pl_rate(q, &plan, &seeds, None));
                push(&mut out, "pl_rate", q, r);
            }
            CheckKind::ClosedForms => {
                for p in [&ps.hard, &ps.quadratic, &ps.pl_sine] {
                    push(&mut out, "minimizer_stationary", p, verify::check_minimizer(p));
                    push(&mut out, "initial_gradient_bound", p, verify::check_initial_gradient(p));
                }
            }
        }
    }
    if let Some(path) = &config.output {
        let mut text = String::new();
        for r in &out {
            text.push_str(&r.to_json_line());
            text.push('\n');
        }
        fs::write(path, text)
            .map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))?;
    }
    let exit_code = if out.iter().all(CheckReport::is_ok) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    };
    Ok(SuiteOutcome {
        reports: out,
        exit_code,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_check_list_is_a_usage_error() {
        let c = SuiteConfig {
            checks: vec![],
            ..Default::default()
        };
        assert!(matches!(verify_suite(&c), Err(Error::Usage(_))));
    }

    #[test]
    fn halved_l_breaks_the_descent_lemma() {
        let c = SuiteConfig {
            checks: vec![CheckKind::DescentLemma],
            l_scale: 0.5,
            ..Default::default()
        };
        let out = verify_suite(&c).unwrap();
        assert_eq!(out.exit_code, EXIT_CHECK_FAILED);
        let hard = out
            .reports
            .iter()
            .find(|r| r.name.starts_with("descent_lemma[hard_instance"))
            .unwrap();
        assert!(!hard.passed);
    }

    #[test]
    fn cheap_checks_pass() {
        let c = SuiteConfig {
            checks: vec![
                CheckKind::GradFd,
                CheckKind::FullGradConsistency,
                CheckKind::DescentLemma,
                CheckKind::ClosedForms,
            ],
            ..Default::default()
        };
        let out = verify_suite(&c).unwrap();
        for r in &out.reports {
            assert!(r.is_ok(), "{r:?}");
        }
        assert_eq!(out.exit_code, EXIT_OK);
    }
}
