use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{OutputMode, PageConfig, StopRule};
use crate::problems::{self, Problem};
use crate::theory::{self, Plan, Regime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    DenseCsv,
    Sparse,
}

/// One of the problem generators with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Quadratic {
        n: usize,
        d: usize,
        mu: f64,
        #[serde(rename = "L")]
        l: f64,
        seed: u64,
    },
    PlSine {
        #[serde(default)]
        x0: Option<f64>,
    },
    HardInstance {
        n: usize,
        d: usize,
        #[serde(rename = "L")]
        l: f64,
        delta0: f64,
    },
    LogregFile {
        path: PathBuf,
        format: DataFormat,
        alpha: f64,
        #[serde(default)]
        dim: Option<usize>,
    },
    LogregSynthetic {
        n: usize,
        d: usize,
        alpha: f64,
        seed: u64,
    },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        match self {
            ProblemSpec::Quadratic { n, d, mu, l, seed } => {
                problems::make_quadratic(*n, *d, *mu, *l, *seed)
            }
            ProblemSpec::PlSine { x0 } => {
                let p = problems::make_pl_sine();
                match x0 {
                    Some(x) => p.with_x0(vec![*x]),
                    None => Ok(p),
                }
            }
            ProblemSpec::HardInstance { n, d, l, delta0 } => {
                problems::make_hard_instance(*n, *d, *l, *delta0)
            }
            ProblemSpec::LogregFile {
                path,
                format,
                alpha,
                dim,
            } => {
                let data = match format {
                    DataFormat::DenseCsv => problems::load_dense_csv(path)?,
                    DataFormat::Sparse => problems::load_sparse(path, *dim)?,
                };
                problems::make_nonconvex_logreg(data, *alpha)
            }
            ProblemSpec::LogregSynthetic { n, d, alpha, seed } => {
                problems::make_synthetic_logreg(*n, *d, *alpha, *seed)
            }
        }
    }

    /// Makes a data-file path absolute so the spec still resolves from
    /// another working directory.
    pub(crate) fn absolutize(&mut self) -> Result<()> {
        if let ProblemSpec::LogregFile { path, .. } = self {
            if path.is_relative() {
                *path = std::path::absolute(&*path)?;
            }
        }
        Ok(())
    }
}

/// A planning regime, or `manual` for hand-picked parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Finite,
    Online,
    FinitePl,
    OnlinePl,
    Gd,
    Sgd,
    Manual,
}

impl Method {
    pub fn regime(self) -> Option<Regime> {
        Some(match self {
            Method::Finite => Regime::Finite,
            Method::Online => Regime::Online,
            Method::FinitePl => Regime::FinitePl,
            Method::OnlinePl => Regime::OnlinePl,
            Method::Gd => Regime::Gd,
            Method::Sgd => Regime::Sgd,
            Method::Manual => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self.regime() {
            Some(r) => r.as_str(),
            None => "manual",
        }
    }
}

/// Estimator fields to set by hand. In manual mode `eta`, `b`, `b_prime`,
/// and `p` are required; in a planned regime they replace the plan's values
/// but must still satisfy its stepsize bound.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub b: Option<usize>,
    #[serde(default)]
    pub b_prime: Option<usize>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub output_mode: Option<OutputMode>,
}

/// Output file names, relative to `out_dir`. `{seed}` in the trace name is
/// replaced by the seed; `null` disables that output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_trace")]
    pub trace_csv: Option<String>,
    #[serde(default = "default_summary")]
    pub summary_json: Option<String>,
}

fn default_trace() -> Option<String> {
    Some("trace_{seed}.csv".into())
}

fn default_summary() -> Option<String> {
    Some("summary.json".into())
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            trace_csv: default_trace(),
            summary_json: default_summary(),
        }
    }
}

fn default_window() -> Option<usize> {
    Some(16)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    /// Treat the problem as a stream: planners size batches from `σ`.
    #[serde(default)]
    pub online: bool,
    pub regime: Method,
    /// Methods compared by `compare`; ignored by `run`.
    #[serde(default)]
    pub methods: Vec<Method>,
    pub eps: f64,
    #[serde(default)]
    pub b_prime: Option<usize>,
    /// `f(x⁰) − f*`; required when the problem has no known `f*`.
    #[serde(default)]
    pub delta0: Option<f64>,
    #[serde(default)]
    pub overrides: Overrides,
    pub seeds: Vec<u64>,
    /// Iteration cap; defaults to the plan's `T` (required in manual mode).
    #[serde(default)]
    pub max_iters: Option<usize>,
    /// Early-stop window; `null` runs the full iteration budget.
    #[serde(default = "default_window")]
    pub stop_window: Option<usize>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from(".")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let p = self.problem.build()?;
        Ok(if self.online {
            problems::stream_view(&p)
        } else {
            p
        })
    }

    fn delta0_for(&self, problem: &Problem) -> Result<f64> {
        self.delta0.or_else(|| problem.delta0()).ok_or_else(|| {
            Error::config("delta0 is required when the problem has no known optimal value")
        })
    }

    /// The plan for `method` on `problem`; `None` in manual mode.
    pub fn plan_for(&self, method: Method, problem: &Problem) -> Result<Option<Plan>> {
        let Some(regime) = method.regime() else {
            return Ok(None);
        };
        if regime.is_finite_sum() && problem.is_online() {
            return Err(Error::config(format!(
                "regime {} needs full gradients, which a stream does not provide",
                regime.as_str()
            )));
        }
        let c = &problem.constants;
        let l = c.l.ok_or_else(|| Error::config("problem declares no smoothness constant L"))?;
        let delta0 = self.delta0_for(problem)?;
        let n = problem.n();
        let mu = || {
            if c.f_star.is_none() {
                return Err(Error::config("PL regimes need a known optimal value"));
            }
            c.mu.ok_or_else(|| Error::config("PL regimes need a declared mu"))
        };
        let plan = match regime {
            Regime::Finite => theory::plan_finite(n, l, delta0, self.eps, self.b_prime)?,
            Regime::Gd => theory::plan_gd(n, l, delta0, self.eps)?,
            Regime::Online => {
                theory::plan_online(c.sigma, Some(n), l, delta0, self.eps, self.b_prime)?
            }
            Regime::Sgd => theory::plan_sgd(c.sigma, Some(n), l, delta0, self.eps)?,
            Regime::FinitePl => {
                theory::plan_finite_pl(n, l, mu()?, delta0, self.eps, self.b_prime)?
            }
            Regime::OnlinePl => theory::plan_online_pl(
                c.sigma,
                Some(n),
                l,
                mu()?,
                delta0,
                self.eps,
                self.b_prime,
            )?,
        };
        Ok(Some(plan))
    }

    fn stop_rule(&self, pl: bool) -> StopRule {
        match self.stop_window {
            None => StopRule::FixedIterations,
            Some(window) if pl => StopRule::FGapWindow { window },
            Some(window) => StopRule::GradNormWindow { window },
        }
    }

    /// Resolved estimator configuration for one seed.
    pub fn page_config(
        &self,
        problem: &Problem,
        plan: Option<&Plan>,
        seed: u64,
    ) -> Result<PageConfig> {
        let o = &self.overrides;
        let config = match plan {
            None => {
                let need = |name: &str| Error::config(format!("manual mode requires {name}"));
                PageConfig {
                    eta: o.eta.ok_or_else(|| need("eta"))?,
                    b: o.b.ok_or_else(|| need("b"))?,
                    b_prime: o.b_prime.ok_or_else(|| need("b_prime"))?,
                    p: o.p.ok_or_else(|| need("p"))?,
                    seed,
                    max_iters: self.max_iters.ok_or_else(|| need("max_iters"))?,
                    target_eps: self.eps,
                    output_mode: o.output_mode.unwrap_or(OutputMode::UniformIterate),
                    stop: self.stop_rule(false),
                    diagnostics: true,
                }
            }
            Some(plan) => {
                let pl = plan.regime.is_pl();
                let mut c = plan.page_config(seed, self.eps, None);
                c.stop = self.stop_rule(pl && problem.constants.f_star.is_some());
                if let Some(m) = self.max_iters {
                    c.max_iters = m;
                }
                c.eta = o.eta.unwrap_or(c.eta);
                c.b = o.b.unwrap_or(c.b);
                c.b_prime = o.b_prime.unwrap_or(c.b_prime);
                c.p = o.p.unwrap_or(c.p);
                c.output_mode = o.output_mode.unwrap_or(c.output_mode);
                let l = problem.constants.l.expect("planned regimes need L");
                let mu = if pl { problem.constants.mu } else { None };
                if c.p > 0.0
                    && c.b_prime > 0
                    && !theory::satisfies_stepsize_bound(c.eta, c.p, c.b_prime, l, mu)
                {
                    return Err(Error::config(format!(
                        "overrides (eta = {}, p = {}, b' = {}) violate the {} stepsize bound",
                        c.eta,
                        c.p,
                        c.b_prime,
                        plan.regime.as_str()
                    )));
                }
                c
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::config("seeds must be distinct"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::config("eps must be positive"));
        }
        if let Some(t) = &self.outputs.trace_csv {
            if self.seeds.len() > 1 && !t.contains("{seed}") {
                return Err(Error::config(
                    "trace_csv must contain {seed} when several seeds are run",
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "problem": {"kind": "quadratic", "n": 64, "d": 4, "mu": 0.1, "L": 1.0, "seed": 3},
                "regime": "finite",
                "eps": 0.05,
                "seeds": [1, 2, 3]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults() {
        let c = base();
        assert_eq!(c.stop_window, Some(16));
        assert_eq!(c.outputs, Outputs::default());
        assert!(!c.online);
        c.validate().unwrap();
    }

    #[test]
    fn plan_mode_resolves_a_valid_config() {
        let c = base();
        let p = c.build_problem().unwrap();
        let plan = c.plan_for(c.regime, &p).unwrap().unwrap();
        let pc = c.page_config(&p, Some(&plan), 2).unwrap();
        assert_eq!((pc.b, pc.b_prime, pc.seed), (64, 8, 2));
        assert_eq!(pc.stop, StopRule::GradNormWindow { window: 16 });
    }

    #[test]
    fn overrides_beyond_the_stepsize_bound_are_rejected() {
        let mut c = base();
        c.overrides.eta = Some(0.9);
        let p = c.build_problem().unwrap();
        let plan = c.plan_for(c.regime, &p).unwrap();
        assert!(matches!(c.page_config(&p, plan.as_ref(), 1), Err(Error::Config(_))));
        c.overrides.eta = Some(0.1);
        assert!(c.page_config(&p, plan.as_ref(), 1).is_ok());
    }

    #[test]
    fn manual_mode_needs_every_field() {
        let mut c = base();
        c.regime = Method::Manual;
        c.overrides = Overrides {
            eta: Some(0.1),
            b: Some(64),
            b_prime: Some(4),
            p: None,
            output_mode: None,
        };
        c.max_iters = Some(10);
        let p = c.build_problem().unwrap();
        assert!(matches!(c.page_config(&p, None, 1), Err(Error::Config(_))));
        c.overrides.p = Some(0.2);
        assert!(c.page_config(&p, None, 1).is_ok());
        c.max_iters = None;
        assert!(matches!(c.page_config(&p, None, 1), Err(Error::Config(_))));
    }

    #[test]
    fn finite_regimes_reject_streams() {
        let mut c = base();
        c.online = true;
        let p = c.build_problem().unwrap();
        assert!(c.plan_for(Method::Finite, &p).is_err());
        assert!(c.plan_for(Method::Online, &p).unwrap().is_some());
    }

    #[test]
    fn unknown_optimum_needs_delta0() {
        let mut c = base();
        c.problem = ProblemSpec::LogregSynthetic { n: 50, d: 3, alpha: 0.1, seed: 0 };
        let p = c.build_problem().unwrap();
        assert!(matches!(c.plan_for(Method::Finite, &p), Err(Error::Config(_))));
        c.delta0 = Some(1.0);
        assert!(c.plan_for(Method::Finite, &p).is_ok());
        assert!(matches!(c.plan_for(Method::FinitePl, &p), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        assert!(ExperimentConfig::from_json(r#"{"problem": {"kind": "pl_sine"}, "regime": "gd", "eps": 0.1, "seeds": [1], "bogus": 1}"#).is_err());
        let mut c = base();
        c.seeds = vec![];
        assert!(c.validate().is_err());
        let mut c = base();
        c.seeds = vec![1, 1];
        assert!(c.validate().is_err());
        let mut c = base();
        c.outputs.trace_csv = Some("trace.csv".into());
        assert!(c.validate().is_err());
    }
}
