use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::trace_csv::render_trace_csv;
use super::{EXIT_CHECK_FAILED, EXIT_DIVERGED, EXIT_OK};
use crate::error::{Error, Result};
use crate::estimator::{self, PageConfig, Trace};
use crate::theory::Plan;

/// Per-seed entry of the summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub page_config: PageConfig,
    /// Trace file, relative to the summary's directory.
    pub trace_csv: Option<String>,
    pub iterations: usize,
    pub reached_target: bool,
    /// Gradient count (corrections charged at `b'`) when the stop rule
    /// fired.
    pub grad_evals_to_target: Option<u64>,
    /// Oracle calls (corrections charged at `2b'`) when the stop rule fired.
    pub wall_grad_evals_to_target: Option<u64>,
    pub total_grad_evals: u64,
    pub total_wall_grad_evals: u64,
    pub final_grad_norm: Option<f64>,
    pub final_f_gap: Option<f64>,
    pub theory_budget: Option<f64>,
    /// Gradient count to target (or in total, if the target was missed)
    /// over the theory budget.
    pub budget_ratio: Option<f64>,
    pub output_index: Option<usize>,
    pub diverged_at: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem_id: String,
    pub config: ExperimentConfig,
    pub plan: Option<Plan>,
    pub runs: Vec<RunSummary>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub summary: Summary,
    pub summary_path: Option<PathBuf>,
    pub exit_code: i32,
}

fn summarize(seed: u64, config: PageConfig, trace: &Trace, plan: Option<&Plan>) -> RunSummary {
    let last = trace.last();
    let to_target = trace.evals_at_stop();
    let total = last.map_or(0, |r| r.nominal_grad_evals_after);
    let budget = plan.map(|p| p.grad_budget);
    let used = to_target.map_or(total, |(p, _)| p);
    RunSummary {
        seed,
        page_config: config,
        trace_csv: None,
        iterations: trace.iterations(),
        reached_target: to_target.is_some(),
        grad_evals_to_target: to_target.map(|(p, _)| p),
        wall_grad_evals_to_target: to_target.map(|(_, w)| w),
        total_grad_evals: total,
        total_wall_grad_evals: last.map_or(0, |r| r.grad_evals_after),
        final_grad_norm: last.and_then(|r| r.grad_norm),
        final_f_gap: last.and_then(|r| r.f_gap),
        theory_budget: budget,
        budget_ratio: budget.map(|b| used as f64 / b),
        output_index: Some(trace.output_index),
        diverged_at: None,
    }
}

fn trace_name(template: &str, seed: u64) -> String {
    template.replace("{seed}", &seed.to_string())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)
        .map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))
}

/// Runs every seed and writes the trace CSVs and summary JSON. A diverging
/// seed still gets its partial trace written; the exit code is then 3.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let mut config = config.clone();
    config.problem.absolutize()?;
    let problem = config.build_problem()?;
    let plan = config.plan_for(config.regime, &problem)?;
    let page_configs: Vec<PageConfig> = config
        .seeds
        .iter()
        .map(|&s| config.page_config(&problem, plan.as_ref(), s))
        .collect::<Result<_>>()?;

    fs::create_dir_all(&config.out_dir).map_err(|e| {
        Error::config(format!("cannot create {}: {e}", config.out_dir.display()))
    })?;

    let results: Vec<Result<estimator::RunOutcome>> = page_configs
        .par_iter()
        .map(|c| estimator::run(&problem, c))
        .collect();

    let mut runs = Vec::with_capacity(results.len());
    let mut diverged = false;
    for (c, result) in page_configs.into_iter().zip(results) {
        let seed = c.seed;
        let (trace, diverged_at) = match result {
            Ok(out) => (out.trace, None),
            Err(Error::Divergence { t, partial }) => {
                diverged = true;
                log::error!("seed {seed} diverged at iteration {t}");
                match partial {
                    Some(tr) => (*tr, Some(t)),
                    None => return Err(Error::Divergence { t, partial: None }),
                }
            }
            Err(e) => return Err(e),
        };
        let mut entry = summarize(seed, c, &trace, plan.as_ref());
        if diverged_at.is_some() {
            entry.diverged_at = diverged_at;
            entry.output_index = None;
            entry.reached_target = false;
        }
        if let Some(template) = &config.outputs.trace_csv {
            let name = trace_name(template, seed);
            write_file(&config.out_dir.join(&name), &render_trace_csv(&trace)?)?;
            entry.trace_csv = Some(name);
        }
        runs.push(entry);
    }

    let summary = Summary {
        problem_id: problem.id().to_string(),
        config: config.clone(),
        plan,
        runs,
    };
    let summary_path = match &config.outputs.summary_json {
        Some(name) => {
            let path = config.out_dir.join(name);
            let text = serde_json::to_string_pretty(&summary)?;
            write_file(&path, format!("{text}\n").as_bytes())?;
            Some(path)
        }
        None => None,
    };
    Ok(ExperimentOutcome {
        summary,
        summary_path,
        exit_code: if diverged { EXIT_DIVERGED } else { EXIT_OK },
    })
}

#[derive(Clone, Debug, Default)]
pub struct ReplayOutcome {
    pub checked: usize,
    /// Trace files whose contents differ from the re-run.
    pub mismatches: Vec<PathBuf>,
}

impl ReplayOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.mismatches.is_empty() {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

/// Re-runs every seed recorded in a summary and compares the regenerated
/// trace CSVs byte for byte with the files on disk.
pub fn replay(summary_path: impl AsRef<Path>) -> Result<ReplayOutcome> {
    let summary_path = summary_path.as_ref();
    let text = fs::read_to_string(summary_path).map_err(|e| {
        Error::config(format!("cannot read {}: {e}", summary_path.display()))
    })?;
    let summary: Summary = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("invalid summary: {e}")))?;
    let dir = summary_path.parent().unwrap_or(Path::new("."));
    let problem = summary.config.build_problem()?;
    let jobs: Vec<(&RunSummary, PathBuf)> = summary
        .runs
        .iter()
        .filter_map(|r| r.trace_csv.as_ref().map(|t| (r, dir.join(t))))
        .collect();
    let verdicts: Vec<Result<Option<PathBuf>>> = jobs
        .par_iter()
        .map(|(r, path)| {
            let trace = match estimator::run(&problem, &r.page_config) {
                Ok(out) => out.trace,
                Err(Error::Divergence {
                    partial: Some(tr), ..
                }) => *tr,
                Err(e) => return Err(e),
            };
            let fresh = render_trace_csv(&trace)?;
            let stored = fs::read(path)?;
            Ok((fresh != stored).then(|| path.clone()))
        })
        .collect();
    let mut out = ReplayOutcome::default();
    for v in verdicts {
        out.checked += 1;
        if let Some(p) = v? {
            out.mismatches.push(p);
        }
    }
    Ok(out)
}
