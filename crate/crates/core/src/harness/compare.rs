use std::collections::BTreeMap;
use std::fs;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::experiment::{run_experiment, ExperimentOutcome};
use super::{EXIT_DIVERGED, EXIT_OK};
use crate::error::{Error, Result};
use crate::linalg::median_opt;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: Method,
    pub seed: u64,
    pub reached_target: bool,
    pub grad_evals_to_target: Option<u64>,
    pub wall_grad_evals_to_target: Option<u64>,
    pub iterations: usize,
}

/// Medians over seeds; a seed that missed the target counts as `+∞`, and
/// an infinite median is reported as `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodMedians {
    pub method: Method,
    pub median_grad_evals: Option<f64>,
    pub median_wall_grad_evals: Option<f64>,
    pub reached: usize,
    pub seeds: usize,
}

#[derive(Clone, Debug)]
pub struct CompareOutcome {
    pub rows: Vec<CompareRow>,
    pub medians: Vec<MethodMedians>,
    pub experiments: BTreeMap<String, ExperimentOutcome>,
    pub exit_code: i32,
}

impl CompareOutcome {
    pub fn median(&self, method: Method) -> Option<&MethodMedians> {
        self.medians.iter().find(|m| m.method == method)
    }
}

#[derive(Serialize)]
struct CompareJson<'a> {
    rows: &'a [CompareRow],
    medians: &'a [MethodMedians],
}

/// Runs each listed method on the same problem and seeds. Each method's
/// traces and summary go to `out_dir/<method>/`; the table goes to
/// `out_dir/compare.csv` and `out_dir/compare.json`.
pub fn compare_methods(config: &ExperimentConfig) -> Result<CompareOutcome> {
    if config.methods.len() < 2 {
        return Err(Error::Usage("compare needs at least two methods".into()));
    }
    let mut seen = config.methods.clone();
    seen.sort_by_key(|m| m.as_str());
    seen.dedup();
    if seen.len() != config.methods.len() {
        return Err(Error::Usage("compare methods must be distinct".into()));
    }
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    let mut experiments = BTreeMap::new();
    let mut exit_code = EXIT_OK;
    for &method in &config.methods {
        let mut sub = config.clone();
        sub.regime = method;
        sub.methods.clear();
        sub.out_dir = config.out_dir.join(method.as_str());
        let outcome = run_experiment(&sub)?;
        if outcome.exit_code == EXIT_DIVERGED {
            exit_code = EXIT_DIVERGED;
        }
        let mut nominal = Vec::new();
        let mut wall = Vec::new();
        for r in &outcome.summary.runs {
            rows.push(CompareRow {
                method,
                seed: r.seed,
                reached_target: r.reached_target,
                grad_evals_to_target: r.grad_evals_to_target,
                wall_grad_evals_to_target: r.wall_grad_evals_to_target,
                iterations: r.iterations,
            });
            nominal.push(r.grad_evals_to_target.map(|v| v as f64));
            wall.push(r.wall_grad_evals_to_target.map(|v| v as f64));
        }
        medians.push(MethodMedians {
            method,
            median_grad_evals: median_opt(&nominal),
            median_wall_grad_evals: median_opt(&wall),
            reached: nominal.iter().filter(|v| v.is_some()).count(),
            seeds: nominal.len(),
        });
        experiments.insert(method.as_str().to_string(), outcome);
    }

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record([
        "method",
        "seed",
        "reached_target",
        "grad_evals_to_target",
        "wall_grad_evals_to_target",
        "iterations",
    ])?;
    let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &rows {
        w.write_record([
            r.method.as_str().to_string(),
            r.seed.to_string(),
            r.reached_target.to_string(),
            opt(r.grad_evals_to_target),
            opt(r.wall_grad_evals_to_target),
            r.iterations.to_string(),
        ])?;
    }
    let csv_bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    fs::write(config.out_dir.join("compare.csv"), csv_bytes)?;
    let json = serde_json::to_string_pretty(&CompareJson {
        rows: &rows,
        medians: &medians,
    })?;
    fs::write(config.out_dir.join("compare.json"), format!("{json}\n"))?;

    Ok(CompareOutcome {
        rows,
        medians,
        experiments,
        exit_code,
    })
}
