use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use page_core::harness::{self, ExperimentConfig, SuiteConfig, EXIT_CHECK_FAILED, EXIT_OK};
use page_core::theory::{self, Plan, Regime};
use page_core::{Error, Result};

#[derive(Parser)]
#[command(name = "page", version, about = "Probabilistic gradient estimator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the parameter plan for a regime as JSON.
    Plan(PlanArgs),
    /// Run an experiment config: one trace CSV per seed plus a summary.
    Run(RunArgs),
    /// Run every method listed in the config and tabulate gradient counts.
    Compare(RunArgs),
    /// Run the verification checks on the shipped problems.
    Verify(VerifyArgs),
    /// Re-run the seeds in a summary and diff the trace files.
    Replay {
        summary: PathBuf,
    },
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, value_parser = parse_regime)]
    regime: Regime,
    /// Number of components; omit for an unbounded stream.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "L")]
    l: f64,
    #[arg(long)]
    delta0: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    b_prime: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Replaces the config's seed list; may be repeated.
    #[arg(long)]
    seed: Vec<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite config (JSON); defaults to every check.
    config: Option<PathBuf>,
    #[arg(long)]
    l_scale: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write JSON-lines reports here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_regime(s: &str) -> std::result::Result<Regime, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown regime {s:?}"))
}

fn need(v: Option<usize>, what: &str) -> Result<usize> {
    v.ok_or_else(|| Error::Config(format!("--n is required for the {what} regime")))
}

fn plan(a: &PlanArgs) -> Result<Plan> {
    let mu = || {
        a.mu.ok_or_else(|| Error::Config("--mu is required for PL regimes".into()))
    };
    match a.regime {
        Regime::Finite => theory::plan_finite(need(a.n, "finite")?, a.l, a.delta0, a.eps, a.b_prime),
        Regime::Gd => theory::plan_gd(need(a.n, "gd")?, a.l, a.delta0, a.eps),
        Regime::Online => theory::plan_online(a.sigma, a.n, a.l, a.delta0, a.eps, a.b_prime),
        Regime::Sgd => theory::plan_sgd(a.sigma, a.n, a.l, a.delta0, a.eps),
        Regime::FinitePl => {
            theory::plan_finite_pl(need(a.n, "finite_pl")?, a.l, mu()?, a.delta0, a.eps, a.b_prime)
        }
        Regime::OnlinePl => {
            theory::plan_online_pl(a.sigma, a.n, a.l, mu()?, a.delta0, a.eps, a.b_prime)
        }
    }
}

fn load_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::load(&a.config)?;
    if !a.seed.is_empty() {
        c.seeds = a.seed.clone();
    }
    if let Some(d) = &a.out_dir {
        c.out_dir = d.clone();
    }
    if a.max_iters.is_some() {
        c.max_iters = a.max_iters;
    }
    Ok(c)
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Plan(a) => {
            println!("{}", serde_json::to_string_pretty(&plan(&a)?)?);
            Ok(EXIT_OK)
        }
        Command::Run(a) => {
            let out = harness::run_experiment(&load_config(&a)?)?;
            if let Some(p) = &out.summary_path {
                eprintln!("summary written to {}", p.display());
            }
            for r in &out.summary.runs {
                eprintln!(
                    "seed {}: {} iterations, target {}, #grad {}",
                    r.seed,
                    r.iterations,
                    if r.reached_target { "reached" } else { "missed" },
                    r.grad_evals_to_target.unwrap_or(r.total_grad_evals)
                );
            }
            Ok(out.exit_code)
        }
        Command::Compare(a) => {
            let out = harness::compare_methods(&load_config(&a)?)?;
            for m in &out.medians {
                let fmt = |v: Option<f64>| v.map_or("inf".to_string(), |x| x.to_string());
                println!(
                    "{}\tmedian #grad {}\tmedian oracle calls {}\treached {}/{}",
                    m.method.as_str(),
                    fmt(m.median_grad_evals),
                    fmt(m.median_wall_grad_evals),
                    m.reached,
                    m.seeds
                );
            }
            Ok(out.exit_code)
        }
        Command::Verify(a) => {
            let mut c = match &a.config {
                Some(p) => {
                    let text = std::fs::read_to_string(p)
                        .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                    serde_json::from_str::<SuiteConfig>(&text)
                        .map_err(|e| Error::Config(format!("invalid suite config: {e}")))?
                }
                None => SuiteConfig::default(),
            };
            if let Some(s) = a.l_scale {
                c.l_scale = s;
            }
            if let Some(s) = a.seed {
                c.seed = s;
            }
            if a.out.is_some() {
                c.output = a.out.clone();
            }
            let out = harness::verify_suite(&c)?;
            for r in &out.reports {
                println!("{}", r.to_json_line());
            }
            Ok(out.exit_code)
        }
        Command::Replay { summary } => {
            let out = harness::replay(&summary)?;
            for m in &out.mismatches {
                eprintln!("mismatch: {}", m.display());
            }
            eprintln!(
                "{} traces checked, {} mismatched",
                out.checked,
                out.mismatches.len()
            );
            Ok(if out.mismatches.is_empty() { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            harness::exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}
