//! Sample-based estimates of the problem constants.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::Problem;
use crate::rng::{self, uniform_in_ball};

/// Above this many components, expectations over `i` are estimated from
/// this many sampled indices instead of enumerated.
const EXHAUSTIVE_LIMIT: usize = 10_000;

/// Where and how many points to sample. `safety` multiplies the result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub count: usize,
    pub radius: f64,
    pub seed: u64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    /// Ball center; `x⁰` when absent.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
}

fn default_safety() -> f64 {
    1.1
}

impl SampleSpec {
    pub fn new(count: usize, radius: f64, seed: u64) -> Self {
        Self {
            count,
            radius,
            seed,
            safety: default_safety(),
            center: None,
        }
    }

    pub fn centered(mut self, center: Vec<f64>) -> Self {
        self.center = Some(center);
        self
    }

    fn center<'a>(&'a self, problem: &'a Problem) -> Result<&'a [f64]> {
        match &self.center {
            Some(c) if c.len() != problem.dim() => {
                Err(Error::config("sample center dimension mismatch"))
            }
            Some(c) => Ok(c),
            None => Ok(problem.x0()),
        }
    }

    pub fn with_safety(mut self, safety: f64) -> Self {
        self.safety = safety;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::config("sample count must be at least 1"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::config("sample radius must be positive"));
        }
        if !(self.safety > 0.0 && self.safety.is_finite()) {
            return Err(Error::config("safety factor must be positive"));
        }
        Ok(())
    }
}

/// Component indices to average over: all of them, or a fixed sample.
fn index_set(problem: &Problem, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = problem.n();
    if n <= EXHAUSTIVE_LIMIT {
        (0..n).collect()
    } else {
        (0..EXHAUSTIVE_LIMIT).map(|_| rng::index(rng, n)).collect()
    }
}

fn mean_sq_difference(problem: &Problem, idx: &[usize], x: &[f64], y: &[f64]) -> f64 {
    let d = problem.dim();
    let (mut gx, mut gy) = (vec![0.0; d], vec![0.0; d]);
    let mut acc = 0.0;
    for &i in idx {
        problem.component_grad(i, x, &mut gx);
        problem.component_grad(i, y, &mut gy);
        acc += linalg::dist_sq(&gx, &gy);
    }
    acc / idx.len() as f64
}

fn variance(problem: &Problem, idx: &[usize], x: &[f64]) -> f64 {
    let full = problem.grad(x);
    let mut g = vec![0.0; problem.dim()];
    let mut acc = 0.0;
    for &i in idx {
        problem.component_grad(i, x, &mut g);
        acc += linalg::dist_sq(&g, &full);
    }
    acc / idx.len() as f64
}

/// `safety · max √(E_i‖∇f_i(x) − ∇f_i(y)‖²)/‖x − y‖` over pairs drawn
/// uniformly from the sampling ball.
pub fn estimate_l(problem: &Problem, spec: &SampleSpec) -> Result<f64> {
    spec.validate()?;
    let center = spec.center(problem)?;
    let mut rng = rng::stream(spec.seed, 0);
    let idx = index_set(problem, &mut rng);
    let mut pairs = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        for _ in 0..100 {
            let x = uniform_in_ball(&mut rng, center, spec.radius);
            let y = uniform_in_ball(&mut rng, center, spec.radius);
            if linalg::dist_sq(&x, &y) > 0.0 {
                pairs.push((x, y));
                break;
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Estimation("every sampled pair was degenerate".into()));
    }
    let ratios: Vec<f64> = pairs
        .par_iter()
        .map(|(x, y)| (mean_sq_difference(problem, &idx, x, y) / linalg::dist_sq(x, y)).sqrt())
        .collect();
    let max = ratios.into_iter().fold(0.0, f64::max);
    Ok(spec.safety * max)
}

/// `safety · max √(E_i‖∇f_i(x) − ∇f(x)‖²)` over points drawn uniformly from
/// the sampling ball.
pub fn estimate_sigma(problem: &Problem, spec: &SampleSpec) -> Result<f64> {
    spec.validate()?;
    let center = spec.center(problem)?;
    let mut rng = rng::stream(spec.seed, 0);
    let idx = index_set(problem, &mut rng);
    let points: Vec<Vec<f64>> = (0..spec.count)
        .map(|_| uniform_in_ball(&mut rng, center, spec.radius))
        .collect();
    let vars: Vec<f64> = points.par_iter().map(|x| variance(problem, &idx, x)).collect();
    let max = vars.into_iter().fold(0.0, f64::max);
    Ok(spec.safety * max.sqrt())
}

/// Points at which the PL inequality is evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    /// Evenly spaced points on `[lo, hi]`, endpoints included (1-d only).
    Interval { lo: f64, hi: f64, points: usize },
    /// Tensor grid with `points_per_axis` points along each axis.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        points_per_axis: usize,
    },
    /// Uniform draws from a ball; the center defaults to `x*`, else `x⁰`.
    Ball {
        center: Option<Vec<f64>>,
        radius: f64,
        points: usize,
        seed: u64,
    },
}

const MAX_GRID_POINTS: usize = 10_000_000;

fn axis(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..k)
        .map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64)
        .collect()
}

impl GridSpec {
    pub fn points(&self, problem: &Problem) -> Result<Vec<Vec<f64>>> {
        let d = problem.dim();
        match self {
            GridSpec::Interval { lo, hi, points } => {
                if d != 1 {
                    return Err(Error::config("interval grids need a 1-d problem"));
                }
                if *points == 0 || !(lo <= hi) {
                    return Err(Error::config("interval grid needs lo ≤ hi and points ≥ 1"));
                }
                Ok(axis(*lo, *hi, *points).into_iter().map(|x| vec![x]).collect())
            }
            GridSpec::Box {
                lo,
                hi,
                points_per_axis,
            } => {
                if lo.len() != d || hi.len() != d {
                    return Err(Error::config("box grid bounds must match the problem dimension"));
                }
                if *points_per_axis == 0 {
                    return Err(Error::config("box grid needs points_per_axis ≥ 1"));
                }
                let total = points_per_axis
                    .checked_pow(d as u32)
                    .filter(|&t| t <= MAX_GRID_POINTS)
                    .ok_or_else(|| Error::config("box grid is too large"))?;
                let axes: Vec<Vec<f64>> = (0..d)
                    .map(|k| axis(lo[k], hi[k], *points_per_axis))
                    .collect();
                Ok((0..total)
                    .map(|mut flat| {
                        (0..d)
                            .map(|k| {
                                let j = flat % points_per_axis;
                                flat /= points_per_axis;
                                axes[k][j]
                            })
                            .collect()
                    })
                    .collect())
            }
            GridSpec::Ball {
                center,
                radius,
                points,
                seed,
            } => {
                let c = match center {
                    Some(c) if c.len() != d => {
                        return Err(Error::config("ball center dimension mismatch"))
                    }
                    Some(c) => c.clone(),
                    None => problem.x_star().unwrap_or(problem.x0()).to_vec(),
                };
                if !(*radius >= 0.0) || *points == 0 {
                    return Err(Error::config("ball grid needs radius ≥ 0 and points ≥ 1"));
                }
                let mut rng = rng::stream(*seed, 0);
                Ok((0..*points)
                    .map(|_| uniform_in_ball(&mut rng, &c, *radius))
                    .collect())
            }
        }
    }
}

/// `‖∇f(x)‖²/(2(f(x) − f*))` at each admissible grid point (gap at least
/// `10⁻¹²`), paired with the point.
pub(crate) fn pl_ratios(problem: &Problem, grid: &GridSpec) -> Result<Vec<(f64, Vec<f64>)>> {
    let f_star = problem.constants.f_star.ok_or_else(|| {
        Error::Unsupported(format!("{} has no known optimal value", problem.id()))
    })?;
    let pts = grid.points(problem)?;
    Ok(pts
        .into_par_iter()
        .filter_map(|x| {
            let gap = problem.value(&x) - f_star;
            if gap < 1e-12 {
                return None;
            }
            let g = problem.grad(&x);
            Some((linalg::norm_sq(&g) / (2.0 * gap), x))
        })
        .collect())
}

/// Smallest PL ratio over the grid.
pub fn estimate_mu_pl(problem: &Problem, grid: &GridSpec) -> Result<f64> {
    let ratios = pl_ratios(problem, grid)?;
    if ratios.is_empty() {
        return Err(Error::Estimation(
            "no grid point is far enough from the minimum".into(),
        ));
    }
    Ok(ratios.iter().map(|r| r.0).fold(f64::INFINITY, f64::min))
}
