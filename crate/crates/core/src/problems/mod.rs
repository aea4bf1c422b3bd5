//! Finite-sum oracles `f(x) = (1/n) Σ f_i(x)` with their declared constants.
//!
//! An [`Objective`] supplies values and gradients; a [`Problem`] wraps one
//! together with the constants the planner needs (average smoothness `L`,
//! variance bound `σ`, PL constant `μ`, optimal value `f*`), a start point,
//! and whether it is being treated as a stream.

mod data;
mod hard;
mod logreg;
mod pl_sine;
mod quadratic;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub use data::{load_dense_csv, load_sparse, parse_dense_csv, parse_sparse, Dataset};
pub use hard::{make_hard_instance, HardInstance};
pub use logreg::{make_nonconvex_logreg, make_synthetic_logreg, NonconvexLogreg};
pub use pl_sine::{make_pl_sine, PlSine};
pub use quadratic::{make_quadratic, Quadratic};

/// A differentiable finite sum. Implementations are immutable after
/// construction and must be callable from many threads at once.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn num_components(&self) -> usize;

    /// `f(x)`, the average of the component values.
    fn value(&self, x: &[f64]) -> f64;

    /// Writes `∇f_i(x)` into `out`.
    fn component_grad(&self, i: usize, x: &[f64], out: &mut [f64]);

    /// Writes `∇f(x)` into `out`. The default averages every component
    /// gradient in index order; implementations with a cheaper closed form
    /// should override it.
    fn full_grad(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; self.dim()];
        out.fill(0.0);
        for i in 0..self.num_components() {
            self.component_grad(i, x, &mut tmp);
            linalg::axpy(1.0, &tmp, out);
        }
        let n = self.num_components() as f64;
        for v in out.iter_mut() {
            *v /= n;
        }
    }
}

/// Problem constants. Every entry is optional: absent means unknown, never
/// zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Average-smoothness constant: `E_i‖∇f_i(x) − ∇f_i(y)‖² ≤ L²‖x − y‖²`.
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// Variance bound: `E_i‖∇f_i(x) − ∇f(x)‖² ≤ σ²`.
    pub sigma: Option<f64>,
    /// PL constant: `‖∇f(x)‖² ≥ 2μ(f(x) − f*)`.
    pub mu: Option<f64>,
    pub f_star: Option<f64>,
}

#[derive(Clone)]
pub struct Problem {
    id: String,
    objective: Arc<dyn Objective>,
    pub constants: Constants,
    x0: Vec<f64>,
    x_star: Option<Vec<f64>>,
    online: bool,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("id", &self.id)
            .field("n", &self.n())
            .field("d", &self.dim())
            .field("constants", &self.constants)
            .field("online", &self.online)
            .finish()
    }
}

impl Problem {
    /// Wraps an objective. The start point defaults to the zero vector.
    pub fn new(
        id: impl Into<String>,
        objective: Arc<dyn Objective>,
        constants: Constants,
    ) -> Result<Self> {
        let d = objective.dim();
        if d == 0 {
            return Err(Error::config("problem dimension must be at least 1"));
        }
        if objective.num_components() == 0 {
            return Err(Error::config("problem needs at least one component"));
        }
        Ok(Self {
            id: id.into(),
            objective,
            constants,
            x0: vec![0.0; d],
            x_star: None,
            online: false,
        })
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.dim() {
            return Err(Error::config(format!(
                "start point has dimension {}, problem has {}",
                x0.len(),
                self.dim()
            )));
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn with_x_star(mut self, x_star: Vec<f64>) -> Result<Self> {
        if x_star.len() != self.dim() {
            return Err(Error::config("minimizer dimension mismatch"));
        }
        self.x_star = Some(x_star);
        Ok(self)
    }

    pub fn with_constants(mut self, constants: Constants) -> Self {
        self.constants = constants;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n(&self) -> usize {
        self.objective.num_components()
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn x_star(&self) -> Option<&[f64]> {
        self.x_star.as_deref()
    }

    /// True for stream views: planners must size batches from `σ` and not
    /// assume full gradients are affordable.
    pub fn is_online(&self) -> bool {
        self.online
    }

    pub fn objective(&self) -> &Arc<dyn Objective> {
        &self.objective
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.objective.value(x)
    }

    pub fn component_grad(&self, i: usize, x: &[f64], out: &mut [f64]) {
        self.objective.component_grad(i, x, out)
    }

    pub fn full_grad(&self, x: &[f64], out: &mut [f64]) {
        self.objective.full_grad(x, out)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.full_grad(x, &mut g);
        g
    }

    /// `Δ₀ = f(x⁰) − f*` when `f*` is known.
    pub fn delta0(&self) -> Option<f64> {
        self.constants
            .f_star
            .map(|fs| self.value(&self.x0) - fs)
    }

    /// Exact `E_i‖∇f_i(x) − ∇f(x)‖²` by enumerating every component.
    pub fn gradient_variance(&self, x: &[f64]) -> f64 {
        let full = self.grad(x);
        let mut tmp = vec![0.0; self.dim()];
        let mut acc = 0.0;
        for i in 0..self.n() {
            self.component_grad(i, x, &mut tmp);
            acc += linalg::dist_sq(&tmp, &full);
        }
        acc / self.n() as f64
    }

    /// Exact `E_i‖∇f_i(x) − ∇f_i(y)‖²` by enumerating every component.
    pub fn mean_sq_grad_difference(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut gx = vec![0.0; self.dim()];
        let mut gy = vec![0.0; self.dim()];
        let mut acc = 0.0;
        for i in 0..self.n() {
            self.component_grad(i, x, &mut gx);
            self.component_grad(i, y, &mut gy);
            acc += linalg::dist_sq(&gx, &gy);
        }
        acc / self.n() as f64
    }
}

/// Treats a finite-sum problem as an online one. The oracle and declared
/// constants pass through unchanged; only the planning semantics differ.
pub fn stream_view(problem: &Problem) -> Problem {
    let mut p = problem.clone();
    p.online = true;
    if !p.id.ends_with("+stream") {
        p.id.push_str("+stream");
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_view_passes_oracle_through() {
        let q = make_quadratic(20, 3, 0.2, 1.0, 5).unwrap();
        let s = stream_view(&q);
        assert!(s.is_online());
        assert!(!q.is_online());
        assert_eq!(s.constants, q.constants);
        assert_eq!(s.constants.sigma, q.constants.sigma);
        let x = [0.3, -1.2, 2.0];
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        for i in 0..20 {
            q.component_grad(i, &x, &mut a);
            s.component_grad(i, &x, &mut b);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn start_point_dimension_is_checked() {
        let q = make_quadratic(4, 3, 0.2, 1.0, 5).unwrap();
        assert!(matches!(q.with_x0(vec![0.0; 2]), Err(Error::Config(_))));
    }
}
