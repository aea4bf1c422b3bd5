use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Constants, Dataset, Objective, Problem};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{stream, STREAM_PROBLEM};

/// `f_i(x) = log(1 + exp(−y_i a_iᵀx)) + α Σ_j x_j²/(1 + x_j²)`.
#[derive(Clone, Debug)]
pub struct NonconvexLogreg {
    data: Dataset,
    alpha: f64,
}

/// `log(1 + eᵗ)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `1/(1 + e⁻ᵗ)` without overflow.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl NonconvexLogreg {
    fn regularizer(&self, x: &[f64]) -> f64 {
        self.alpha * x.iter().map(|v| v * v / (1.0 + v * v)).sum::<f64>()
    }

    fn add_regularizer_grad(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            let s = 1.0 + v * v;
            *o += self.alpha * 2.0 * v / (s * s);
        }
    }

    /// `d/dt log(1 + exp(−y t))` at `t = a_iᵀx`.
    fn loss_slope(&self, i: usize, x: &[f64]) -> f64 {
        let y = self.data.labels[i];
        -y * sigmoid(-y * linalg::dot(self.data.row(i), x))
    }
}

impl Objective for NonconvexLogreg {
    fn dim(&self) -> usize {
        self.data.d
    }

    fn num_components(&self) -> usize {
        self.data.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        let loss: f64 = (0..self.data.n)
            .map(|i| softplus(-self.data.labels[i] * linalg::dot(self.data.row(i), x)))
            .sum();
        loss / self.data.n as f64 + self.regularizer(x)
    }

    fn component_grad(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let s = self.loss_slope(i, x);
        for (o, a) in out.iter_mut().zip(self.data.row(i)) {
            *o = s * a;
        }
        self.add_regularizer_grad(x, out);
    }

    fn full_grad(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let inv = 1.0 / self.data.n as f64;
        for i in 0..self.data.n {
            linalg::axpy(self.loss_slope(i, x) * inv, self.data.row(i), out);
        }
        self.add_regularizer_grad(x, out);
    }
}

/// Logistic loss with a nonconvex regularizer over `data`.
///
/// Declared `L = √(mean_i (‖a_i‖²/4 + 2α)²)`: the loss part of `∇f_i` is
/// `‖a_i‖²/4`-Lipschitz and the regularizer gradient is `2α`-Lipschitz.
/// Declared `σ = √(mean_i ‖a_i‖²)`, since the loss slope lies in `[−1, 1]`
/// and the regularizer is shared by every component. `μ` and `f*` are
/// unknown.
pub fn make_nonconvex_logreg(data: Dataset, alpha: f64) -> Result<Problem> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::config("alpha must be a finite nonnegative number"));
    }
    if data.n == 0 || data.d == 0 {
        return Err(Error::Data("dataset is empty".into()));
    }
    if data.features.len() != data.n * data.d || data.labels.len() != data.n {
        return Err(Error::Data("dataset shape mismatch".into()));
    }
    if let Some(i) = data.labels.iter().position(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::Data(format!("label of sample {i} is not ±1")));
    }
    let n = data.n as f64;
    let row_sq: Vec<f64> = (0..data.n).map(|i| linalg::norm_sq(data.row(i))).collect();
    let l = (row_sq.iter().map(|s| (s / 4.0 + 2.0 * alpha).powi(2)).sum::<f64>() / n).sqrt();
    let sigma = (row_sq.iter().sum::<f64>() / n).sqrt();
    let constants = Constants {
        l: Some(l),
        sigma: Some(sigma),
        mu: None,
        f_star: None,
    };
    let id = format!("logreg(n={},d={},alpha={alpha})", data.n, data.d);
    Problem::new(id, Arc::new(NonconvexLogreg { data, alpha }), constants)
}

/// Gaussian features scaled by `1/√d`, labels from a random linear rule with
/// 10% of them flipped.
pub fn make_synthetic_logreg(n: usize, d: usize, alpha: f64, seed: u64) -> Result<Problem> {
    if n == 0 || d == 0 {
        return Err(Error::config("synthetic logreg needs n, d ≥ 1"));
    }
    let mut rng = stream(seed, STREAM_PROBLEM);
    let w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let scale = 1.0 / (d as f64).sqrt();
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut y = if linalg::dot(&row, &w) >= 0.0 { 1.0 } else { -1.0 };
        if rng.random::<f64>() < 0.1 {
            y = -y;
        }
        features.extend(row);
        labels.push(y);
    }
    let p = make_nonconvex_logreg(Dataset { n, d, features, labels }, alpha)?;
    let id = format!("synthetic_logreg(n={n},d={d},alpha={alpha},seed={seed})");
    Problem::new(id, p.objective().clone(), p.constants.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::parse_dense_csv;

    #[test]
    fn value_at_origin_is_log_two() {
        let ds = parse_dense_csv("1,0,1\n0,1,-1\n2,2,1\n").unwrap();
        let p = make_nonconvex_logreg(ds, 0.5).unwrap();
        assert!((p.value(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!(p.constants.f_star.is_none());
        assert!(p.constants.mu.is_none());
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(-1000.0), 0.0);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-16);
    }

    #[test]
    fn declared_constants_hold_on_samples() {
        let p = make_synthetic_logreg(100, 4, 0.1, 3).unwrap();
        let l = p.constants.l.unwrap();
        let s2 = p.constants.sigma.unwrap().powi(2);
        let mut rng = stream(1, 0);
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let y: Vec<f64> = (0..4).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            assert!(p.mean_sq_grad_difference(&x, &y) <= l * l * linalg::dist_sq(&x, &y));
            assert!(p.gradient_variance(&x) <= s2);
        }
    }

    #[test]
    fn full_grad_matches_default_average() {
        let p = make_synthetic_logreg(30, 3, 0.2, 8).unwrap();
        let x = [0.4, -1.0, 2.0];
        let fast = p.grad(&x);
        let mut slow = [0.0; 3];
        let mut tmp = [0.0; 3];
        for i in 0..30 {
            p.component_grad(i, &x, &mut tmp);
            linalg::axpy(1.0, &tmp, &mut slow);
        }
        for k in 0..3 {
            assert!((fast[k] - slow[k] / 30.0).abs() < 1e-13);
        }
    }
}
