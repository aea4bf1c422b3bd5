use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Constants, Objective, Problem};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{stream, STREAM_PROBLEM};

/// `f_i(x) = ½ xᵀA_i x − b_iᵀx` with every `A_i` diagonal in one shared
/// orthonormal basis `Q`.
///
/// In eigen-coordinates `z = Qᵀx` the component curvatures are
/// `λ_{i,k} = m_k + a_k ε_{i,k}` where `ε_{·,k}` has zero mean and unit mean
/// square over `i`. Then `mean_i λ_{i,k} = m_k` (the Hessian of `f`) and
/// `mean_i λ_{i,k}² = m_k² + a_k²`, which is set to `L²` in every direction,
/// so average smoothness holds with equality.
#[derive(Clone, Debug)]
pub struct Quadratic {
    n: usize,
    d: usize,
    /// Column `k` (contiguous) is the `k`-th eigenvector.
    basis: Vec<f64>,
    spectra: Vec<f64>,
    shifts: Vec<f64>,
    mean_spectrum: Vec<f64>,
    mean_shift: Vec<f64>,
    /// Per direction: `a_k`, `mean_i ε_{i,k}(β_{i,k} − β̄_k)`, `mean_i (β_{i,k} − β̄_k)²`.
    amp: Vec<f64>,
    cross: Vec<f64>,
    shift_var: Vec<f64>,
}

impl Quadratic {
    fn to_eigen(&self, x: &[f64], z: &mut [f64]) {
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = linalg::dot(&self.basis[k * self.d..(k + 1) * self.d], x);
        }
    }

    fn from_eigen(&self, w: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (k, wk) in w.iter().enumerate() {
            linalg::axpy(*wk, &self.basis[k * self.d..(k + 1) * self.d], out);
        }
    }

    /// Eigenvalues of the Hessian of `f`.
    pub fn mean_spectrum(&self) -> &[f64] {
        &self.mean_spectrum
    }

    /// `max_k √(mean_i λ_{i,k}²)`, the smallest valid average-smoothness
    /// constant.
    pub fn exact_avg_smoothness(&self) -> f64 {
        (0..self.d)
            .map(|k| {
                let s: f64 = (0..self.n)
                    .map(|i| self.spectra[i * self.d + k].powi(2))
                    .sum();
                (s / self.n as f64).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// The linear term `b_i` in original coordinates.
    pub fn linear_term(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.from_eigen(&self.shifts[i * self.d..(i + 1) * self.d], &mut out);
        out
    }

    /// Exact `E_i‖∇f_i(x) − ∇f(x)‖²` in `O(d²)`.
    pub fn variance_at(&self, x: &[f64]) -> f64 {
        let mut z = vec![0.0; self.d];
        self.to_eigen(x, &mut z);
        (0..self.d)
            .map(|k| {
                let a = self.amp[k];
                a * a * z[k] * z[k] - 2.0 * a * z[k] * self.cross[k] + self.shift_var[k]
            })
            .sum::<f64>()
            .max(0.0)
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.d
    }

    fn num_components(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut z = vec![0.0; self.d];
        self.to_eigen(x, &mut z);
        (0..self.d)
            .map(|k| 0.5 * self.mean_spectrum[k] * z[k] * z[k] - self.mean_shift[k] * z[k])
            .sum()
    }

    fn component_grad(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let mut z = vec![0.0; self.d];
        self.to_eigen(x, &mut z);
        let lam = &self.spectra[i * self.d..(i + 1) * self.d];
        let beta = &self.shifts[i * self.d..(i + 1) * self.d];
        for k in 0..self.d {
            z[k] = lam[k] * z[k] - beta[k];
        }
        self.from_eigen(&z, out);
    }

    fn full_grad(&self, x: &[f64], out: &mut [f64]) {
        let mut z = vec![0.0; self.d];
        self.to_eigen(x, &mut z);
        for k in 0..self.d {
            z[k] = self.mean_spectrum[k] * z[k] - self.mean_shift[k];
        }
        self.from_eigen(&z, out);
    }
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    (0..k)
        .map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64)
        .collect()
}

/// Centers each column of an `n × d` row-major array over its rows.
fn center_columns(v: &mut [f64], n: usize, d: usize) {
    for k in 0..d {
        let m = (0..n).map(|i| v[i * d + k]).sum::<f64>() / n as f64;
        for i in 0..n {
            v[i * d + k] -= m;
        }
    }
}

/// Random quadratic finite sum with `f` being `μ`-strongly convex and the
/// components `L`-average-smooth (exactly).
///
/// `x⁰ = 0`. The declared `σ` bounds the gradient variance on the ball
/// around `x*` of radius `‖x⁰ − x*‖`; outside that ball it can be exceeded.
pub fn make_quadratic(n: usize, d: usize, mu: f64, l: f64, seed: u64) -> Result<Problem> {
    let (quad, x_star, f_star, sigma) = generate(n, d, mu, l, seed)?;
    let constants = Constants {
        l: Some(l),
        sigma: Some(sigma),
        mu: Some(mu),
        f_star: Some(f_star),
    };
    Problem::new(
        format!("quadratic(n={n},d={d},mu={mu},L={l},seed={seed})"),
        Arc::new(quad),
        constants,
    )?
    .with_x0(vec![0.0; d])?
    .with_x_star(x_star)
}

/// Returns the objective, `x*`, `f*`, and the declared `σ`.
fn generate(
    n: usize,
    d: usize,
    mu: f64,
    l: f64,
    seed: u64,
) -> Result<(Quadratic, Vec<f64>, f64, f64)> {
    if n == 0 || d == 0 {
        return Err(Error::config("quadratic needs n, d ≥ 1"));
    }
    if !(mu > 0.0 && mu <= l && l.is_finite()) {
        return Err(Error::config(format!(
            "quadratic needs 0 < mu ≤ L, got mu = {mu}, L = {l}"
        )));
    }
    let mut rng = stream(seed, STREAM_PROBLEM);
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    let mut basis = vec![0.0; d * d];
    for k in 0..d {
        for j in 0..d {
            basis[k * d + j] = q[(j, k)];
        }
    }

    let mean_spectrum = if n == 1 {
        if d == 1 { vec![l] } else { linspace(mu, l, d) }
    } else {
        linspace(mu, 0.5 * (mu + l), d)
    };
    let amp: Vec<f64> = if n == 1 {
        vec![0.0; d]
    } else {
        mean_spectrum.iter().map(|m| (l * l - m * m).max(0.0).sqrt()).collect()
    };

    let mut eps: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    let mut noise: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    if n == 1 {
        eps.fill(0.0);
        noise.fill(0.0);
    } else {
        center_columns(&mut eps, n, d);
        center_columns(&mut noise, n, d);
        for k in 0..d {
            let ms = (0..n).map(|i| eps[i * d + k].powi(2)).sum::<f64>() / n as f64;
            let s = ms.sqrt();
            for i in 0..n {
                eps[i * d + k] /= s;
            }
        }
    }

    let z_star: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let mean_shift: Vec<f64> = (0..d).map(|k| mean_spectrum[k] * z_star[k]).collect();

    let mut spectra = vec![0.0; n * d];
    let mut shifts = vec![0.0; n * d];
    let mut cross = vec![0.0; d];
    let mut shift_var = vec![0.0; d];
    for i in 0..n {
        for k in 0..d {
            let idx = i * d + k;
            spectra[idx] = mean_spectrum[k] + amp[k] * eps[idx];
            shifts[idx] = mean_shift[k] + noise[idx];
            cross[k] += eps[idx] * noise[idx];
            shift_var[k] += noise[idx] * noise[idx];
        }
    }
    for k in 0..d {
        cross[k] /= n as f64;
        shift_var[k] /= n as f64;
    }

    let quad = Quadratic {
        n,
        d,
        basis,
        spectra,
        shifts,
        mean_spectrum,
        mean_shift,
        amp,
        cross,
        shift_var,
    };

    let mut x_star = vec![0.0; d];
    quad.from_eigen(&z_star, &mut x_star);
    let f_star = -0.5
        * (0..d)
            .map(|k| quad.mean_shift[k] * z_star[k])
            .sum::<f64>();

    // In eigen-coordinates the variance is ‖w‖² + Σ_k (s_k − c_k²) with
    // w_k = a_k z_k − c_k. Over the ball ‖z − z*‖ ≤ R the norm of w is at
    // most ‖w(z*)‖ + max_k a_k · R.
    let radius = linalg::norm(&x_star);
    let w_star: Vec<f64> = (0..d)
        .map(|k| quad.amp[k] * z_star[k] - quad.cross[k])
        .collect();
    let a_max = quad.amp.iter().cloned().fold(0.0, f64::max);
    let floor: f64 = (0..d)
        .map(|k| (quad.shift_var[k] - quad.cross[k].powi(2)).max(0.0))
        .sum();
    let reach = linalg::norm(&w_star) + a_max * radius;
    let sigma = (reach * reach + floor).sqrt();
    Ok((quad, x_star, f_star, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_scalar_component() {
        let p = make_quadratic(1, 1, 2.0, 2.0, 3).unwrap();
        let x_star = p.x_star().unwrap()[0];
        // f_0(x) = L x²/2 − b₀x with x* = b₀/L
        let b0 = 2.0 * x_star;
        for x in [-1.0, 0.0, 0.7, 3.0] {
            let mut g = [0.0];
            p.component_grad(0, &[x], &mut g);
            assert!((g[0] - (2.0 * x - b0)).abs() < 1e-14);
        }
        assert_eq!(p.constants.sigma, Some(0.0));
    }

    #[test]
    fn average_smoothness_is_exact() {
        let (q, ..) = generate(50, 6, 0.1, 1.0, 9).unwrap();
        assert!((q.exact_avg_smoothness() - 1.0).abs() < 1e-12);
        let p = make_quadratic(50, 6, 0.1, 1.0, 9).unwrap();
        let x: Vec<f64> = (0..6).map(|k| k as f64 * 0.3 - 1.0).collect();
        let y: Vec<f64> = (0..6).map(|k| (k as f64).sin()).collect();
        let lhs = p.mean_sq_grad_difference(&x, &y);
        let rhs = linalg::dist_sq(&x, &y);
        assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn minimizer_and_optimal_value() {
        let p = make_quadratic(30, 5, 0.2, 2.0, 1).unwrap();
        let xs = p.x_star().unwrap().to_vec();
        assert!(linalg::norm(&p.grad(&xs)) < 1e-12);
        assert!((p.value(&xs) - p.constants.f_star.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn full_grad_matches_component_average() {
        let (q, ..) = generate(40, 4, 0.3, 1.5, 2).unwrap();
        let x = [0.5, -0.25, 2.0, 1.0];
        let mut fast = [0.0; 4];
        q.full_grad(&x, &mut fast);
        let mut slow = [0.0; 4];
        let mut tmp = [0.0; 4];
        for i in 0..40 {
            q.component_grad(i, &x, &mut tmp);
            linalg::axpy(1.0 / 40.0, &tmp, &mut slow);
        }
        for k in 0..4 {
            assert!((fast[k] - slow[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_variance_matches_enumeration() {
        let p = make_quadratic(25, 3, 0.1, 1.0, 4).unwrap();
        let (q, ..) = generate(25, 3, 0.1, 1.0, 4).unwrap();
        let x = [1.0, -2.0, 0.5];
        let a = q.variance_at(&x);
        let b = p.gradient_variance(&x);
        assert!((a - b).abs() < 1e-10 * b.max(1.0));
    }

    #[test]
    fn declared_sigma_covers_the_ball_around_the_minimizer() {
        let (q, xs, _, sigma) = generate(40, 4, 0.1, 1.0, 12).unwrap();
        let r = linalg::norm(&xs);
        let mut rng = stream(5, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..2000 {
            let pt = crate::rng::uniform_in_ball(&mut rng, &xs, r);
            worst = worst.max(q.variance_at(&pt));
        }
        assert!(worst <= sigma * sigma);
        assert!(worst.sqrt() > 0.5 * sigma, "bound is very loose: {} vs {sigma}", worst.sqrt());
    }

    #[test]
    fn hessian_spectrum_spans_mu() {
        let (q, ..) = generate(10, 4, 0.05, 1.0, 0).unwrap();
        let min = q.mean_spectrum().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(make_quadratic(4, 2, 2.0, 1.0, 0).is_err());
        assert!(make_quadratic(4, 2, 0.0, 1.0, 0).is_err());
        assert!(make_quadratic(0, 2, 0.5, 1.0, 0).is_err());
    }
}
