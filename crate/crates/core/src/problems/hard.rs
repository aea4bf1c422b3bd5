use std::sync::Arc;

use super::{Constants, Objective, Problem};
use crate::error::{Error, Result};

/// `f_i(x) = c⟨v_i, x⟩ + (L/2)‖x‖²` where `v_i` is the indicator of the
/// `i`-th block of `d/n` coordinates.
///
/// Component gradients differ only by the constant `c·v_i`, so average
/// smoothness holds with equality, the gradient variance does not depend on
/// `x`, and `f` is `L`-strongly convex.
#[derive(Clone, Debug)]
pub struct HardInstance {
    n: usize,
    d: usize,
    l: f64,
    c: f64,
}

impl HardInstance {
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn block_len(&self) -> usize {
        self.d / self.n
    }

    fn block(&self, i: usize) -> std::ops::Range<usize> {
        let w = self.block_len();
        i * w..(i + 1) * w
    }
}

impl Objective for HardInstance {
    fn dim(&self) -> usize {
        self.d
    }

    fn num_components(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        // Σ_i v_i is the all-ones vector.
        let lin: f64 = x.iter().sum();
        let sq: f64 = x.iter().map(|v| v * v).sum();
        self.c / self.n as f64 * lin + 0.5 * self.l * sq
    }

    fn component_grad(&self, i: usize, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.l * xi;
        }
        for k in self.block(i) {
            out[k] += self.c;
        }
    }

    fn full_grad(&self, x: &[f64], out: &mut [f64]) {
        let shift = self.c / self.n as f64;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.l * xi + shift;
        }
    }
}

/// Builds the instance with `c = n·√(2L·Δ₀/d)`, so that `f(0) − f* = Δ₀`.
/// The minimizer is `x* = −(c/(Ln))·1`.
pub fn make_hard_instance(n: usize, d: usize, l: f64, delta0: f64) -> Result<Problem> {
    if n == 0 || d == 0 {
        return Err(Error::config("hard instance needs n, d ≥ 1"));
    }
    if !d.is_multiple_of(n) {
        return Err(Error::config(format!(
            "hard instance dimension {d} is not divisible by n = {n}"
        )));
    }
    if !(l > 0.0 && l.is_finite()) || !(delta0 > 0.0 && delta0.is_finite()) {
        return Err(Error::config("hard instance needs L > 0 and delta0 > 0"));
    }
    let c = n as f64 * (2.0 * l * delta0 / d as f64).sqrt();
    let inst = HardInstance { n, d, l, c };
    let x_star = vec![-c / (l * n as f64); d];
    let f_star = inst.value(&x_star);
    // E_i‖c v_i − c v̄‖² = c²(d/n − d/n²)
    let variance = c * c * d as f64 * (n as f64 - 1.0) / (n as f64 * n as f64);
    let constants = Constants {
        l: Some(l),
        sigma: Some(variance.sqrt()),
        mu: Some(l),
        f_star: Some(f_star),
    };
    Problem::new(
        format!("hard_instance(n={n},d={d},L={l},delta0={delta0})"),
        Arc::new(inst),
        constants,
    )?
    .with_x_star(x_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    #[test]
    fn closed_form_for_two_blocks() {
        let p = make_hard_instance(2, 4, 1.0, 1.0).unwrap();
        let s = std::f64::consts::SQRT_2;
        let xs = p.x_star().unwrap();
        for v in xs {
            assert!((v + s / 2.0).abs() < 1e-15);
        }
        let gap = p.delta0().unwrap();
        assert!((gap - 1.0).abs() < 1e-14);
    }

    #[test]
    fn initial_gradient_is_block_average() {
        let p = make_hard_instance(4, 8, 1.0, 1.0).unwrap();
        let g = p.grad(p.x0());
        // c = 4·√(2/8) = 2, so c/n = 1/2 on every coordinate.
        for v in &g {
            assert!((v - 0.5).abs() < 1e-15);
        }
        assert!(norm(&g) <= (2.0f64).sqrt() * (1.0 + 1e-15));
    }

    #[test]
    fn gd_converges_to_closed_form_minimizer() {
        let p = make_hard_instance(2, 4, 1.0, 1.0).unwrap();
        let mut x = p.x0().to_vec();
        for _ in 0..200 {
            let g = p.grad(&x);
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi -= 0.5 * gi;
            }
        }
        for (a, b) in x.iter().zip(p.x_star().unwrap()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_indivisible_dimension() {
        assert!(matches!(make_hard_instance(3, 8, 1.0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn declared_variance_is_exact_everywhere() {
        let p = make_hard_instance(4, 8, 2.0, 3.0).unwrap();
        let s2 = p.constants.sigma.unwrap().powi(2);
        for x in [vec![0.0; 8], vec![1.5; 8], (0..8).map(|k| k as f64 - 3.0).collect()] {
            let v = p.gradient_variance(&x);
            assert!((v - s2).abs() <= 1e-12 * s2);
        }
    }
}
