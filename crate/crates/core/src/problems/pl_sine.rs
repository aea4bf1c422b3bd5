use std::sync::Arc;

use super::{Constants, Objective, Problem};

/// `f(x) = x² + 3 sin² x`: nonconvex, yet PL with `μ = 1/32`.
///
/// `f''(x) = 2 + 6 cos 2x` ranges over `[−4, 8]`, so `L = 8`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PlSine;

impl Objective for PlSine {
    fn dim(&self) -> usize {
        1
    }

    fn num_components(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64 {
        let s = x[0].sin();
        x[0] * x[0] + 3.0 * s * s
    }

    fn component_grad(&self, _i: usize, x: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * x[0] + 3.0 * (2.0 * x[0]).sin();
    }

    fn full_grad(&self, x: &[f64], out: &mut [f64]) {
        self.component_grad(0, x, out)
    }
}

pub fn make_pl_sine() -> Problem {
    let constants = Constants {
        l: Some(8.0),
        sigma: Some(0.0),
        mu: Some(1.0 / 32.0),
        f_star: Some(0.0),
    };
    Problem::new("pl_sine", Arc::new(PlSine), constants)
        .and_then(|p| p.with_x_star(vec![0.0]))
        .expect("pl_sine is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn origin_is_the_global_minimum() {
        let p = make_pl_sine();
        assert_eq!(p.value(&[0.0]), 0.0);
        assert_eq!(p.grad(&[0.0]), vec![0.0]);
    }

    #[test]
    fn value_at_half_pi() {
        let p = make_pl_sine();
        let v = p.value(&[PI / 2.0]);
        assert!((v - (PI * PI / 4.0 + 3.0)).abs() < 1e-14);
    }

    #[test]
    fn curvature_range_matches_declared_l() {
        // Second derivative by central differences of the analytic gradient.
        let p = make_pl_sine();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..=20_000 {
            let x = -5.0 + 10.0 * k as f64 / 20_000.0;
            let h = 1e-5;
            let d2 = (p.grad(&[x + h])[0] - p.grad(&[x - h])[0]) / (2.0 * h);
            lo = lo.min(d2);
            hi = hi.max(d2);
        }
        assert!((hi - 8.0).abs() < 1e-6, "max f'' = {hi}");
        assert!((lo + 4.0).abs() < 1e-6, "min f'' = {lo}");
    }
}
