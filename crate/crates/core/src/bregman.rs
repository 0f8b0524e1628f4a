//! Convex-analysis helpers for `f(x) = lambda * ||x||_1 + 0.5 * ||x||_2^2`.
//!
//! `f` is 1-strongly convex, its conjugate is `f*(y) = 0.5 * ||S_lambda(y)||^2`
//! and `grad f* = S_lambda`. The Bregman distance is evaluated through the
//! conjugate, which is the form the dual iterates of the solvers provide.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::dot;

/// Tolerance on `|S_lambda(x*) - x|` accepted as "x* is a subgradient of f at x".
pub const SUBGRADIENT_TOL: f64 = 1e-12;

/// Nonnegative regularization weight `lambda`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RegParam(f64);

impl RegParam {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda.is_finite() && lambda >= 0.0 {
            Ok(RegParam(lambda))
        } else {
            Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for RegParam {
    fn default() -> Self {
        RegParam(1.5)
    }
}

impl TryFrom<f64> for RegParam {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        RegParam::new(value)
    }
}

impl From<RegParam> for f64 {
    fn from(value: RegParam) -> f64 {
        value.0
    }
}

#[inline]
pub fn shrink(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// `S_lambda(x*)_j = sign(x*_j) * max(|x*_j| - lambda, 0)`
pub fn soft_shrinkage(x_star: &[f64], lambda: RegParam) -> Vec<f64> {
    x_star.iter().map(|&v| shrink(v, lambda.0)).collect()
}

pub fn soft_shrinkage_into(x_star: &[f64], lambda: RegParam, out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(x_star) {
        *o = shrink(v, lambda.0);
    }
}

/// `f(x) = lambda * ||x||_1 + 0.5 * ||x||_2^2`
pub fn objective_f(x: &[f64], lambda: RegParam) -> f64 {
    x.iter().map(|v| lambda.0 * v.abs() + 0.5 * v * v).sum()
}

/// `f*(y) = 0.5 * ||S_lambda(y)||_2^2`
pub fn conjugate_f(x_star: &[f64], lambda: RegParam) -> f64 {
    x_star
        .iter()
        .map(|&v| {
            let s = shrink(v, lambda.0);
            0.5 * s * s
        })
        .sum()
}

/// `D_f^{x*}(x, y) = f*(x*) - <x*, y> + f(y)` for `x = S_lambda(x*)`.
///
/// Fails with [`Error::NotASubgradient`] when `x` is not the shrinkage of `x*`.
/// Rounding can push the evaluated expression a few ulps below zero; such
/// values are returned as `0`.
pub fn bregman_distance(x_star: &[f64], x: &[f64], y: &[f64], lambda: RegParam) -> Result<f64> {
    check_len("bregman_distance: x", x_star.len(), x.len())?;
    check_len("bregman_distance: y", x_star.len(), y.len())?;
    let deviation = x_star
        .iter()
        .zip(x)
        .map(|(&s, &xi)| (shrink(s, lambda.0) - xi).abs())
        .fold(0.0, f64::max);
    if deviation > SUBGRADIENT_TOL {
        return Err(Error::NotASubgradient { deviation });
    }
    Ok(bregman_distance_unchecked(x_star, y, lambda))
}

/// Bregman distance from the point `S_lambda(x*)` to `y`, with the primal
/// point implied by `x*`.
pub fn bregman_distance_unchecked(x_star: &[f64], y: &[f64], lambda: RegParam) -> f64 {
    let d = conjugate_f(x_star, lambda) - dot(x_star, y) + objective_f(y, lambda);
    d.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LAMBDA: f64 = 1.5;

    fn lam(v: f64) -> RegParam {
        RegParam::new(v).unwrap()
    }

    // Per-coordinate grid maximization of y*x - lambda|x| - x^2/2, refined
    // around the best grid point by golden-section search.
    fn conjugate_oracle(y: &[f64], lambda: f64) -> f64 {
        y.iter()
            .map(|&yi| {
                let g = |x: f64| yi * x - lambda * x.abs() - 0.5 * x * x;
                let (lo, hi, steps) = (-25.0, 25.0, 50_000);
                let h = (hi - lo) / steps as f64;
                let best = (0..=steps)
                    .map(|s| lo + s as f64 * h)
                    .max_by(|a, b| g(*a).total_cmp(&g(*b)))
                    .unwrap();
                let (mut a, mut b) = (best - h, best + h);
                let phi = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..80 {
                    let c = b - phi * (b - a);
                    let d = a + phi * (b - a);
                    if g(c) > g(d) {
                        b = d;
                    } else {
                        a = c;
                    }
                }
                g(0.5 * (a + b)).max(g(best))
            })
            .sum()
    }

    #[test]
    fn shrinkage_examples() {
        assert_eq!(soft_shrinkage(&[3.0, 1.0, -2.0], lam(1.5)), vec![1.5, 0.0, -0.5]);
        let x = [0.3, -7.0, 0.0];
        assert_eq!(soft_shrinkage(&x, lam(0.0)), x.to_vec());
        assert_eq!(soft_shrinkage(&[0.0; 3], lam(4.0)), vec![0.0; 3]);
        // the threshold itself maps to zero
        assert_eq!(soft_shrinkage(&[1.5, -1.5], lam(1.5)), vec![0.0, 0.0]);
    }

    #[test]
    fn objective_examples() {
        assert_eq!(objective_f(&[1.0, -1.0], lam(1.5)), 4.0);
        assert_eq!(objective_f(&[0.0, 0.0], lam(3.0)), 0.0);
        assert_eq!(objective_f(&[2.0], lam(0.0)), 2.0);
    }

    #[test]
    fn conjugate_examples() {
        let oracle = conjugate_oracle(&[3.0, 0.0], LAMBDA);
        assert!((oracle - 1.125).abs() < 1e-9);
        assert!((conjugate_f(&[3.0, 0.0], lam(LAMBDA)) - 1.125).abs() < 1e-15);
        assert_eq!(conjugate_f(&[2.0, -1.0], lam(0.0)), 2.5);
        assert!(conjugate_oracle(&[1.0], LAMBDA).abs() < 1e-9);
        assert_eq!(conjugate_f(&[1.0], lam(LAMBDA)), 0.0);
    }

    #[test]
    fn bregman_examples() {
        let l = lam(LAMBDA);
        let x_star = [3.0, -0.4, -2.0];
        let x = soft_shrinkage(&x_star, l);
        assert!(bregman_distance(&x_star, &x, &x, l).unwrap() < 1e-15);
        let d = bregman_distance(&[3.0], &[1.5], &[0.0], l).unwrap();
        assert!((d - 1.125).abs() < 1e-15);
        assert!(matches!(
            bregman_distance(&[3.0], &[1.0], &[0.0], l),
            Err(Error::NotASubgradient { .. })
        ));
        assert!(RegParam::new(-1.0).is_err());
        assert!(RegParam::new(f64::NAN).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn conjugate_matches_grid_oracle(y in proptest::collection::vec(-10.0f64..10.0, 1..4)) {
            let oracle = conjugate_oracle(&y, LAMBDA);
            prop_assert!((conjugate_f(&y, lam(LAMBDA)) - oracle).abs() <= 1e-6);
        }

        #[test]
        fn shrinkage_is_nonexpansive(
            u in proptest::collection::vec(-10.0f64..10.0, 5),
            v in proptest::collection::vec(-10.0f64..10.0, 5),
            l in 0.0f64..4.0,
        ) {
            let su = soft_shrinkage(&u, lam(l));
            let sv = soft_shrinkage(&v, lam(l));
            let lhs: f64 = su.iter().zip(&sv).map(|(a, b)| (a - b).powi(2)).sum();
            let rhs: f64 = u.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum();
            prop_assert!(lhs.sqrt() <= rhs.sqrt() + 1e-12);
        }

        #[test]
        fn conjugate_gradient_is_shrinkage(y in proptest::collection::vec(-10.0f64..10.0, 4)) {
            let l = lam(LAMBDA);
            let s = soft_shrinkage(&y, l);
            let h = 1e-6;
            for j in 0..y.len() {
                if (y[j].abs() - LAMBDA).abs() < 1e-3 {
                    continue;
                }
                let mut up = y.clone();
                let mut down = y.clone();
                up[j] += h;
                down[j] -= h;
                let fd = (conjugate_f(&up, l) - conjugate_f(&down, l)) / (2.0 * h);
                prop_assert!((fd - s[j]).abs() <= 1e-5);
            }
        }

        #[test]
        fn bregman_dominates_half_squared_distance(
            x_star in proptest::collection::vec(-10.0f64..10.0, 6),
            y in proptest::collection::vec(-10.0f64..10.0, 6),
            l in 0.0f64..3.0,
        ) {
            let l = lam(l);
            let x = soft_shrinkage(&x_star, l);
            let d = bregman_distance(&x_star, &x, &y, l).unwrap();
            let half: f64 = 0.5 * x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            prop_assert!(d >= half - 1e-10);
        }
    }
}
