//! The β-divergence family and the exponent of its multiplicative updates.
//!
//! `β = 2` is half the squared Euclidean distance, `β = 1` the generalized
//! Kullback-Leibler divergence and `β = 0` the Itakura-Saito divergence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{NonnegMatrix, EPS};

/// A β value together with its cached update exponent γ(β).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BetaParam {
    beta: f64,
    gamma: f64,
}

impl BetaParam {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::Parameter(format!("beta must be finite, got {beta}")));
        }
        Ok(Self {
            beta,
            gamma: gamma_exponent(beta),
        })
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Itakura-Saito data need strictly positive observations.
    pub(crate) fn floors_data(&self) -> bool {
        self.beta == 0.0
    }
}

impl TryFrom<f64> for BetaParam {
    type Error = Error;

    fn try_from(beta: f64) -> Result<Self> {
        Self::new(beta)
    }
}

impl From<BetaParam> for f64 {
    fn from(p: BetaParam) -> f64 {
        p.beta
    }
}

/// Exponent that turns the ratio of the negative and positive gradient parts into
/// a majorization-minimization step.
pub fn gamma_exponent(beta: f64) -> f64 {
    if beta < 1.0 {
        1.0 / (2.0 - beta)
    } else if beta <= 2.0 {
        1.0
    } else {
        1.0 / (beta - 1.0)
    }
}

/// Scalar divergence `d_β(x ‖ y)`.
///
/// `y` must be positive once floored at [`EPS`]. For `β = 1` the `x log x` term
/// vanishes at `x = 0`, giving `d_1(0 ‖ y) = y`. For `β = 0` a zero `x` is floored
/// at [`EPS`], keeping the value finite.
pub fn d_beta(x: f64, y: f64, p: BetaParam) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("d_beta: x must be finite and >= 0, got {x}")));
    }
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::Domain(format!("d_beta: y must be finite and > 0, got {y}")));
    }
    Ok(d_beta_unchecked(x, y.max(EPS), p.beta))
}

#[inline]
pub(crate) fn d_beta_unchecked(x: f64, y: f64, beta: f64) -> f64 {
    if beta == 1.0 {
        if x == 0.0 {
            y
        } else {
            x * (x / y).ln() - x + y
        }
    } else if beta == 0.0 {
        let x = x.max(EPS);
        let r = x / y;
        r - r.ln() - 1.0
    } else if beta == 2.0 {
        0.5 * (x - y) * (x - y)
    } else {
        (x.powf(beta) + (beta - 1.0) * y.powf(beta) - beta * x * y.powf(beta - 1.0))
            / (beta * (beta - 1.0))
    }
}

/// Matrix divergence: sum of `d_β(A(i,j) ‖ max(B(i,j), ε))`.
pub fn d_beta_matrix(a: &NonnegMatrix, b: &NonnegMatrix, p: BetaParam) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape("d_beta_matrix", a.shape(), b.shape()));
    }
    Ok(divergence_sum(a.as_slice(), b.as_slice(), p.beta))
}

pub(crate) fn divergence_sum(a: &[f64], b: &[f64], beta: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| d_beta_unchecked(*x, y.max(EPS), beta))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(beta: f64) -> BetaParam {
        BetaParam::new(beta).unwrap()
    }

    #[test]
    fn gamma_branches() {
        assert_eq!(gamma_exponent(1.0), 1.0);
        assert_eq!(gamma_exponent(0.0), 0.5);
        assert_eq!(gamma_exponent(3.0), 0.5);
        assert_eq!(gamma_exponent(2.0), 1.0);
        assert_eq!(gamma_exponent(1.5), 1.0);
        assert_eq!(gamma_exponent(0.5), 1.0 / 1.5);
        assert_eq!(p(0.5).gamma(), 1.0 / 1.5);
    }

    #[test]
    fn scalar_values() {
        for beta in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0] {
            assert!(d_beta(2.5, 2.5, p(beta)).unwrap().abs() < 1e-13, "beta={beta}");
        }
        assert_eq!(d_beta(3.0, 1.0, p(2.0)).unwrap(), 2.0);
        let kl = d_beta(2.0, 1.0, p(1.0)).unwrap();
        assert!((kl - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((kl - 0.386294).abs() < 1e-6);
        let is = d_beta(2.0, 1.0, p(0.0)).unwrap();
        assert!((is - (2.0 - 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((is - 0.306853).abs() < 1e-6);
    }

    #[test]
    fn zero_data_conventions() {
        assert_eq!(d_beta(0.0, 3.0, p(1.0)).unwrap(), 3.0);
        let is = d_beta(0.0, 2.0, p(0.0)).unwrap();
        let expected = EPS / 2.0 - (EPS / 2.0).ln() - 1.0;
        assert!(is.is_finite());
        assert!((is - expected).abs() < 1e-12);
        assert!(d_beta(1.0, 0.0, p(1.0)).is_err());
        assert!(d_beta(-1.0, 1.0, p(1.0)).is_err());
    }

    #[test]
    fn matrix_divergence() {
        let a = NonnegMatrix::from_rows(&[[1.0, 2.0], [0.5, 4.0]]).unwrap();
        assert!(d_beta_matrix(&a, &a, p(1.0)).unwrap().abs() < 1e-15);

        let x = NonnegMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let z = NonnegMatrix::zeros(1, 2);
        assert!((d_beta_matrix(&x, &z, p(2.0)).unwrap() - 2.5).abs() < 1e-12);

        let b = NonnegMatrix::from_rows(&[[2.0, 1.0], [1.5, 0.25]]).unwrap();
        let mut oracle = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let (x, y) = (a.get(i, j), b.get(i, j));
                oracle += x * (x / y).ln() - x + y;
            }
        }
        assert!((d_beta_matrix(&a, &b, p(1.0)).unwrap() - oracle).abs() < 1e-12);
        assert!(d_beta_matrix(&a, &x, p(1.0)).is_err());
    }

    #[test]
    fn branch_continuity() {
        let grid = [0.1, 0.7, 1.0, 2.3, 5.0];
        for &x in &grid {
            for &y in &grid {
                for (center, eps) in [(1.0, 1e-6), (1.0, -1e-6), (0.0, 1e-6), (0.0, -1e-6)] {
                    let exact = d_beta_unchecked(x, y, center);
                    let near = d_beta_unchecked(x, y, center + eps);
                    let tol = 1e-4 * exact.abs().max(1e-12);
                    assert!(
                        (exact - near).abs() <= tol.max(1e-9),
                        "x={x} y={y} beta={} exact={exact} near={near}",
                        center + eps
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn nonnegative_and_zero_only_on_diagonal(
            x in 0.0f64..50.0,
            y in 1e-6f64..50.0,
            bi in 0usize..6,
        ) {
            let beta = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0][bi];
            let d = d_beta(x, y, p(beta)).unwrap();
            prop_assert!(d >= -1e-12, "d={}", d);
            if (x - y).abs() > 1e-3 * x.max(1.0) {
                prop_assert!(d > 0.0);
            }
        }

        #[test]
        fn itakura_saito_scale_invariant(x in 0.01f64..10.0, y in 0.01f64..10.0, c in 0.1f64..10.0) {
            let a = d_beta(c * x, c * y, p(0.0)).unwrap();
            let b = d_beta(x, y, p(0.0)).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }
}
