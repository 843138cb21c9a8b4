//! Forward-mode second-order jets.
//!
//! A [`Jet2`] carries a scalar value together with its gradient and the
//! *pure* second derivatives `∂²/∂x_i²` with respect to `d` input
//! coordinates. Mixed partials are not represented.
//!
//! Parameter gradients do not go through this module; every layer in
//! [`crate::model`] has a hand-written reverse pass.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("jet dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("non-finite intermediate while evaluating at {at}: value={value}, d1={d1}, d2={d2}")]
    NonFinite { at: f64, value: f64, d1: f64, d2: f64 },
    #[error("jet dimension must be at least 1")]
    ZeroDimension,
}

/// Value, gradient and pure second derivatives of a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub diag2: Vec<f64>,
}

impl Jet2 {
    /// A constant: zero gradient and zero curvature.
    pub fn constant(value: f64, dim: usize) -> Self {
        Self {
            value,
            grad: vec![0.0; dim],
            diag2: vec![0.0; dim],
        }
    }

    /// The coordinate function `x_index` evaluated at `value`.
    pub fn seed(value: f64, index: usize, dim: usize) -> Self {
        let mut grad = vec![0.0; dim];
        grad[index] = 1.0;
        Self {
            value,
            grad,
            diag2: vec![0.0; dim],
        }
    }

    /// Seeds one jet per coordinate of `x`.
    pub fn seeds(x: &[f64]) -> Vec<Jet2> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| Jet2::seed(v, i, x.len()))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    fn check_dim(&self, other: &Jet2) -> Result<(), DiffError> {
        if self.dim() != other.dim() {
            return Err(DiffError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Jet2) -> Result<Jet2, DiffError> {
        self.check_dim(other)?;
        Ok(Jet2 {
            value: self.value + other.value,
            grad: zip_map(&self.grad, &other.grad, |a, b| a + b),
            diag2: zip_map(&self.diag2, &other.diag2, |a, b| a + b),
        })
    }

    pub fn mul(&self, other: &Jet2) -> Result<Jet2, DiffError> {
        self.check_dim(other)?;
        let (a, b) = (self.value, other.value);
        let grad = zip_map(&self.grad, &other.grad, |ga, gb| a * gb + b * ga);
        let diag2 = (0..self.dim())
            .map(|i| {
                a * other.diag2[i] + 2.0 * self.grad[i] * other.grad[i] + b * self.diag2[i]
            })
            .collect();
        Ok(Jet2 {
            value: a * b,
            grad,
            diag2,
        })
    }

    pub fn scale(&self, c: f64) -> Jet2 {
        Jet2 {
            value: c * self.value,
            grad: self.grad.iter().map(|g| c * g).collect(),
            diag2: self.diag2.iter().map(|h| c * h).collect(),
        }
    }

    /// Applies `f` given its value and first two derivatives at `self.value`.
    pub fn univariate(
        &self,
        f: impl Fn(f64) -> f64,
        f1: impl Fn(f64) -> f64,
        f2: impl Fn(f64) -> f64,
    ) -> Result<Jet2, DiffError> {
        let x = self.value;
        let (v, d1, d2) = (f(x), f1(x), f2(x));
        if !(v.is_finite() && d1.is_finite() && d2.is_finite()) {
            return Err(DiffError::NonFinite {
                at: x,
                value: v,
                d1,
                d2,
            });
        }
        Ok(self.chain(v, d1, d2))
    }

    /// Chain rule with precomputed `f(a)`, `f'(a)`, `f''(a)`.
    pub fn chain(&self, v: f64, d1: f64, d2: f64) -> Jet2 {
        Jet2 {
            value: v,
            grad: self.grad.iter().map(|g| d1 * g).collect(),
            diag2: self
                .grad
                .iter()
                .zip(&self.diag2)
                .map(|(g, h)| d2 * g * g + d1 * h)
                .collect(),
        }
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

/// Central-difference gradient and pure second derivatives of `f` at `x`.
pub fn fd_check(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(h > 0.0, "finite-difference step must be positive");
    let f0 = f(x);
    let mut xp = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    let mut diag2 = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        grad.push((fp - fm) / (2.0 * h));
        diag2.push((fp - 2.0 * f0 + fm) / (h * h));
    }
    (grad, diag2)
}

/// `|a - b| <= rtol * max(|a|, |b|) + atol`.
pub fn close(a: f64, b: f64, rtol: f64, atol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()) + atol
}
