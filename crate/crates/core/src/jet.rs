//! Truncated Taylor series ("jets") of a scalar function of time.
//!
//! A jet of order `K` at `t0` stores the normalized coefficients
//! `c_k = f^(k)(t0) / k!` for `k = 0..=K`. Storing the normalized form keeps
//! high-order coefficients of exponential-type functions in range where the raw
//! derivatives would overflow.
//!
//! Binary operations on jets of different order truncate to the shorter one.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Result, StefanError};
use crate::scalar::{factorial, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T> {
    coeffs: Vec<T>,
}

impl<T: Real> Jet<T> {
    /// Builds a jet from normalized coefficients `f^(k)/k!`.
    ///
    /// # Panics
    /// If `coeffs` is empty.
    pub fn from_coeffs(coeffs: Vec<T>) -> Self {
        assert!(!coeffs.is_empty(), "a jet carries at least its value");
        Self { coeffs }
    }

    /// Builds a jet from raw derivatives `f^(k)(t0)`, normalizing by `k!`.
    pub fn from_derivatives(derivs: &[T]) -> Self {
        let mut scale = T::one();
        let coeffs = derivs
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                if k > 1 {
                    scale = scale * T::from_usize_lossy(k);
                }
                d / scale
            })
            .collect();
        Self::from_coeffs(coeffs)
    }

    pub fn constant(value: T, order: usize) -> Self {
        let mut coeffs = vec![T::zero(); order + 1];
        coeffs[0] = value;
        Self { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self::constant(T::zero(), order)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// `f(t0)`.
    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    /// `f^(m)(t0)`, i.e. the stored coefficient rescaled by `m!`.
    pub fn derivative_value(&self, m: usize) -> Option<T> {
        self.coeffs.get(m).map(|&c| c * factorial::<T>(m))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn truncate(&self, order: usize) -> Self {
        let keep = (order + 1).min(self.coeffs.len());
        Self {
            coeffs: self.coeffs[..keep].to_vec(),
        }
    }

    pub fn scale(&self, factor: T) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|&c| c * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// Cauchy product `c_k = sum_{j<=k} a_j b_{k-j}`.
    pub fn mul(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        let coeffs = (0..=order)
            .map(|k| (0..=k).fold(T::zero(), |acc, j| acc + self.coeffs[j] * other.coeffs[k - j]))
            .collect();
        Self { coeffs }
    }

    /// Time derivative; consumes one order.
    pub fn derivative(&self) -> Result<Self> {
        if self.order() == 0 {
            return Err(StefanError::JetExhausted);
        }
        let coeffs = self.coeffs[1..]
            .iter()
            .enumerate()
            .map(|(k, &c)| c * T::from_usize_lossy(k + 1))
            .collect();
        Ok(Self { coeffs })
    }

    /// Evaluates the truncated Taylor polynomial at `t0 + h`.
    pub fn eval_offset(&self, h: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * h + c)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        let order = self.order().min(other.order());
        let coeffs = (0..=order).map(|k| f(self.coeffs[k], other.coeffs[k])).collect();
        Self { coeffs }
    }
}

impl<T: Real> Add for &Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Self) -> Jet<T> {
        Jet::add(self, rhs)
    }
}

impl<T: Real> Sub for &Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Self) -> Jet<T> {
        Jet::sub(self, rhs)
    }
}

impl<T: Real> Mul for &Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Self) -> Jet<T> {
        Jet::mul(self, rhs)
    }
}

impl<T: Real> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.scale(-T::one())
    }
}
