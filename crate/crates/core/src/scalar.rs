//! Arithmetic shared by plain `f64` values and [`Jet`]s, so expressions and
//! least-squares formulas can be evaluated over either.

use crate::jet::{Jet, JetError};

pub trait Scalar: Clone + Send + Sync {
    /// Constant with the same shape as `self`.
    fn lift(&self, value: f64) -> Self;
    fn value(&self) -> f64;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, factor: f64) -> Self;
    fn neg(&self) -> Self {
        self.scale(-1.0)
    }
    fn div(&self, other: &Self) -> Result<Self, JetError>;
    fn sqrt(&self) -> Result<Self, JetError>;
    fn exp(&self) -> Self;
    fn ln(&self) -> Result<Self, JetError>;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn powi(&self, k: i32) -> Result<Self, JetError>;
    fn powf(&self, p: f64) -> Result<Self, JetError>;
}

impl Scalar for f64 {
    fn lift(&self, value: f64) -> Self {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, factor: f64) -> Self {
        self * factor
    }
    fn div(&self, other: &Self) -> Result<Self, JetError> {
        if *other == 0.0 {
            return Err(JetError::DivisionByZero);
        }
        Ok(self / other)
    }
    fn sqrt(&self) -> Result<Self, JetError> {
        if *self < 0.0 || !self.is_finite() {
            return Err(JetError::NonPositive { op: "sqrt", value: *self });
        }
        Ok(f64::sqrt(*self))
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Result<Self, JetError> {
        if *self <= 0.0 || !self.is_finite() {
            return Err(JetError::NonPositive { op: "log", value: *self });
        }
        Ok(f64::ln(*self))
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn powi(&self, k: i32) -> Result<Self, JetError> {
        if k < 0 && *self == 0.0 {
            return Err(JetError::DivisionByZero);
        }
        Ok(f64::powi(*self, k))
    }
    fn powf(&self, p: f64) -> Result<Self, JetError> {
        if *self <= 0.0 || !self.is_finite() {
            return Err(JetError::NonPositive { op: "pow", value: *self });
        }
        Ok(f64::powf(*self, p))
    }
}

impl Scalar for Jet {
    fn lift(&self, value: f64) -> Self {
        Jet::lift(self, value)
    }
    fn value(&self) -> f64 {
        Jet::value(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, factor: f64) -> Self {
        Jet::scale(self, factor)
    }
    fn div(&self, other: &Self) -> Result<Self, JetError> {
        Jet::div(self, other)
    }
    fn sqrt(&self) -> Result<Self, JetError> {
        Jet::sqrt(self)
    }
    fn exp(&self) -> Self {
        Jet::exp(self)
    }
    fn ln(&self) -> Result<Self, JetError> {
        Jet::ln(self)
    }
    fn sin(&self) -> Self {
        Jet::sin(self)
    }
    fn cos(&self) -> Self {
        Jet::cos(self)
    }
    fn powi(&self, k: i32) -> Result<Self, JetError> {
        Jet::powi(self, k)
    }
    fn powf(&self, p: f64) -> Result<Self, JetError> {
        Jet::powf(self, p)
    }
}

/// Σ a_i b_i.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    assert_eq!(a.len(), b.len());
    assert!(!a.is_empty());
    let mut acc = a[0].mul(&b[0]);
    for (x, y) in a.iter().zip(b).skip(1) {
        acc = acc.add(&x.mul(y));
    }
    acc
}
