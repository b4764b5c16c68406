//! Scalar abstraction over `f64` and `Complex64`.
//!
//! The spectral parameter is real on the eigenvalue search path and complex
//! inside the argument-principle counter, so the integrator and the solution
//! constructors are generic over the scalar type.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_re(x: f64) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn conj(self) -> Self;
    /// Modulus.
    fn abs(self) -> f64;
    /// Multiplication by a real factor.
    fn scale(self, k: f64) -> Self;
    fn is_finite(self) -> bool;
    fn to_complex(self) -> Complex64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_re(x: f64) -> Self {
        x
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn conj(self) -> Self {
        self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// Principal square root of a (possibly negative or complex) lambda:
/// `Re s >= 0`, with `Im s >= 0` on the branch cut `Re s = 0`.
pub fn principal_sqrt(lambda: Complex64) -> Complex64 {
    let s = lambda.sqrt();
    if s.re > 0.0 || (s.re == 0.0 && s.im >= 0.0) {
        s
    } else {
        -s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_branch_tie_rule() {
        let s = principal_sqrt(Complex64::new(-4.0, 0.0));
        assert!((s.re - 0.0).abs() < 1e-15 && (s.im - 2.0).abs() < 1e-15);
        let s = principal_sqrt(Complex64::new(9.0, 0.0));
        assert!((s.re - 3.0).abs() < 1e-15 && s.im.abs() < 1e-15);
    }
}
