//! The numeric field the propagator and transforms run over: real for
//! ordinary evaluation, complex for the inversion contour.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub};

use num_complex::Complex64;

pub trait Scalar:
    Copy
    + std::fmt::Debug
    + PartialEq
    + Send
    + Sync
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + MulAssign
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + Sub<f64, Output = Self>
{
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn cosh(self) -> Self;
    fn tanh(self) -> Self;
    fn re(self) -> f64;
    fn abs(self) -> f64;
    fn is_zero(self) -> bool;
    fn is_finite(self) -> bool;
    fn to_complex(self) -> Complex64;
    /// Real scalars keep only the real part.
    fn from_complex(z: Complex64) -> Self;
}

impl Scalar for f64 {
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn re(self) -> f64 {
        self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn is_zero(self) -> bool {
        self == 0.0
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn from_complex(z: Complex64) -> Self {
        z.re
    }
}

impl Scalar for Complex64 {
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn ln(self) -> Self {
        Complex64::ln(self)
    }
    fn sqrt(self) -> Self {
        Complex64::sqrt(self)
    }
    fn cosh(self) -> Self {
        Complex64::cosh(self)
    }
    fn tanh(self) -> Self {
        Complex64::tanh(self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn is_zero(self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn from_complex(z: Complex64) -> Self {
        z
    }
}

/// `sinh(z)/z`, accurate near zero.
pub fn sinhc<S: Scalar>(z: S) -> S {
    let z2 = z * z;
    if z2.abs() < 1e-3 {
        // Error below 1e-17 for |z|² < 1e-3.
        S::from(1.0) + z2 * (S::from(1.0 / 6.0) + z2 * (S::from(1.0 / 120.0) + z2 / 5040.0))
    } else {
        let e = z.exp();
        (e - S::from(1.0) / e) / (z * 2.0)
    }
}
