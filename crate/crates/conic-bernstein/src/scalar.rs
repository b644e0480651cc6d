//! Scalar abstraction and truncated Taylor jets.
//!
//! Every basis family in this crate is evaluated by recurrences that only use
//! ring operations and multiplication by real constants.  Writing those
//! recurrences against [`Scalar`] lets the same code run on `f64`, `f32` and on
//! [`Jet`], a truncated Taylor series in one variable.  Evaluating a basis
//! function on a jet that parametrizes a curve `s ↦ p + s·v` (or a rotation
//! `θ ↦ R_θ p`) yields all derivatives along that curve exactly, up to
//! floating-point rounding — no finite differences are involved.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{One, Zero};

/// Minimal real-like scalar used by the polynomial recurrences.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Zero
    + One
    + 'static
{
    /// Embeds a real constant.
    fn from_f64(v: f64) -> Self;

    /// The value part (constant Taylor coefficient for jets).
    fn value(&self) -> f64;

    /// Multiplies by a real constant.
    #[inline]
    fn scale(self, c: f64) -> Self {
        self * Self::from_f64(c)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        self * c
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn value(&self) -> f64 {
        f64::from(*self)
    }
}

/// Truncated Taylor series `Σ_{k<K} c[k] s^k` in one variable `s`.
///
/// `c[k]` stores `f^{(k)}(0)/k!`; use [`Jet::derivative`] to read off the
/// actual derivative of order `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<S: Scalar, const K: usize> {
    /// Taylor coefficients.
    pub c: [S; K],
}

impl<S: Scalar, const K: usize> Jet<S, K> {
    /// The constant jet `v`.
    pub fn constant(v: S) -> Self {
        let mut c = [S::zero(); K];
        c[0] = v;
        Jet { c }
    }

    /// The jet of `s ↦ v + slope·s`.
    pub fn linear(v: S, slope: S) -> Self {
        let mut c = [S::zero(); K];
        c[0] = v;
        if K > 1 {
            c[1] = slope;
        }
        Jet { c }
    }

    /// The independent variable shifted to `v`, i.e. `s ↦ v + s`.
    pub fn variable(v: S) -> Self {
        Self::linear(v, S::one())
    }

    /// Derivative of order `k` at `s = 0` (zero beyond the truncation order).
    pub fn derivative(&self, k: usize) -> S {
        if k >= K {
            return S::zero();
        }
        let mut fact = 1.0;
        for j in 2..=k {
            fact *= j as f64;
        }
        self.c[k].scale(fact)
    }

    /// The jet of the derivative `s ↦ f'(s)`; the top coefficient is lost.
    pub fn differentiate(&self) -> Self {
        let mut c = [S::zero(); K];
        for k in 0..K.saturating_sub(1) {
            c[k] = self.c[k + 1].scale((k + 1) as f64);
        }
        Jet { c }
    }

    /// `cos(s)` as a jet.
    pub fn cos_series() -> Self {
        let mut c = [S::zero(); K];
        let mut fact = 1.0;
        for (k, ck) in c.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            if k % 2 == 0 {
                let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
                *ck = S::from_f64(sign / fact);
            }
        }
        Jet { c }
    }

    /// `sin(s)` as a jet.
    pub fn sin_series() -> Self {
        let mut c = [S::zero(); K];
        let mut fact = 1.0;
        for (k, ck) in c.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            if k % 2 == 1 {
                let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
                *ck = S::from_f64(sign / fact);
            }
        }
        Jet { c }
    }
}

impl<const K: usize> Jet<f64, K> {
    /// Square root of a jet with positive constant term.
    pub fn sqrt(&self) -> Self {
        let mut r = [0.0; K];
        r[0] = self.c[0].sqrt();
        for k in 1..K {
            let mut acc = self.c[k];
            for j in 1..k {
                acc -= r[j] * r[k - j];
            }
            r[k] = acc / (2.0 * r[0]);
        }
        Jet { c: r }
    }
}

impl<S: Scalar, const K: usize> Zero for Jet<S, K> {
    fn zero() -> Self {
        Jet { c: [S::zero(); K] }
    }
    fn is_zero(&self) -> bool {
        self.c.iter().all(|v| v.is_zero())
    }
}

impl<S: Scalar, const K: usize> One for Jet<S, K> {
    fn one() -> Self {
        Self::constant(S::one())
    }
}

impl<S: Scalar, const K: usize> Add for Jet<S, K> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        for k in 0..K {
            self.c[k] += rhs.c[k];
        }
        self
    }
}

impl<S: Scalar, const K: usize> Sub for Jet<S, K> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        for k in 0..K {
            self.c[k] -= rhs.c[k];
        }
        self
    }
}

impl<S: Scalar, const K: usize> Neg for Jet<S, K> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        for k in 0..K {
            self.c[k] = -self.c[k];
        }
        self
    }
}

impl<S: Scalar, const K: usize> Mul for Jet<S, K> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut c = [S::zero(); K];
        for i in 0..K {
            for j in 0..K - i {
                c[i + j] += self.c[i] * rhs.c[j];
            }
        }
        Jet { c }
    }
}

impl<S: Scalar, const K: usize> Div for Jet<S, K> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let mut q = [S::zero(); K];
        for k in 0..K {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= rhs.c[j] * q[k - j];
            }
            q[k] = acc / rhs.c[0];
        }
        Jet { c: q }
    }
}

impl<S: Scalar, const K: usize> AddAssign for Jet<S, K> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<S: Scalar, const K: usize> SubAssign for Jet<S, K> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<S: Scalar, const K: usize> MulAssign for Jet<S, K> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<S: Scalar, const K: usize> Scalar for Jet<S, K> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::constant(S::from_f64(v))
    }
    #[inline]
    fn value(&self) -> f64 {
        self.c[0].value()
    }
    #[inline]
    fn scale(mut self, c: f64) -> Self {
        for k in 0..K {
            self.c[k] = self.c[k].scale(c);
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives_are_exact() {
        // f(s) = (2 + s)^3 at s = 0: 8, 12, 12, 6
        let x = Jet::<f64, 5>::variable(2.0);
        let f = x * x * x;
        assert_eq!(f.derivative(0), 8.0);
        assert_eq!(f.derivative(1), 12.0);
        assert_eq!(f.derivative(2), 12.0);
        assert_eq!(f.derivative(3), 6.0);
        assert_eq!(f.derivative(4), 0.0);
    }

    #[test]
    fn division_inverts_multiplication() {
        let a = Jet::<f64, 4> {
            c: [1.5, -0.3, 0.2, 0.7],
        };
        let b = Jet::<f64, 4> {
            c: [2.0, 0.5, -1.0, 0.25],
        };
        let q = (a * b) / b;
        for k in 0..4 {
            assert!((q.c[k] - a.c[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn trig_series_satisfy_pythagoras() {
        let c = Jet::<f64, 7>::cos_series();
        let s = Jet::<f64, 7>::sin_series();
        let one = c * c + s * s;
        assert!((one.c[0] - 1.0).abs() < 1e-15);
        for k in 1..7 {
            assert!(one.c[k].abs() < 1e-15);
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let a = Jet::<f64, 5> {
            c: [4.0, 1.0, -0.5, 0.3, 0.1],
        };
        let r = a.sqrt();
        let back = r * r;
        for k in 0..5 {
            assert!((back.c[k] - a.c[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn nested_jets_give_mixed_partials() {
        // f(x, y) = x^2 y at (1, 2); ∂x∂y f = 2x = 2
        type Inner = Jet<f64, 3>;
        let x = Jet::<Inner, 3>::constant(Inner::variable(1.0));
        let y = Jet::<Inner, 3>::variable(Inner::constant(2.0));
        let f = x * x * y;
        let fy = f.derivative(1);
        assert!((fy.derivative(1) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn f32_scalar_roundtrip() {
        assert_eq!(<f32 as Scalar>::from_f64(0.5).value(), 0.5);
    }
}
