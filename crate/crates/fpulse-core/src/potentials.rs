//! Interaction force laws of the chain.
//!
//! Nearest neighbors attract with fixed stiffness 5, next-to-nearest
//! neighbors repel with fixed stiffness 1; the quadratic and cubic force
//! coefficients (a1, a2, b1, b2) are the model knobs. Forces are truncated at
//! cubic order: every coefficient computed downstream depends on the
//! potentials only through these four numbers.

use serde::{Deserialize, Serialize};

use crate::real::Real;

/// Coefficients of the two force laws
/// w1'(r) = 5r + a1 r^2 + b1 r^3 and w2'(r) = -r + a2 r^2 + b2 r^3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    default,
    deny_unknown_fields,
    bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>")
)]
pub struct PotentialSpec<T: Real> {
    pub a1: T,
    pub a2: T,
    pub b1: T,
    pub b2: T,
}

impl<T: Real> Default for PotentialSpec<T> {
    fn default() -> Self {
        Self { a1: T::zero(), a2: T::zero(), b1: T::zero(), b2: T::zero() }
    }
}

impl<T: Real> PotentialSpec<T> {
    pub fn new(a1: T, a2: T, b1: T, b2: T) -> Self {
        Self { a1, a2, b1, b2 }
    }

    /// Purely cubic force laws; the default family for the localized pulse.
    pub fn cubic(b1: T, b2: T) -> Self {
        Self { a1: T::zero(), a2: T::zero(), b1, b2 }
    }

    /// Even potentials (odd forces): no quadratic force terms.
    pub fn is_even(&self) -> bool {
        self.a1 == T::zero() && self.a2 == T::zero()
    }

    /// Nearest-neighbor force law, Horner form.
    #[inline]
    pub fn w1_prime(&self, r: T) -> T {
        r * (T::of(5.0) + r * (self.a1 + r * self.b1))
    }

    /// Next-to-nearest-neighbor force law, Horner form.
    #[inline]
    pub fn w2_prime(&self, r: T) -> T {
        r * (-T::one() + r * (self.a2 + r * self.b2))
    }

    /// Antiderivative of `w1_prime` with w1(0) = 0.
    #[inline]
    pub fn w1(&self, r: T) -> T {
        let half = T::of(0.5);
        r * r * (T::of(2.5) + r * (self.a1 / T::of(3.0) + r * self.b1 * half * half))
    }

    /// Antiderivative of `w2_prime` with w2(0) = 0.
    #[inline]
    pub fn w2(&self, r: T) -> T {
        let half = T::of(0.5);
        r * r * (-half + r * (self.a2 / T::of(3.0) + r * self.b2 * half * half))
    }

    /// Nonlinear remainder of the NN force: n1(r) = w1'(r) - 5r.
    #[inline]
    pub fn n1(&self, r: T) -> T {
        r * r * (self.a1 + r * self.b1)
    }

    /// Nonlinear remainder of the NNN force: n2(r) = w2'(r) + r.
    #[inline]
    pub fn n2(&self, r: T) -> T {
        r * r * (self.a2 + r * self.b2)
    }

    /// Derivative of the NN force law (local stiffness).
    #[inline]
    pub fn w1_second(&self, r: T) -> T {
        T::of(5.0) + r * (T::two() * self.a1 + T::of(3.0) * r * self.b1)
    }

    /// Derivative of the NNN force law.
    #[inline]
    pub fn w2_second(&self, r: T) -> T {
        -T::one() + r * (T::two() * self.a2 + T::of(3.0) * r * self.b2)
    }
}
