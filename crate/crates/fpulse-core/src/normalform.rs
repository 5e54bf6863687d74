//! Cubic normal-form data on the center manifold at the critical speed: the
//! quadratic and cubic interaction coefficients, the scalar coefficient s of
//! the reduced equation, the existence (sign) condition for modulated
//! pulses, and the parameters of the limiting nonlinear Schroedinger
//! equation.
//!
//! Two values of s are reported. `s_printed` evaluates the solvability
//! formula
//!
//! ```text
//! s = 2/Sigma''(ik0) (4 M2(V1,V2)^2/(1-c*^2) - 2 M2(V2,V2)^2/Sigma(2ik0) - 3 M3)
//! ```
//!
//! literally (with M2(V2,V2)^2 = -(m2_v2v2_im)^2, the value being purely
//! imaginary). With M3 = -16(b1 sin^4(k0/2) + b2 sin^4 k0) that sign of the
//! M3 term makes s positive exactly where the existence condition holds,
//! which contradicts the amplitude formula r0 = sqrt(2 s0 / (-s)) and the
//! requirement nu2 = -s > 0. One sign among the three source formulas is
//! off; the existence condition is taken as authoritative and `s_effective`
//! flips the M3 term (+3 M3) so that s_effective < 0 holds exactly on the
//! admissible set. Downstream consumers use `s_effective`; both values are
//! exposed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::CriticalData;
use crate::potentials::PotentialSpec;
use crate::real::Real;

#[derive(Debug, Error)]
pub enum NormalFormError {
    #[error("existence condition fails: lhs {lhs:e} >= rhs {rhs:e}; no small-amplitude pulse family")]
    ExistenceConditionViolated { lhs: f64, rhs: f64 },
}

/// Normal-form and NLS data at a critical point, for one choice of
/// potential coefficients.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct NormalFormCoeffs<T: Real> {
    pub m2_v1v2: T,
    /// M2(V2,V2) is purely imaginary; this is its imaginary part.
    pub m2_v2v2_im: T,
    pub m3: T,
    pub s_printed: T,
    pub s_effective: T,
    pub sign_condition_ok: bool,
    pub nu1: T,
    pub nu2: T,
    pub gamma: T,
}

/// M2(V1, V2) = 2 (a1 (cos k0 - 1) + 2 a2 (cos 2k0 - 1)); real.
pub fn m2_v1v2<T: Real>(k0: T, spec: &PotentialSpec<T>) -> T {
    T::two()
        * (spec.a1 * (k0.cos() - T::one())
            + T::two() * spec.a2 * ((T::two() * k0).cos() - T::one()))
}

/// Imaginary part of M2(V2, V2) = 4i (a1 sin k0 (cos k0 - 1) + a2 sin 2k0 (cos 2k0 - 1)).
pub fn m2_v2v2_im<T: Real>(k0: T, spec: &PotentialSpec<T>) -> T {
    let two_k0 = T::two() * k0;
    T::of(4.0)
        * (spec.a1 * k0.sin() * (k0.cos() - T::one())
            + spec.a2 * two_k0.sin() * (two_k0.cos() - T::one()))
}

/// M3(V2, V2, conj V2) = -16 (b1 sin^4(k0/2) + b2 sin^4 k0); real.
pub fn m3<T: Real>(k0: T, spec: &PotentialSpec<T>) -> T {
    T::of(-16.0) * (spec.b1 * k0.half().sin().powi(4) + spec.b2 * k0.sin().powi(4))
}

/// The two quadratic-feedback terms of s. Both are <= 0 for any choice of
/// a1, a2 (c* > 1 and Sigma(2ik0) < 0).
fn quadratic_terms<T: Real>(crit: &CriticalData<T>, spec: &PotentialSpec<T>) -> (T, T) {
    let m2a = m2_v1v2(crit.k0, spec);
    let m2b = m2_v2v2_im(crit.k0, spec);
    let t1 = T::of(4.0) * m2a * m2a / (T::one() - crit.c_star * crit.c_star);
    // -2 (i m2b)^2 / Sigma(2ik0) = +2 m2b^2 / Sigma(2ik0)
    let t2 = T::two() * m2b * m2b / crit.sigma_2ik0;
    (t1, t2)
}

/// Both readings of the cubic coefficient; see the module docs.
pub fn coefficient_s<T: Real>(crit: &CriticalData<T>, spec: &PotentialSpec<T>) -> (T, T) {
    let (t1, t2) = quadratic_terms(crit, spec);
    let m3v = m3(crit.k0, spec);
    let pre = T::two() / crit.d2_sigma;
    let s_printed = pre * (t1 + t2 - T::of(3.0) * m3v);
    let s_effective = pre * (t1 + t2 + T::of(3.0) * m3v);
    (s_printed, s_effective)
}

/// Existence condition for the small-amplitude pulse family:
///
/// ```text
/// 4 M2(V1,V2)^2/(1-c*^2) - 2 M2(V2,V2)^2/Sigma(2ik0) < 48 (b1 sin^4(k0/2) + b2 sin^4 k0)
/// ```
///
/// The left side is always <= 0, so positive b1, b2 suffice.
pub fn sign_condition<T: Real>(crit: &CriticalData<T>, spec: &PotentialSpec<T>) -> bool {
    let (lhs, rhs) = sign_condition_sides(crit, spec);
    lhs < rhs
}

/// (lhs, rhs) of the existence condition, for reporting margins.
pub fn sign_condition_sides<T: Real>(crit: &CriticalData<T>, spec: &PotentialSpec<T>) -> (T, T) {
    let (t1, t2) = quadratic_terms(crit, spec);
    (t1 + t2, T::of(-3.0) * m3(crit.k0, spec))
}

/// NLS parameters (nu1, nu2, gamma) = (1, -s_effective, s0'); all positive
/// on the admissible set, as the focusing soliton requires.
pub fn nls_params<T: Real>(
    crit: &CriticalData<T>,
    spec: &PotentialSpec<T>,
) -> Result<(T, T, T), NormalFormError> {
    let (lhs, rhs) = sign_condition_sides(crit, spec);
    if !(lhs < rhs) {
        return Err(NormalFormError::ExistenceConditionViolated {
            lhs: lhs.to_f64().unwrap_or(f64::NAN),
            rhs: rhs.to_f64().unwrap_or(f64::NAN),
        });
    }
    let (_, s_eff) = coefficient_s(crit, spec);
    Ok((T::one(), -s_eff, crit.s0_prime))
}

/// Everything at once; the nu/gamma fields are filled unconditionally, the
/// flag says whether they parameterize an actual pulse family.
pub fn compute_all<T: Real>(crit: &CriticalData<T>, spec: &PotentialSpec<T>) -> NormalFormCoeffs<T> {
    let (s_printed, s_effective) = coefficient_s(crit, spec);
    NormalFormCoeffs {
        m2_v1v2: m2_v1v2(crit.k0, spec),
        m2_v2v2_im: m2_v2v2_im(crit.k0, spec),
        m3: m3(crit.k0, spec),
        s_printed,
        s_effective,
        sign_condition_ok: sign_condition(crit, spec),
        nu1: T::one(),
        nu2: -s_effective,
        gamma: crit.s0_prime,
    }
}
