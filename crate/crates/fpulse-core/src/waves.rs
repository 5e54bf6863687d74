//! Leading-order modulated-pulse profiles: the NLS soliton envelope, the
//! explicit homoclinic of the truncated normal form, the induced lattice
//! ansatz, and the sup-norm distance of an arbitrary profile to the
//! leading-order family.
//!
//! The family is parameterized by epsilon = sqrt(c - c*) and the carrier
//! phase theta; the reversible members have theta in {0, pi}. Amplitude and
//! width use the exact unfolding values s0(c), p0(c), not their
//! leading-order approximations epsilon^2 s0', epsilon^2 p0'; the
//! difference is what the NLS error metric measures.

use num_complex::Complex;
use rustfft::FftNum;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::{unfold, CriticalData, DispersionError};
use crate::normalform::NormalFormCoeffs;
use crate::real::Real;
use crate::spectral::SpectralGrid;

#[derive(Debug, Error)]
pub enum WaveError {
    #[error("parameter signs violate {what}")]
    ParameterSignError { what: &'static str },
    #[error("profile domain [{have_lo}, {have_hi}] does not cover required [{need_lo}, {need_hi}]")]
    DomainTooSmall { need_lo: f64, need_hi: f64, have_lo: f64, have_hi: f64 },
    #[error("grid spacing {h} resolves only {ppp:.1} points per carrier period; need >= {min}")]
    GridTooCoarse { h: f64, ppp: f64, min: usize },
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
}

/// Parameters of one member of the leading-order pulse family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct WaveAnsatz<T: Real> {
    /// sqrt(c - c*).
    pub epsilon: T,
    pub c: T,
    /// Carrier phase; 0 or pi for the reversible members.
    pub theta: T,
    /// Phase-nonlinearity coefficient of the reduced equation; no closed
    /// form is known and only the 0 member is certified.
    pub r_coeff: T,
    /// Envelope peak sqrt(2 s0 / (-s_effective)).
    pub amplitude_scale: T,
    /// Envelope decay rate sqrt(s0).
    pub width: T,
}

impl<T: Real> WaveAnsatz<T> {
    /// Member at c = c* + epsilon^2 with exact unfolding data; returns
    /// (ansatz, s0, p0).
    pub fn at_epsilon(
        epsilon: T,
        theta: T,
        crit: &CriticalData<T>,
        coeffs: &NormalFormCoeffs<T>,
    ) -> Result<(Self, T, T), WaveError> {
        if !(epsilon > T::zero()) {
            return Err(WaveError::ParameterSignError { what: "epsilon > 0" });
        }
        if !(coeffs.s_effective < T::zero()) {
            return Err(WaveError::ParameterSignError { what: "s_effective < 0" });
        }
        let c = crit.c_star + epsilon * epsilon;
        let (s0, p0, _) = unfold(c, crit)?;
        if !(s0 > T::zero()) {
            return Err(WaveError::ParameterSignError { what: "s0(c) > 0" });
        }
        let ansatz = WaveAnsatz {
            epsilon,
            c,
            theta,
            r_coeff: T::zero(),
            amplitude_scale: (T::two() * s0 / -coeffs.s_effective).sqrt(),
            width: s0.sqrt(),
        };
        Ok((ansatz, s0, p0))
    }
}

/// Homoclinic of the focusing NLS profile equation:
/// A(X) = sqrt(2 gamma / nu2) sech(sqrt(gamma / nu1) X).
pub fn nls_soliton<T: Real>(x: T, gamma: T, nu1: T, nu2: T) -> Result<T, WaveError> {
    if !(gamma * nu1 > T::zero()) {
        return Err(WaveError::ParameterSignError { what: "gamma * nu1 > 0" });
    }
    if !(nu1 * nu2 > T::zero()) {
        return Err(WaveError::ParameterSignError { what: "nu1 * nu2 > 0" });
    }
    let peak = (T::two() * gamma / nu2).sqrt();
    Ok(peak / ((gamma / nu1).sqrt() * x).cosh())
}

/// Envelope and phase of the normal-form homoclinic:
/// r0 = amplitude_scale sech(width xi),
/// psi0 = p0 xi + 2 (r_coeff / s_effective) width tanh(width xi).
pub fn r0_psi0<T: Real>(
    xi: T,
    ansatz: &WaveAnsatz<T>,
    coeffs: &NormalFormCoeffs<T>,
    s0: T,
    p0: T,
) -> (T, T) {
    debug_assert!((ansatz.width * ansatz.width - s0).abs() <= T::of(1e-12) * (T::one() + s0));
    let w = ansatz.width;
    let r0 = ansatz.amplitude_scale / (w * xi).cosh();
    let psi0 =
        p0 * xi + T::two() * (ansatz.r_coeff / coeffs.s_effective) * w * (w * xi).tanh();
    (r0, psi0)
}

/// Analytic derivative of the envelope.
fn r0_slope<T: Real>(xi: T, ansatz: &WaveAnsatz<T>) -> T {
    let w = ansatz.width;
    -ansatz.amplitude_scale * w * (w * xi).tanh() / (w * xi).cosh()
}

/// Max over the grid of the residual of the truncated reduced system
///
/// ```text
/// A' = ik0 A + B + i A p0,    B' = ik0 B + i B p0 + A (s0 + s_eff |A|^2)
/// ```
///
/// under A = r0 e^{i((k0+p0) xi + theta)}, B = r0' e^{i(...)}, with all
/// derivatives analytic. Certified only for r_coeff = 0.
pub fn truncated_nf_residual<T: Real>(
    ansatz: &WaveAnsatz<T>,
    coeffs: &NormalFormCoeffs<T>,
    k0: T,
    s0: T,
    p0: T,
    grid: &[T],
) -> T {
    assert!(
        ansatz.r_coeff == T::zero(),
        "only the r_coeff = 0 member satisfies the truncated system"
    );
    let mut worst = T::zero();
    for &xi in grid {
        let (r0, psi0) = r0_psi0(xi, ansatz, coeffs, s0, p0);
        let rp = r0_slope(xi, ansatz);
        // r0'' in closed form: w^2 (sech - 2 sech^3) scaled
        let w = ansatz.width;
        let sech = T::one() / (w * xi).cosh();
        let rpp = ansatz.amplitude_scale * w * w * (sech - T::two() * sech.powi(3));
        let phase = Complex::from_polar(T::one(), k0 * xi + psi0 + ansatz.theta);
        let i = Complex::new(T::zero(), T::one());
        let a = phase.scale(r0);
        let b = phase.scale(rp);
        let a_prime = (Complex::new(rp, (k0 + p0) * r0)) * phase;
        let b_prime = (Complex::new(rpp, (k0 + p0) * rp)) * phase;
        let res1 = a_prime - a.scale(k0) * i - b - a.scale(p0) * i;
        let res2 = b_prime
            - b.scale(k0) * i
            - b.scale(p0) * i
            - a.scale(s0 + coeffs.s_effective * r0 * r0);
        let r = res1.norm() + res2.norm();
        worst = worst.max(r);
    }
    worst
}

/// Real leading-order profile 2 r0(xi) cos(k0 xi + psi0(xi) + theta).
pub fn leading_profile<T: Real>(
    xi: T,
    ansatz: &WaveAnsatz<T>,
    coeffs: &NormalFormCoeffs<T>,
    k0: T,
    s0: T,
    p0: T,
) -> T {
    let (r0, psi0) = r0_psi0(xi, ansatz, coeffs, s0, p0);
    T::two() * r0 * (k0 * xi + psi0 + ansatz.theta).cos()
}

/// A traveling profile v with enough structure to seed a lattice: value,
/// analytic or spectral slope, and (for windowed profiles) the domain on
/// which it is defined. `None` means defined everywhere.
pub trait TravelingProfile<T: Real> {
    fn value(&self, xi: T) -> T;
    fn slope(&self, xi: T) -> T;
    fn domain(&self) -> Option<(T, T)> {
        None
    }
    /// Values on xi = start + j step, j < count. Spectral profiles
    /// override this with a batched evaluation.
    fn values_uniform(&self, start: T, step: T, count: usize) -> Vec<T> {
        (0..count).map(|j| self.value(start + step * T::of_usize(j))).collect()
    }
}

/// The leading-order ansatz as a traveling profile (analytic chain rule).
#[derive(Debug, Clone, Copy)]
pub struct AnsatzProfile<T: Real> {
    pub ansatz: WaveAnsatz<T>,
    pub coeffs: NormalFormCoeffs<T>,
    pub k0: T,
    pub s0: T,
    pub p0: T,
}

impl<T: Real> TravelingProfile<T> for AnsatzProfile<T> {
    fn value(&self, xi: T) -> T {
        leading_profile(xi, &self.ansatz, &self.coeffs, self.k0, self.s0, self.p0)
    }

    fn slope(&self, xi: T) -> T {
        let (r0, psi0) = r0_psi0(xi, &self.ansatz, &self.coeffs, self.s0, self.p0);
        let rp = r0_slope(xi, &self.ansatz);
        let w = self.ansatz.width;
        let sech2 = {
            let s = T::one() / (w * xi).cosh();
            s * s
        };
        let psi0p = self.p0
            + T::two() * (self.ansatz.r_coeff / self.coeffs.s_effective) * w * w * sech2;
        let phi = self.k0 * xi + psi0 + self.ansatz.theta;
        T::two() * (rp * phi.cos() - r0 * (self.k0 + psi0p) * phi.sin())
    }
}

/// Initial positions and velocities for a lattice riding the profile:
/// q_n = v(n - x0), qdot_n = -c v'(n - x0).
pub fn lattice_initial_data<T: Real>(
    profile: &dyn TravelingProfile<T>,
    c: T,
    n_sites: usize,
    x0: T,
) -> Result<(Vec<T>, Vec<T>), WaveError> {
    let need_lo = -x0;
    let need_hi = T::of_usize(n_sites.saturating_sub(1)) - x0;
    if let Some((lo, hi)) = profile.domain() {
        if need_lo < lo || need_hi > hi {
            return Err(WaveError::DomainTooSmall {
                need_lo: need_lo.to_f64().unwrap_or(f64::NAN),
                need_hi: need_hi.to_f64().unwrap_or(f64::NAN),
                have_lo: lo.to_f64().unwrap_or(f64::NAN),
                have_hi: hi.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let mut q = Vec::with_capacity(n_sites);
    let mut qdot = Vec::with_capacity(n_sites);
    for n in 0..n_sites {
        let xi = T::of_usize(n) - x0;
        q.push(profile.value(xi));
        qdot.push(-c * profile.slope(xi));
    }
    Ok((q, qdot))
}

/// Sup-norm distance of samples (xi_j, v_j) on a uniform grid to the
/// nearest member of the leading-order comparison family
///
/// ```text
/// w(xi; sigma, phi) = 2 eps A_hom(eps (xi - sigma)) cos(k0 xi + phi),
/// ```
///
/// minimized over the translation sigma and carrier phase phi. The
/// translation is confined to within one carrier period of the peak of |v|,
/// which pins the comparison at the profile peak. Requires at least 16
/// samples per carrier period.
pub fn nls_error<T: Real>(
    xi: &[T],
    v: &[T],
    epsilon: T,
    crit: &CriticalData<T>,
    coeffs: &NormalFormCoeffs<T>,
) -> Result<T, WaveError> {
    assert_eq!(xi.len(), v.len());
    assert!(xi.len() >= 2, "need at least two samples");
    let h = xi[1] - xi[0];
    let period = T::two() * T::PI() / crit.k0;
    let min_ppp = 16usize;
    let ppp = period / h;
    if !(ppp >= T::of_usize(min_ppp)) {
        return Err(WaveError::GridTooCoarse {
            h: h.to_f64().unwrap_or(f64::NAN),
            ppp: ppp.to_f64().unwrap_or(f64::NAN),
            min: min_ppp,
        });
    }
    let gamma = coeffs.gamma;
    let nu2 = coeffs.nu2;
    if !(gamma > T::zero() && nu2 > T::zero()) {
        return Err(WaveError::ParameterSignError { what: "gamma > 0, nu2 > 0" });
    }
    let peak = T::two() * epsilon * (T::two() * gamma / nu2).sqrt();
    let env_rate = epsilon * gamma.sqrt();

    let sup_v = v.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if sup_v == T::zero() {
        // empty profile: distance to the family member centered in the window
        let mid = (xi[0] + xi[xi.len() - 1]).half();
        return Ok(sup_dist(xi, v, peak, env_rate, crit.k0, mid, T::zero()));
    }

    let i_peak = (0..v.len())
        .max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).expect("finite samples"))
        .unwrap();
    let sigma0 = xi[i_peak];

    // coarse scan, then shrinking pattern search in (sigma, phi)
    let mut best = (T::infinity(), sigma0, T::zero());
    let n_sig = 17;
    let n_phi = 16;
    for a in 0..=n_sig {
        let sigma = sigma0 - period + T::two() * period * T::of_usize(a) / T::of_usize(n_sig);
        for b in 0..n_phi {
            let phi = T::two() * T::PI() * T::of_usize(b) / T::of_usize(n_phi);
            let d = sup_dist(xi, v, peak, env_rate, crit.k0, sigma, phi);
            if d < best.0 {
                best = (d, sigma, phi);
            }
        }
    }
    let (mut dist, mut sigma, mut phi) = best;
    let mut step_s = period / T::of_usize(n_sig);
    let mut step_p = T::two() * T::PI() / T::of_usize(n_phi);
    let sigma_lo = sigma0 - period;
    let sigma_hi = sigma0 + period;
    for _ in 0..70 {
        let mut improved = false;
        for (ds, dp) in [
            (step_s, T::zero()),
            (-step_s, T::zero()),
            (T::zero(), step_p),
            (T::zero(), -step_p),
        ] {
            let s_try = (sigma + ds).max(sigma_lo).min(sigma_hi);
            let p_try = phi + dp;
            let d = sup_dist(xi, v, peak, env_rate, crit.k0, s_try, p_try);
            if d < dist {
                dist = d;
                sigma = s_try;
                phi = p_try;
                improved = true;
            }
        }
        if !improved {
            step_s = step_s * T::of(0.5);
            step_p = step_p * T::of(0.5);
            if step_s < T::of(1e-9) && step_p < T::of(1e-9) {
                break;
            }
        }
    }
    Ok(dist)
}

fn sup_dist<T: Real>(xi: &[T], v: &[T], peak: T, env_rate: T, k0: T, sigma: T, phi: T) -> T {
    let mut worst = T::zero();
    for (&x, &val) in xi.iter().zip(v) {
        let w = peak / (env_rate * (x - sigma)).cosh() * (k0 * x + phi).cos();
        worst = worst.max((val - w).abs());
    }
    worst
}

/// Upsamples a windowed profile spectrally until the carrier is resolved,
/// then measures the NLS error. Returns the fine grid too, for reporting.
pub fn nls_error_resampled<T: Real + FftNum>(
    grid: &SpectralGrid<T>,
    v: &[T],
    epsilon: T,
    crit: &CriticalData<T>,
    coeffs: &NormalFormCoeffs<T>,
) -> Result<T, WaveError> {
    let period = T::two() * T::PI() / crit.k0;
    let mut factor = 1usize;
    while period / (grid.spacing() / T::of_usize(factor)) < T::of(16.0) {
        factor *= 2;
    }
    if factor == 1 {
        return nls_error(&grid.nodes(), v, epsilon, crit, coeffs);
    }
    let (fine, w) = grid.upsample(v, factor);
    nls_error(&fine.nodes(), &w, epsilon, crit, coeffs)
}
