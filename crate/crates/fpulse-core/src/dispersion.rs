//! Linear dispersion relation of the chain, the critical wavespeed and
//! carrier wavenumber, the eigenvalue unfolding near criticality, root sets
//! of the spatial-dynamics characteristic function, and the neutral-mode
//! projection functionals.
//!
//! The characteristic function of the traveling-wave linearization is
//!
//! ```text
//! Sigma(lambda; c) = c^2 lambda^2 - 10 (cosh(lambda) - 1) + 2 (cosh(2 lambda) - 1),
//! ```
//!
//! whose purely imaginary roots lambda = ik satisfy f_c(k) = -c^2 k^2 +
//! omega^2(k) = 0 with omega^2(k) = 10(1 - cos k) - 2(1 - cos 2k). The
//! critical speed c* > 1 is the unique speed at which f_c is tangent to zero
//! from below at some k0 in (0, pi): above c* the only imaginary roots are
//! the double root at 0, below it two extra pairs exist. All bifurcation
//! data used downstream (d2_sigma, sigma_2ik0, s0', p0') derives from that
//! tangency.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potentials::PotentialSpec;
use crate::quad::simpson;
use crate::real::Real;

#[derive(Debug, Error)]
pub enum DispersionError {
    #[error("Newton residual {residual:e} above tolerance {tol:e} after {iters} iterations")]
    NoConvergence { residual: f64, tol: f64, iters: usize },
    #[error("coarse scan found no sign change of max_k f_c(k) over the speed range")]
    BracketFailure,
    #[error("contour passes within ~{dist:e} of a root near {re}+{im}i; perturb the box")]
    ContourThroughRoot { dist: f64, re: f64, im: f64 },
    #[error("found {found} roots (with multiplicity) but winding number is {winding}; refine the seed grid")]
    RootCountMismatch { found: usize, winding: i64 },
    #[error("projection quadrature needs >= 9 nodes per unit interval and 4 equal pieces, got {nodes} nodes total")]
    GridTooCoarse { nodes: usize },
}

/// Squared phonon frequency omega^2(k) = 10(1 - cos k) - 2(1 - cos 2k).
/// Nonnegative for all real k: it factors as (1 - cos k)(6 - 4 cos k).
pub fn omega_sq<T: Real>(k: T) -> T {
    T::of(10.0) * (T::one() - k.cos()) - T::two() * (T::one() - (T::two() * k).cos())
}

/// Characteristic function Sigma(lambda; c); entire, even, real-symmetric.
pub fn sigma<T: Real>(lambda: Complex<T>, c: T) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    Complex::new(c * c, T::zero()) * lambda * lambda
        - Complex::new(T::of(10.0), T::zero()) * (lambda.cosh() - one)
        + Complex::new(T::two(), T::zero()) * ((lambda * T::two()).cosh() - one)
}

/// d/dlambda Sigma.
pub fn sigma_d1<T: Real>(lambda: Complex<T>, c: T) -> Complex<T> {
    Complex::new(T::two() * c * c, T::zero()) * lambda
        - Complex::new(T::of(10.0), T::zero()) * lambda.sinh()
        + Complex::new(T::of(4.0), T::zero()) * (lambda * T::two()).sinh()
}

/// d^2/dlambda^2 Sigma.
pub fn sigma_d2<T: Real>(lambda: Complex<T>, c: T) -> Complex<T> {
    Complex::new(T::two() * c * c, T::zero())
        - Complex::new(T::of(10.0), T::zero()) * lambda.cosh()
        + Complex::new(T::of(8.0), T::zero()) * (lambda * T::two()).cosh()
}

/// Restriction of Sigma to the imaginary axis: f_c(k) = Sigma(ik; c), real.
pub fn f_c<T: Real>(k: T, c: T) -> T {
    -c * c * k * k + T::of(8.0) - T::of(10.0) * k.cos() + T::two() * (T::two() * k).cos()
}

/// d/dk f_c.
pub fn f_c_dk<T: Real>(k: T, c: T) -> T {
    -T::two() * c * c * k + T::of(10.0) * k.sin() - T::of(4.0) * (T::two() * k).sin()
}

/// d^2/dk^2 f_c. Equals -sigma_d2(ik; c).
pub fn f_c_dkk<T: Real>(k: T, c: T) -> T {
    -T::two() * c * c + T::of(10.0) * k.cos() - T::of(8.0) * (T::two() * k).cos()
}

/// Tangency data at the critical speed, plus the derived spectral constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct CriticalData<T: Real> {
    /// Critical wavespeed c* > 1 (speed of sound is 1).
    pub c_star: T,
    /// Carrier wavenumber k0 in (0, pi) of the tangent double root.
    pub k0: T,
    /// d^2/dlambda^2 Sigma(i k0; c*) = 2c*^2 - 10 cos k0 + 8 cos 2k0 > 0.
    pub d2_sigma: T,
    /// Sigma(2 i k0; c*) = f_{c*}(2 k0) < 0 (no second-harmonic resonance).
    pub sigma_2ik0: T,
    /// s0'(c*) = 4 c* k0^2 / d2_sigma > 0 (splitting speed of the eigenvalue collision).
    pub s0_prime: T,
    /// p0'(c*) = -4 c* k0 / d2_sigma (drift of the collision point along iR).
    pub p0_prime: T,
}

/// Locates the tangency f_c(k) = 0, d/dk f_c(k) = 0 with a 2D Newton
/// iteration seeded by a coarse scan over c^2 in [2.0, 3.5] (step 0.01) and
/// k in (0.5, pi) (step 1e-3).
pub fn find_critical<T: Real>() -> Result<CriticalData<T>, DispersionError> {
    find_critical_with(T::of(1e-12), 60)
}

pub fn find_critical_with<T: Real>(
    tol: T,
    max_iter: usize,
) -> Result<CriticalData<T>, DispersionError> {
    // Coarse scan: max_k f_c(k) decreases in c and crosses zero at c*.
    let scan_max = |c: T| -> (T, T) {
        let mut best = (T::of(0.5), f_c(T::of(0.5), c));
        let steps = 2641; // (pi - 0.5) / 1e-3
        for i in 1..=steps {
            let k = T::of(0.5) + T::of(1e-3) * T::of_usize(i);
            if k >= T::PI() {
                break;
            }
            let v = f_c(k, c);
            if v > best.1 {
                best = (k, v);
            }
        }
        best
    };

    let mut bracket: Option<(T, T, T)> = None; // (c_lo, c_hi, k at last positive max)
    let mut prev: Option<(T, T, T)> = None; // (c, k_max, f_max)
    for j in 0..=150 {
        let c2 = T::two() + T::of(0.01) * T::of_usize(j);
        let c = c2.sqrt();
        let (k_max, fmax) = scan_max(c);
        if let Some((c_prev, k_prev, f_prev)) = prev {
            if f_prev > T::zero() && fmax <= T::zero() {
                bracket = Some((c_prev, c, k_prev));
                break;
            }
        }
        prev = Some((c, k_max, fmax));
    }
    let (c_lo, c_hi, k_seed) = bracket.ok_or(DispersionError::BracketFailure)?;

    let mut k = k_seed;
    let mut c = (c_lo + c_hi).half();
    let mut residual = T::infinity();
    for it in 0..max_iter {
        let f = f_c(k, c);
        let fk = f_c_dk(k, c);
        residual = f.abs().max(fk.abs());
        if residual < tol {
            return Ok(build_critical(c, k));
        }
        // Jacobian of (f, f_k) in (k, c)
        let j11 = fk;
        let j12 = -T::two() * c * k * k;
        let j21 = f_c_dkk(k, c);
        let j22 = -T::of(4.0) * c * k;
        let det = j11 * j22 - j12 * j21;
        if det == T::zero() {
            return Err(DispersionError::NoConvergence {
                residual: residual.to_f64().unwrap_or(f64::NAN),
                tol: tol.to_f64().unwrap_or(f64::NAN),
                iters: it,
            });
        }
        k = k - (j22 * f - j12 * fk) / det;
        c = c - (-j21 * f + j11 * fk) / det;
    }
    Err(DispersionError::NoConvergence {
        residual: residual.to_f64().unwrap_or(f64::NAN),
        tol: tol.to_f64().unwrap_or(f64::NAN),
        iters: max_iter,
    })
}

fn build_critical<T: Real>(c: T, k: T) -> CriticalData<T> {
    let d2_sigma = T::two() * c * c - T::of(10.0) * k.cos() + T::of(8.0) * (T::two() * k).cos();
    CriticalData {
        c_star: c,
        k0: k,
        d2_sigma,
        sigma_2ik0: f_c(T::two() * k, c),
        s0_prime: T::of(4.0) * c * k * k / d2_sigma,
        p0_prime: -T::of(4.0) * c * k / d2_sigma,
    }
}

/// One multiplicity-adaptive Newton polish of a root of Sigma: iterates on
/// Sigma/Sigma', which has simple zeros at roots of any multiplicity.
fn polish_root<T: Real>(mut lam: Complex<T>, c: T, max_iter: usize) -> Complex<T> {
    for _ in 0..max_iter {
        let f = sigma(lam, c);
        let d = sigma_d1(lam, c);
        let d2 = sigma_d2(lam, c);
        let den = d * d - f * d2;
        if den.norm() < T::of(1e-300) {
            break;
        }
        let step = f * d / den;
        lam = lam - step;
        if !lam.re.is_finite() || !lam.im.is_finite() || lam.norm() > T::of(1e3) {
            return Complex::new(T::nan(), T::nan());
        }
        if step.norm() < T::of(1e-15) * (T::one() + lam.norm()) {
            break;
        }
    }
    lam
}

/// Local magnitude scale of Sigma near lambda, used for residual thresholds.
fn sigma_scale<T: Real>(lam: Complex<T>, c: T) -> T {
    let a = lam.re.abs();
    T::one() + c * c * lam.norm_sqr() + T::of(10.0) * a.cosh() + T::two() * (T::two() * a).cosh()
}

/// Eigenvalue collision unfolding near c*: for c > c* the double roots at
/// +-i k0 split into a quartet +-sqrt(s0) + i(k0 + p0) (and conjugates); for
/// c < c* they stay on the imaginary axis at i(k0 + p0 +- sqrt(-s0)). Both
/// regimes are reported through one signed s0.
///
/// Returns (s0, p0, lambda_plus) where lambda_plus is the polished root on
/// the +Re (or +offset) branch near +i k0.
pub fn unfold<T: Real>(
    c: T,
    crit: &CriticalData<T>,
) -> Result<(T, T, Complex<T>), DispersionError> {
    let dc = c - crit.c_star;
    let tol = T::of(1e-12);
    let polish_checked = |guess: Complex<T>| -> Result<Complex<T>, DispersionError> {
        let lam = polish_root(guess, c, 80);
        let res = sigma(lam, c).norm();
        if res > tol * sigma_scale(lam, c) {
            return Err(DispersionError::NoConvergence {
                residual: res.to_f64().unwrap_or(f64::NAN),
                tol: tol.to_f64().unwrap_or(f64::NAN),
                iters: 80,
            });
        }
        Ok(lam)
    };

    if dc >= T::zero() {
        let guess = Complex::new(
            (crit.s0_prime * dc).sqrt(),
            crit.k0 + crit.p0_prime * dc,
        );
        let lam = polish_checked(guess)?;
        Ok((lam.re * lam.re, lam.im - crit.k0, lam))
    } else {
        let off = (-crit.s0_prime * dc).sqrt();
        let center = crit.k0 + crit.p0_prime * dc;
        let la = polish_checked(Complex::new(T::zero(), center + off))?;
        let lb = polish_checked(Complex::new(T::zero(), center - off))?;
        let half_gap = (la.im - lb.im).half();
        let p0 = (la.im + lb.im).half() - crit.k0;
        Ok((-half_gap * half_gap, p0, la))
    }
}

/// A polished root of Sigma with its residual and multiplicity estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Root<T: Real> {
    pub re: T,
    pub im: T,
    pub residual: T,
    pub multiplicity: usize,
}

impl<T: Real> Root<T> {
    pub fn lambda(&self) -> Complex<T> {
        Complex::new(self.re, self.im)
    }
    /// Purely imaginary up to root-location noise.
    pub fn is_imaginary(&self) -> bool {
        self.re.abs() < T::of(1e-6)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct EigenvalueSet<T: Real> {
    pub c: T,
    pub search_box: (T, T),
    /// Sorted by (Im, Re).
    pub roots: Vec<Root<T>>,
    /// Argument-principle count over the box boundary (with multiplicity).
    pub winding: i64,
}

impl<T: Real> EigenvalueSet<T> {
    pub fn count_with_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }
    pub fn imaginary_nonzero(&self) -> Vec<&Root<T>> {
        self.roots
            .iter()
            .filter(|r| r.is_imaginary() && r.lambda().norm() > T::of(1e-6))
            .collect()
    }
    /// Gaps of root pairs closer than `radius` (near-double clusters).
    pub fn cluster_gaps(&self, radius: T) -> Vec<T> {
        let mut gaps = Vec::new();
        for (i, a) in self.roots.iter().enumerate() {
            for b in &self.roots[i + 1..] {
                let gap = (a.lambda() - b.lambda()).norm();
                if gap < radius {
                    gaps.push(gap);
                }
            }
        }
        gaps
    }
}

/// All roots of Sigma(.; c) inside the closed box |Re| <= re_max,
/// |Im| <= im_max, by dense seeding plus multiplicity-adaptive Newton,
/// cross-checked against the argument-principle winding number of the box
/// boundary. `grid` is the seed count per axis.
pub fn neutral_eigenvalues<T: Real>(
    c: T,
    search_box: (T, T),
    grid: usize,
) -> Result<EigenvalueSet<T>, DispersionError> {
    let (re_max, im_max) = search_box;
    assert!(re_max > T::zero() && im_max > T::zero(), "box dimensions must be positive");
    let grid = grid.max(8);

    let res_tol = T::of(1e-10);
    let mut found: Vec<Complex<T>> = Vec::new();
    for i in 0..=grid {
        for j in 0..=grid {
            let seed = Complex::new(
                -re_max + T::two() * re_max * T::of_usize(i) / T::of_usize(grid),
                -im_max + T::two() * im_max * T::of_usize(j) / T::of_usize(grid),
            );
            let lam = polish_root(seed, c, 80);
            if !lam.re.is_finite() || !lam.im.is_finite() {
                continue;
            }
            let res = sigma(lam, c).norm();
            if !(res <= res_tol * sigma_scale(lam, c)) {
                continue;
            }
            let margin = T::of(1e-9);
            if lam.re.abs() > re_max + margin || lam.im.abs() > im_max + margin {
                continue;
            }
            if !found.iter().any(|r| (*r - lam).norm() < T::of(1e-8)) {
                found.push(lam);
            }
        }
    }

    // Multiplicity from derivative smallness. Near a double root the best
    // attainable location accuracy in floating point is ~sqrt(noise), so
    // polished copies of one double root can scatter wider than the dedup
    // radius; merge flagged clusters at 1e-6.
    let is_double = |lam: Complex<T>| -> bool {
        let d1 = sigma_d1(lam, c).norm();
        let d2 = sigma_d2(lam, c).norm();
        d1 < T::of(2e-6) * d2.max(T::one())
    };
    let mut merged: Vec<(Complex<T>, usize)> = Vec::new();
    for lam in found {
        let dbl = is_double(lam);
        if dbl {
            if let Some(entry) = merged
                .iter_mut()
                .find(|(r, m)| *m == 2 && (*r - lam).norm() < T::of(1e-6))
            {
                // keep the copy with the smaller residual
                if sigma(lam, c).norm() < sigma(entry.0, c).norm() {
                    entry.0 = lam;
                }
                continue;
            }
        }
        merged.push((lam, if dbl { 2 } else { 1 }));
    }

    let mut roots: Vec<Root<T>> = merged
        .into_iter()
        .map(|(lam, m)| Root {
            re: lam.re,
            im: lam.im,
            residual: sigma(lam, c).norm(),
            multiplicity: m,
        })
        .collect();
    roots.sort_by(|a, b| {
        (a.im, a.re)
            .partial_cmp(&(b.im, b.re))
            .expect("root coordinates are finite")
    });

    let winding = winding_number(c, re_max, im_max)?;
    let count: usize = roots.iter().map(|r| r.multiplicity).sum();
    if winding != count as i64 {
        return Err(DispersionError::RootCountMismatch { found: count, winding });
    }

    Ok(EigenvalueSet { c, search_box, roots, winding })
}

/// Argument-principle winding number of Sigma over the rectangle boundary,
/// by adaptive phase tracking (each accepted segment turns the image by less
/// than pi/2).
fn winding_number<T: Real>(c: T, re_max: T, im_max: T) -> Result<i64, DispersionError> {
    let corners = [
        Complex::new(-re_max, -im_max),
        Complex::new(re_max, -im_max),
        Complex::new(re_max, im_max),
        Complex::new(-re_max, im_max),
        Complex::new(-re_max, -im_max),
    ];
    let check_proximity = |lam: Complex<T>, w: Complex<T>| -> Result<(), DispersionError> {
        let d1 = sigma_d1(lam, c).norm();
        let dist = w.norm() / (T::one() + d1);
        if dist < T::of(1e-6) {
            return Err(DispersionError::ContourThroughRoot {
                dist: dist.to_f64().unwrap_or(f64::NAN),
                re: lam.re.to_f64().unwrap_or(f64::NAN),
                im: lam.im.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    };

    let mut total = T::zero();
    for seg in corners.windows(2) {
        // stack of (z1, w1, z2, w2, depth)
        let w_start = sigma(seg[0], c);
        let w_end = sigma(seg[1], c);
        check_proximity(seg[0], w_start)?;
        let mut stack = vec![(seg[0], w_start, seg[1], w_end, 0usize)];
        while let Some((z1, w1, z2, w2, depth)) = stack.pop() {
            let dphi = (w2 / w1).arg();
            // The phase may only be trusted when the segment turn is well
            // under pi; refine otherwise.
            if dphi.abs() < T::FRAC_PI_2() && depth >= 3 {
                total = total + dphi;
                continue;
            }
            if depth > 48 {
                return Err(DispersionError::ContourThroughRoot {
                    dist: w1.norm().to_f64().unwrap_or(f64::NAN),
                    re: z1.re.to_f64().unwrap_or(f64::NAN),
                    im: z1.im.to_f64().unwrap_or(f64::NAN),
                });
            }
            let zm = (z1 + z2) * Complex::new(T::of(0.5), T::zero());
            let wm = sigma(zm, c);
            check_proximity(zm, wm)?;
            stack.push((zm, wm, z2, w2, depth + 1));
            stack.push((z1, w1, zm, wm, depth + 1));
        }
    }
    let turns = total / (T::two() * T::PI());
    Ok(turns.round().to_f64().map(|x| x as i64).unwrap_or(0))
}

/// Neutral-mode projection functionals at speed c, evaluated on a state
/// (z, y, U) with U sampled uniformly on [-2, 2].
///
/// chi0 picks the rigid-displacement content, chi1 the zero-momentum
/// content; on the two zero-eigenvalue modes V0 = (1, 0, 1) and
/// V1 = (0, 1, p) they form a dual basis.
///
/// The sample count must be 4m + 1 with m even and m >= 8 (at least 9 nodes
/// per unit interval, pieces split at the weight kinks p in {-1, 0, 1}).
pub fn chi0<T: Real>(z: T, _y: T, u: &[T], c: T) -> Result<T, DispersionError> {
    let m = unit_interval_count(u)?;
    let h = T::one() / T::of_usize(m);
    // int_{-1}^{1} (1 - |p|) U dp
    let hat = integrate_pieces(u, m, h, 1, 3, |p: T| T::one() - p.abs());
    // int_{-2}^{2} (2 - |p|) U dp
    let tent = integrate_pieces(u, m, h, 0, 4, |p: T| T::two() - p.abs());
    Ok((c * c * z - T::of(5.0) * hat + tent) / (c * c - T::one()))
}

pub fn chi1<T: Real>(_z: T, y: T, u: &[T], c: T) -> Result<T, DispersionError> {
    let m = unit_interval_count(u)?;
    let h = T::one() / T::of_usize(m);
    let sgn = |p: T| {
        if p > T::zero() {
            T::one()
        } else if p < T::zero() {
            -T::one()
        } else {
            T::zero()
        }
    };
    // Piecewise constant weight; the jump at p=0 sits on a piece boundary,
    // inside each piece the weight is smooth (constant).
    let inner = integrate_pieces_onesided(u, m, h, 1, 3, sgn);
    let outer = integrate_pieces_onesided(u, m, h, 0, 4, sgn);
    Ok((c * c * y - T::of(5.0) * inner + outer) / (c * c - T::one()))
}

fn unit_interval_count<T: Real>(u: &[T]) -> Result<usize, DispersionError> {
    let n = u.len();
    if n < 2 || (n - 1) % 4 != 0 {
        return Err(DispersionError::GridTooCoarse { nodes: n });
    }
    let m = (n - 1) / 4;
    if m < 8 || m % 2 != 0 {
        return Err(DispersionError::GridTooCoarse { nodes: n });
    }
    Ok(m)
}

/// Simpson over unit pieces [piece_lo, piece_hi) of [-2, 2], weight applied
/// at nodes; weight must be smooth inside each piece.
fn integrate_pieces<T: Real>(
    u: &[T],
    m: usize,
    h: T,
    piece_lo: usize,
    piece_hi: usize,
    weight: impl Fn(T) -> T,
) -> T {
    let mut acc = T::zero();
    for piece in piece_lo..piece_hi {
        let start = piece * m;
        let vals: Vec<T> = (0..=m)
            .map(|j| {
                let p = -T::two() + T::of_usize(start + j) * h;
                weight(p) * u[start + j]
            })
            .collect();
        acc = acc + simpson(&vals, h);
    }
    acc
}

/// Same, but the weight at a piece-boundary node is taken one-sided from the
/// piece interior (for weights with jumps at the boundaries).
fn integrate_pieces_onesided<T: Real>(
    u: &[T],
    m: usize,
    h: T,
    piece_lo: usize,
    piece_hi: usize,
    weight: impl Fn(T) -> T,
) -> T {
    let mut acc = T::zero();
    for piece in piece_lo..piece_hi {
        let start = piece * m;
        // unit-length pieces: the midpoint of piece i is -2 + i + 1/2
        let mid = -T::two() + T::of_usize(piece) + T::of(0.5);
        let w_inside = weight(mid);
        let vals: Vec<T> = (0..=m).map(|j| w_inside * u[start + j]).collect();
        acc = acc + simpson(&vals, h);
    }
    acc
}

/// Carrier-mode eigenvector samples U(p) = e^(i k0 p) restricted to a real
/// or imaginary part; handy for duality tests and diagnostics.
pub fn carrier_samples<T: Real>(k0: T, m: usize, real_part: bool) -> Vec<T> {
    (0..=4 * m)
        .map(|j| {
            let p = -T::two() + T::of_usize(j) / T::of_usize(m);
            if real_part {
                (k0 * p).cos()
            } else {
                (k0 * p).sin()
            }
        })
        .collect()
}

/// Scan-and-bisect locator for the critical speed, independent of the Newton
/// path: bisects on c so that max_k f_c(k) over (0.5, pi) crosses zero.
/// Slower and coarser than `find_critical`; used as its oracle.
pub fn critical_by_bisection<T: Real>(k_step: T, c_tol: T) -> Result<(T, T), DispersionError> {
    let max_f = |c: T| -> (T, T) {
        let mut k = T::of(0.5);
        let mut best = (k, f_c(k, c));
        while k < T::PI() {
            let v = f_c(k, c);
            if v > best.1 {
                best = (k, v);
            }
            k = k + k_step;
        }
        best
    };
    let mut lo = T::of(2.0f64.sqrt()); // c^2 = 2
    let mut hi = T::of(3.5f64.sqrt());
    if max_f(lo).1 <= T::zero() || max_f(hi).1 >= T::zero() {
        return Err(DispersionError::BracketFailure);
    }
    while hi - lo > c_tol {
        let mid = (lo + hi).half();
        if max_f(mid).1 > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = (lo + hi).half();
    Ok((c, max_f(c).0))
}

/// First integral of the traveling-wave equation evaluated on a state
/// (z, y, U) with U sampled uniformly on [-2, 2] (same layout as chi0/chi1):
///
/// ```text
/// I1 = (c^2 y - int_0^1 w1'(U(p) - U(p-1)) dp - int_0^2 w2'(U(p) - U(p-2)) dp) / (c^2 - 1)
/// ```
///
/// Conserved along solutions of the traveling-wave equation.
pub fn first_integral_state<T: Real>(
    _z: T,
    y: T,
    u: &[T],
    c: T,
    spec: &PotentialSpec<T>,
) -> Result<T, DispersionError> {
    let m = unit_interval_count(u)?;
    let h = T::one() / T::of_usize(m);
    // p in [0,1]: U(p) at indices 2m..=3m, U(p-1) at m..=2m
    let g1: Vec<T> = (0..=m)
        .map(|j| spec.w1_prime(u[2 * m + j] - u[m + j]))
        .collect();
    // p in [0,2]: U(p) at 2m..=4m, U(p-2) at 0..=2m
    let g2: Vec<T> = (0..=2 * m)
        .map(|j| spec.w2_prime(u[2 * m + j] - u[j]))
        .collect();
    let i1 = simpson(&g1, h);
    let i2 = simpson(&g2, h);
    Ok((c * c * y - i1 - i2) / (c * c - T::one()))
}
