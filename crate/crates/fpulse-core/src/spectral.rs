//! Fourier collocation on a uniform periodic grid: differentiation, exact
//! grid shifts, interpolation off the grid, and band-limited upsampling.
//!
//! Conventions: n nodes xi_j = origin + j h, h = length / n; coefficients
//! v_j = sum_m vh_m e^{2 pi i j m / n} with the signed mode index m and
//! physical wavenumber k_m = 2 pi m / length. For real data the Nyquist
//! mode (even n) is kept real: odd derivatives zero it, shifts scale it by
//! cos(k d), off-grid evaluation uses its cosine form.

use num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};
use std::sync::Arc;

use crate::real::Real;

#[derive(Clone)]
pub struct SpectralGrid<T: Real + FftNum> {
    n: usize,
    length: T,
    origin: T,
    fft: Arc<dyn Fft<T>>,
    ifft: Arc<dyn Fft<T>>,
}

impl<T: Real + FftNum> SpectralGrid<T> {
    /// Grid of n nodes on [origin, origin + length), n >= 2.
    pub fn new(n: usize, length: T, origin: T) -> Self {
        assert!(n >= 2, "spectral grid needs at least two nodes");
        assert!(length > T::zero(), "period must be positive");
        let mut planner = FftPlanner::new();
        SpectralGrid {
            n,
            length,
            origin,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
        }
    }

    /// Symmetric window [-L/2, L/2).
    pub fn symmetric(n: usize, length: T) -> Self {
        Self::new(n, length, -length.half())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn origin(&self) -> T {
        self.origin
    }

    pub fn spacing(&self) -> T {
        self.length / T::of_usize(self.n)
    }

    pub fn node(&self, j: usize) -> T {
        self.origin + self.spacing() * T::of_usize(j)
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Signed mode index of storage slot j: 0, 1, ..., n/2, -(n/2-1), ..., -1
    /// (for even n slot n/2 holds the Nyquist mode).
    fn mode_index(&self, j: usize) -> isize {
        if 2 * j <= self.n {
            j as isize
        } else {
            j as isize - self.n as isize
        }
    }

    /// Physical wavenumber of storage slot j.
    pub fn wavenumber(&self, j: usize) -> T {
        T::two() * T::PI() * T::of(self.mode_index(j) as f64) / self.length
    }

    fn is_nyquist(&self, j: usize) -> bool {
        self.n % 2 == 0 && j == self.n / 2
    }

    /// Fourier coefficients of real samples (normalized; length n). The
    /// analysis kernel e^{-2 pi i jm/n} pairs with the e^{+2 pi i jm/n}
    /// synthesis used everywhere else.
    pub fn to_freq(&self, v: &[T]) -> Vec<Complex<T>> {
        assert_eq!(v.len(), self.n);
        let mut buf: Vec<Complex<T>> = v.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.fft.process(&mut buf);
        let scale = T::one() / T::of_usize(self.n);
        for z in &mut buf {
            *z = z.scale(scale);
        }
        buf
    }

    /// Real samples from coefficients (imaginary parts of the synthesis are
    /// discarded; they are roundoff for conjugate-symmetric input).
    pub fn to_phys(&self, vh: &[Complex<T>]) -> Vec<T> {
        assert_eq!(vh.len(), self.n);
        let mut buf = vh.to_vec();
        self.ifft.process(&mut buf);
        // inverse FFT uses e^{+2 pi i jm/n} and is unnormalized relative to
        // our normalized coefficients, so no extra scaling is needed
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Spectral derivative of given order.
    pub fn deriv(&self, v: &[T], order: u32) -> Vec<T> {
        let mut vh = self.to_freq(v);
        for (j, z) in vh.iter_mut().enumerate() {
            let k = self.wavenumber(j);
            if self.is_nyquist(j) {
                if order % 2 == 1 {
                    *z = Complex::new(T::zero(), T::zero());
                } else {
                    // (ik)^order real for even order
                    let f = (-k * k).powi((order / 2) as i32);
                    *z = z.scale(f);
                }
            } else {
                let ik = Complex::new(T::zero(), k);
                let mut f = Complex::new(T::one(), T::zero());
                for _ in 0..order {
                    f = f * ik;
                }
                *z = *z * f;
            }
        }
        self.to_phys(&vh)
    }

    /// Samples of xi -> v(xi + d) (exact band-limited shift).
    pub fn shift(&self, v: &[T], d: T) -> Vec<T> {
        let mut vh = self.to_freq(v);
        self.shift_freq(&mut vh, d);
        self.to_phys(&vh)
    }

    /// In-place shift in frequency space.
    pub fn shift_freq(&self, vh: &mut [Complex<T>], d: T) {
        for (j, z) in vh.iter_mut().enumerate() {
            let k = self.wavenumber(j);
            if self.is_nyquist(j) {
                *z = z.scale((k * d).cos());
            } else {
                *z = *z * Complex::from_polar(T::one(), k * d);
            }
        }
    }

    /// Trigonometric interpolation at one point; O(n).
    pub fn eval_at(&self, vh: &[Complex<T>], xi: T) -> T {
        let x = xi - self.origin;
        let mut acc = T::zero();
        for (j, &z) in vh.iter().enumerate() {
            let k = self.wavenumber(j);
            if self.is_nyquist(j) {
                acc = acc + z.re * (k * x).cos();
            } else {
                let e = Complex::from_polar(T::one(), k * x);
                acc = acc + (z * e).re;
            }
        }
        acc
    }

    /// Trigonometric interpolation on a uniform target grid
    /// xi_i = start + i step, i < count, via per-mode rolling phases
    /// (no trig calls in the inner loop). Modes below `drop_tol` times the
    /// largest coefficient magnitude are skipped.
    pub fn eval_uniform(&self, vh: &[Complex<T>], start: T, step: T, count: usize, drop_tol: T) -> Vec<T> {
        let x0 = start - self.origin;
        let max_mag = vh.iter().map(|z| z.norm()).fold(T::zero(), T::max);
        let cut = drop_tol * max_mag;
        // active modes with initial phase and per-step rotation
        let mut coef: Vec<Complex<T>> = Vec::new();
        let mut rot: Vec<Complex<T>> = Vec::new();
        let mut nyq: Option<(T, T, T)> = None; // (amplitude, k, x0)
        for (j, &z) in vh.iter().enumerate() {
            if z.norm() <= cut {
                continue;
            }
            let k = self.wavenumber(j);
            if self.is_nyquist(j) {
                nyq = Some((z.re, k, x0));
            } else {
                coef.push(z * Complex::from_polar(T::one(), k * x0));
                rot.push(Complex::from_polar(T::one(), k * step));
            }
        }
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let mut acc = T::zero();
            for (c, _) in coef.iter().zip(&rot) {
                acc = acc + c.re;
            }
            if let Some((a, k, x0)) = nyq {
                acc = acc + a * (k * (x0 + step * T::of_usize(i))).cos();
            }
            out.push(acc);
            for (c, r) in coef.iter_mut().zip(&rot) {
                *c = *c * *r;
            }
        }
        out
    }

    /// Zero-padded upsampling by an integer factor; returns the fine grid
    /// and samples. The Nyquist coefficient is split across +-n/2 to keep
    /// the interpolant real and consistent with `eval_at`.
    pub fn upsample(&self, v: &[T], factor: usize) -> (SpectralGrid<T>, Vec<T>) {
        assert!(factor >= 1);
        let vh = self.to_freq(v);
        let m = self.n * factor;
        let fine = SpectralGrid::new(m, self.length, self.origin);
        let mut wh = vec![Complex::new(T::zero(), T::zero()); m];
        for (j, &z) in vh.iter().enumerate() {
            if self.is_nyquist(j) {
                let half = z.scale(T::of(0.5));
                wh[self.n / 2] = half;
                wh[m - self.n / 2] = half;
            } else {
                let idx = self.mode_index(j);
                let slot = if idx >= 0 { idx as usize } else { (m as isize + idx) as usize };
                wh[slot] = z;
            }
        }
        let w = fine.to_phys(&wh);
        (fine, w)
    }
}

impl<T: Real + FftNum> std::fmt::Debug for SpectralGrid<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("length", &self.length)
            .field("origin", &self.origin)
            .finish()
    }
}
