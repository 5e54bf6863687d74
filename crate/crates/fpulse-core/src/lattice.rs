//! Velocity-Verlet integration of the chain
//!
//!   qdotdot_n = W1'(q_{n+1} - q_n) - W1'(q_n - q_{n-1})
//!             + W2'(q_{n+2} - q_n) - W2'(q_n - q_{n-2})
//!
//! on a periodic ring, with observers for energy, momentum, and distance
//! to a rigidly traveling reference profile.

use std::io::{self, Read, Write};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::potentials::PotentialSpec;
use crate::real::Real;
use crate::util::{golden_min, pairwise_sum, sup_norm};
use crate::waves::TravelingProfile;

#[derive(Debug, thiserror::Error)]
pub enum LatticeError {
    #[error("chain needs at least 8 sites for the range-2 periodic stencil, got {n}")]
    TooShort { n: usize },
    #[error("q and p lengths differ: {nq} vs {np}")]
    LengthMismatch { nq: usize, np: usize },
    #[error("non-finite entry in the state")]
    NotFinite,
    #[error("time step {dt} outside (0, 0.05]")]
    BadTimeStep { dt: f64 },
    #[error("max |q| reached {max_q:e} at t = {t}; integration aborted")]
    BlowUp { t: f64, max_q: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct LatticeState<T> {
    pub q: Vec<T>,
    pub p: Vec<T>,
    pub t: T,
    pub n_sites: usize,
}

impl<T: Real> LatticeState<T> {
    pub fn new(q: Vec<T>, p: Vec<T>, t: T) -> Result<Self, LatticeError> {
        let state = LatticeState { n_sites: q.len(), q, p, t };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        if self.q.len() != self.p.len() {
            return Err(LatticeError::LengthMismatch {
                nq: self.q.len(),
                np: self.p.len(),
            });
        }
        if self.q.len() < 8 || self.n_sites != self.q.len() {
            return Err(LatticeError::TooShort { n: self.q.len() });
        }
        let finite = self.q.iter().chain(&self.p).all(|x| x.is_finite());
        if !finite || !self.t.is_finite() {
            return Err(LatticeError::NotFinite);
        }
        Ok(())
    }
}

/// F_n = W1'(q_{n+1}-q_n) - W1'(q_n-q_{n-1}) + W2'(q_{n+2}-q_n) - W2'(q_n-q_{n-2}),
/// periodic indexing.
pub fn forces<T: Real>(q: &[T], spec: &PotentialSpec<T>) -> Vec<T> {
    let mut f = vec![T::zero(); q.len()];
    forces_into(q, spec, &mut f);
    f
}

fn forces_into<T: Real>(q: &[T], spec: &PotentialSpec<T>, f: &mut [T]) {
    let n = q.len();
    for i in 0..n {
        let (im2, im1) = ((i + n - 2) % n, (i + n - 1) % n);
        let (ip1, ip2) = ((i + 1) % n, (i + 2) % n);
        f[i] = spec.w1_prime(q[ip1] - q[i]) - spec.w1_prime(q[i] - q[im1])
            + spec.w2_prime(q[ip2] - q[i])
            - spec.w2_prime(q[i] - q[im2]);
    }
}

/// One velocity-Verlet step. `run` reuses the closing force evaluation;
/// this standalone form recomputes it.
pub fn step_verlet<T: Real>(
    state: &LatticeState<T>,
    dt: T,
    spec: &PotentialSpec<T>,
) -> LatticeState<T> {
    let mut next = state.clone();
    let mut f = forces(&state.q, spec);
    verlet_into(&mut next, dt, spec, &mut f);
    next
}

/// In-place step with the force buffer carried across steps: on entry `f`
/// holds forces(q), on exit forces(q').
fn verlet_into<T: Real>(
    state: &mut LatticeState<T>,
    dt: T,
    spec: &PotentialSpec<T>,
    f: &mut [T],
) {
    let half = dt / T::two();
    for i in 0..state.n_sites {
        state.p[i] = state.p[i] + half * f[i];
        state.q[i] = state.q[i] + dt * state.p[i];
    }
    forces_into(&state.q, spec, f);
    for i in 0..state.n_sites {
        state.p[i] = state.p[i] + half * f[i];
    }
    state.t = state.t + dt;
}

/// H = sum_n p_n^2/2 + W1(q_{n+1}-q_n) + W2(q_{n+2}-q_n), summed pairwise
/// so the result does not depend on evaluation chunking.
pub fn energy<T: Real>(state: &LatticeState<T>, spec: &PotentialSpec<T>) -> T {
    let n = state.n_sites;
    let terms: Vec<T> = (0..n)
        .map(|i| {
            let (ip1, ip2) = ((i + 1) % n, (i + 2) % n);
            state.p[i] * state.p[i] / T::two()
                + spec.w1(state.q[ip1] - state.q[i])
                + spec.w2(state.q[ip2] - state.q[i])
        })
        .collect();
    pairwise_sum(&terms)
}

pub fn momentum<T: Real>(state: &LatticeState<T>) -> T {
    pairwise_sum(&state.p)
}

/// A traveling profile continued by zero outside its window, so a finite
/// window can seed (and be compared against) an arbitrarily long chain.
pub struct ZeroTailExtension<'a, T: Real>(pub &'a dyn TravelingProfile<T>);

impl<T: Real> ZeroTailExtension<'_, T> {
    fn inside(&self, xi: T) -> bool {
        match self.0.domain() {
            Some((lo, hi)) => xi >= lo && xi <= hi,
            None => true,
        }
    }
}

impl<T: Real> TravelingProfile<T> for ZeroTailExtension<'_, T> {
    fn value(&self, xi: T) -> T {
        if self.inside(xi) {
            self.0.value(xi)
        } else {
            T::zero()
        }
    }

    fn slope(&self, xi: T) -> T {
        if self.inside(xi) {
            self.0.slope(xi)
        } else {
            T::zero()
        }
    }

    fn values_uniform(&self, start: T, step: T, count: usize) -> Vec<T> {
        let Some((lo, hi)) = self.0.domain() else {
            return self.0.values_uniform(start, step, count);
        };
        // the overlap of the sample comb with the window is one contiguous
        // run of indices
        let mut out = vec![T::zero(); count];
        let j0 = ((lo - start) / step).ceil().max(T::zero());
        let j1 = ((hi - start) / step).floor();
        if j1 < j0 {
            return out;
        }
        let (j0, j1) = (as_usize(j0), as_usize(j1).min(count - 1));
        if j0 > j1 {
            return out;
        }
        let inner =
            self.0.values_uniform(start + step * T::of_usize(j0), step, j1 - j0 + 1);
        out[j0..=j1].copy_from_slice(&inner);
        out
    }
}

fn as_usize<T: Real>(x: T) -> usize {
    x.to_f64().map(|v| v.max(0.0) as usize).unwrap_or(0)
}

/// Tracks the sup-norm distance of a chain state to the rigidly shifted
/// profile family v(n - sigma), along with the best shift.
///
/// A pulse is an oscillatory wavepacket, so the misfit over sigma is a
/// comb of valleys one carrier period apart. The shift is located by the
/// band-limited correlation C(sigma) = sum_n q_n v(n - sigma); for wide
/// envelopes the correlation teeth differ by under a percent and the
/// scan can land one tooth off, so the sup-norm refinement is repeated
/// in the two neighboring valleys and the deepest floor wins.
pub struct ShapeTracker<'a, T: Real> {
    profile: &'a dyn TravelingProfile<T>,
    c: T,
    period: usize,
    /// Ring-DFT coefficients of the integer-sampled profile that carry
    /// weight, as (signed frequency, coefficient) pairs.
    band: Vec<(T, Complex<T>)>,
    peak: T,
    /// Valley spacing of the misfit comb, from the band's dominant
    /// frequency; zero when the profile has no carrier.
    tooth: T,
    /// Golden-section tolerance on the shift.
    pub shift_tol: T,
    last: Option<(T, T)>,
}

impl<'a, T: Real> ShapeTracker<'a, T> {
    pub fn new(profile: &'a dyn TravelingProfile<T>, c: T, n_sites: usize) -> Self {
        let half = n_sites / 2;
        let ext = ZeroTailExtension(profile);
        let table = ext.values_uniform(-T::of_usize(half), T::one(), n_sites);
        // refine the integer-sampled peak so the normalization is the true
        // sup of |v|
        let mut peak = T::zero();
        let mut at = 0usize;
        for (i, &v) in table.iter().enumerate() {
            if v.abs() > peak {
                peak = v.abs();
                at = i;
            }
        }
        if peak > T::zero() {
            let center = T::of_usize(at) - T::of_usize(half);
            let (_, neg) = golden_min(center - T::one(), center + T::one(), T::of(1e-10), |s| {
                -ext.value(s).abs()
            });
            peak = peak.max(-neg);
        }
        // g_f = sum over integer samples y of v(y) e^{-2 pi i f y / P},
        // with f signed so fractional shifts interpolate correctly
        let p = T::of_usize(n_sites);
        let tau = T::of(std::f64::consts::TAU);
        let mut coeffs = Vec::with_capacity(n_sites);
        let mut top = T::zero();
        for m in 0..n_sites {
            let f =
                if m <= n_sites / 2 { T::of_usize(m) } else { T::of_usize(m) - p };
            let step = -tau * f / p;
            let rot = Complex::new(step.cos(), step.sin());
            let start = step * -T::of_usize(half);
            let mut ph = Complex::new(start.cos(), start.sin());
            let mut g = Complex::new(T::zero(), T::zero());
            for &v in &table {
                g = g + ph.scale(v);
                ph = ph * rot;
            }
            top = top.max(g.norm_sqr());
            coeffs.push((f, g));
        }
        let cut = top * T::of(1e-8);
        let band: Vec<(T, Complex<T>)> =
            coeffs.into_iter().filter(|(_, g)| g.norm_sqr() > cut).collect();
        let mut fstar = T::zero();
        let mut gmax = T::zero();
        for (f, g) in &band {
            if f.abs() > T::zero() && g.norm_sqr() > gmax {
                gmax = g.norm_sqr();
                fstar = f.abs();
            }
        }
        let tooth = if fstar > T::zero() { p / fstar } else { T::zero() };
        ShapeTracker {
            profile,
            c,
            period: n_sites,
            band,
            peak,
            tooth,
            shift_tol: T::of(1e-10),
            last: None,
        }
    }

    /// max|v| used for normalization.
    pub fn peak(&self) -> T {
        self.peak
    }

    /// Sup misfit at fractional shift: batch-evaluate the profile on the
    /// arc of sites its window covers, compare against zero elsewhere.
    fn misfit(&self, q: &[T], sigma: T) -> T {
        let n = self.period;
        let (lo, hi) = match self.profile.domain() {
            Some(d) => d,
            None => (
                -T::of_usize(n / 2),
                T::of_usize(n - n / 2) - T::one(),
            ),
        };
        let m0 = (sigma + lo).ceil();
        let count = as_usize((sigma + hi).floor() - m0 + T::one()).min(n);
        let vals = self.profile.values_uniform(m0 - sigma, T::one(), count);
        let mut ring = vec![T::zero(); n];
        let m0 = to_i64(m0);
        for (j, &v) in vals.iter().enumerate() {
            ring[(m0 + j as i64).rem_euclid(n as i64) as usize] = v;
        }
        let mut worst = T::zero();
        for (qi, vi) in q.iter().zip(&ring) {
            worst = worst.max((*qi - *vi).abs());
        }
        worst
    }

    /// Correlation of the state with the shifted profile band.
    fn correlation(&self, qh: &[Complex<T>], sigma: T) -> T {
        let tau = T::of(std::f64::consts::TAU);
        let p = T::of_usize(self.period);
        let mut acc = Complex::new(T::zero(), T::zero());
        for ((f, g), qm) in self.band.iter().zip(qh) {
            let phase = -tau * *f * sigma / p;
            acc = acc + *g * *qm * Complex::new(phase.cos(), phase.sin());
        }
        acc.re
    }

    /// Best (error, shift) for this state: global correlation scan at a
    /// fifth of a site, correlation maximum by golden section, sup-norm
    /// refinement in the surrounding valley. The reported shift is the
    /// unwrapped representative nearest c t (or the previous shift
    /// advanced by c dt).
    pub fn observe(&mut self, state: &LatticeState<T>) -> (T, T) {
        let predicted = match self.last {
            Some((t_prev, s_prev)) => s_prev + self.c * (state.t - t_prev),
            None => self.c * state.t,
        };
        if !(self.peak > T::zero()) {
            return (sup_norm(&state.q), predicted);
        }
        let tau = T::of(std::f64::consts::TAU);
        let p = T::of_usize(self.period);
        // Q_f = sum_x q_x e^{2 pi i f x / P} on the band
        let qh: Vec<Complex<T>> = self
            .band
            .iter()
            .map(|(f, _)| {
                let step = tau * *f / p;
                let rot = Complex::new(step.cos(), step.sin());
                let mut ph = Complex::new(T::one(), T::zero());
                let mut acc = Complex::new(T::zero(), T::zero());
                for &qx in &state.q {
                    acc = acc + ph.scale(qx);
                    ph = ph * rot;
                }
                acc
            })
            .collect();
        let steps = 5 * self.period;
        let dsig = p / T::of_usize(steps);
        let mut best = (T::neg_infinity(), T::zero());
        for j in 0..steps {
            let sigma = dsig * T::of_usize(j);
            let corr = self.correlation(&qh, sigma);
            if corr > best.0 {
                best = (corr, sigma);
            }
        }
        let (center, _) = golden_min(best.1 - dsig, best.1 + dsig, T::of(1e-6), |s| {
            -self.correlation(&qh, s)
        });
        let check_side = self.tooth > T::zero() && self.tooth < p.half();
        let mut sigma = T::zero();
        let mut err = T::infinity();
        for m in -1i32..=1 {
            if m != 0 && !check_side {
                continue;
            }
            let c0 = center + self.tooth * T::of(m as f64);
            let (s, e) = golden_min(
                c0 - T::of(0.35),
                c0 + T::of(0.35),
                self.shift_tol,
                |s| self.misfit(&state.q, s),
            );
            if e < err {
                err = e;
                sigma = s;
            }
        }
        let err = err / self.peak;
        // unwrap toward the prediction
        let periods = ((predicted - sigma) / p).round();
        let sigma = sigma + periods * p;
        self.last = Some((state.t, sigma));
        (err, sigma)
    }
}

/// Distance of the state to the profile family, and the recovered shift,
/// seeded at c t. See `ShapeTracker` for the search strategy.
pub fn shape_error<T: Real>(
    state: &LatticeState<T>,
    profile: &dyn TravelingProfile<T>,
    c: T,
) -> (T, T) {
    ShapeTracker::new(profile, c, state.n_sites).observe(state)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct SummaryRecord<T> {
    pub t: T,
    pub energy: T,
    pub momentum: T,
    pub shape_error: Option<T>,
    pub shift: Option<T>,
}

#[derive(Debug, Clone)]
pub struct TrajectorySummary<T> {
    pub records: Vec<SummaryRecord<T>>,
    pub final_state: LatticeState<T>,
    /// States captured every `snapshot_stride` steps, when requested.
    pub snapshots: Vec<LatticeState<T>>,
}

#[derive(Debug, Clone)]
pub struct RunOptions<T> {
    pub dt: T,
    /// Steps between summary records; the initial and final states are
    /// always recorded.
    pub observe_stride: usize,
    pub snapshot_stride: Option<usize>,
}

impl<T: Real> Default for RunOptions<T> {
    fn default() -> Self {
        RunOptions { dt: T::of(0.005), observe_stride: 200, snapshot_stride: None }
    }
}

const BLOW_UP: f64 = 1e6;

/// Integrate to time t_final, recording observers on the configured
/// stride. The step count is rounded so the last step lands on t_final.
pub fn run<T: Real>(
    state0: &LatticeState<T>,
    t_final: T,
    spec: &PotentialSpec<T>,
    options: &RunOptions<T>,
    mut tracker: Option<&mut ShapeTracker<T>>,
) -> Result<TrajectorySummary<T>, LatticeError> {
    state0.validate()?;
    let dtf = options.dt.to_f64().unwrap_or(f64::NAN);
    if !(dtf > 0.0 && dtf <= 0.05) {
        return Err(LatticeError::BadTimeStep { dt: dtf });
    }
    let steps = (t_final / options.dt)
        .round()
        .to_f64()
        .map(|s| s.max(0.0) as usize)
        .unwrap_or(0);
    let dt = if steps == 0 { options.dt } else { t_final / T::of_usize(steps) };
    let stride = options.observe_stride.max(1);

    let mut state = state0.clone();
    let mut f = forces(&state.q, spec);
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let record = |state: &LatticeState<T>, tracker: &mut Option<&mut ShapeTracker<T>>| {
        let (shape, shift) = match tracker.as_deref_mut() {
            Some(tr) => {
                let (e, s) = tr.observe(state);
                (Some(e), Some(s))
            }
            None => (None, None),
        };
        SummaryRecord {
            t: state.t,
            energy: energy(state, spec),
            momentum: momentum(state),
            shape_error: shape,
            shift,
        }
    };

    records.push(record(&state, &mut tracker));
    if options.snapshot_stride.is_some() {
        snapshots.push(state.clone());
    }
    for step in 1..=steps {
        verlet_into(&mut state, dt, spec, &mut f);
        let max_q = sup_norm(&state.q);
        if !(max_q < T::of(BLOW_UP)) {
            return Err(LatticeError::BlowUp {
                t: state.t.to_f64().unwrap_or(f64::NAN),
                max_q: max_q.to_f64().unwrap_or(f64::NAN),
            });
        }
        if step % stride == 0 || step == steps {
            records.push(record(&state, &mut tracker));
        }
        if let Some(ss) = options.snapshot_stride {
            if step % ss.max(1) == 0 {
                snapshots.push(state.clone());
            }
        }
    }
    Ok(TrajectorySummary { records, final_state: state, snapshots })
}

/// Least-squares slope of shift over time: the measured wavespeed.
/// Records without a shift are skipped; needs at least two.
pub fn fit_speed<T: Real>(records: &[SummaryRecord<T>]) -> Option<T> {
    let pts: Vec<(T, T)> = records
        .iter()
        .filter_map(|r| r.shift.map(|s| (r.t, s)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = T::of_usize(pts.len());
    let (mut st, mut ss, mut stt, mut sts) = (T::zero(), T::zero(), T::zero(), T::zero());
    for &(t, s) in &pts {
        st = st + t;
        ss = ss + s;
        stt = stt + t * t;
        sts = sts + t * s;
    }
    let det = n * stt - st * st;
    if det == T::zero() {
        return None;
    }
    Some((n * sts - st * ss) / det)
}

fn to_i64<T: Real>(x: T) -> i64 {
    x.to_f64().map(|v| v as i64).unwrap_or(0)
}

/// CSV export of summary records: header `t,energy,momentum,shape_error,shift`,
/// floats at full precision, empty fields where no tracker ran.
pub fn write_summary_csv<T: Real, W: Write>(
    records: &[SummaryRecord<T>],
    out: &mut W,
) -> io::Result<()> {
    writeln!(out, "t,energy,momentum,shape_error,shift")?;
    let f = |x: T| format!("{:.16e}", x.to_f64().unwrap_or(f64::NAN));
    let opt = |x: Option<T>| x.map(&f).unwrap_or_default();
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            f(r.t),
            f(r.energy),
            f(r.momentum),
            opt(r.shape_error),
            opt(r.shift)
        )?;
    }
    Ok(())
}

/// Binary snapshot: little-endian u64 site count, f64 time, then q and p
/// as f64 runs.
pub fn write_snapshot<T: Real, W: Write>(
    state: &LatticeState<T>,
    out: &mut W,
) -> io::Result<()> {
    let f64_of = |x: T| x.to_f64().unwrap_or(f64::NAN);
    out.write_all(&(state.n_sites as u64).to_le_bytes())?;
    out.write_all(&f64_of(state.t).to_le_bytes())?;
    for &x in state.q.iter().chain(&state.p) {
        out.write_all(&f64_of(x).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(input: &mut R) -> io::Result<LatticeState<f64>> {
    let mut u = [0u8; 8];
    input.read_exact(&mut u)?;
    let n = u64::from_le_bytes(u) as usize;
    let mut next = || -> io::Result<f64> {
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let t = next()?;
    let q: Vec<f64> = (0..n).map(|_| next()).collect::<io::Result<_>>()?;
    let p: Vec<f64> = (0..n).map(|_| next()).collect::<io::Result<_>>()?;
    LatticeState::new(q, p, t)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp;
    use crate::dispersion::{self, find_critical};
    use crate::normalform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nonlinear() -> PotentialSpec<f64> {
        PotentialSpec::new(0.3, -0.2, 1.0, 1.0)
    }

    fn smooth_state(n: usize, amp: f64, seed: u64) -> LatticeState<f64> {
        // random low-mode trig field: smooth, periodic, zero mean
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = vec![0.0; n];
        let mut p = vec![0.0; n];
        for m in 1..=3 {
            let (aq, ap) = (rng.random_range(-amp..amp), rng.random_range(-amp..amp));
            let (phq, php) = (rng.random_range(0.0..6.28), rng.random_range(0.0..6.28));
            let k = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
            for i in 0..n {
                q[i] += aq * (k * i as f64 + phq).cos();
                p[i] += ap * (k * i as f64 + php).cos();
            }
        }
        LatticeState::new(q, p, 0.0).unwrap()
    }

    #[test]
    fn constant_displacement_is_force_free() {
        let spec = nonlinear();
        let q = vec![3.7; 16];
        assert!(forces(&q, &spec).iter().all(|&f| f == 0.0));
        // and the free flight it implies
        let state = LatticeState::new(q, vec![0.25; 16], 0.0).unwrap();
        let next = step_verlet(&state, 0.01, &spec);
        for i in 0..16 {
            assert!((next.q[i] - (3.7 + 0.01 * 0.25)).abs() < 1e-15);
            assert_eq!(next.p[i], 0.25);
        }
    }

    #[test]
    fn unit_displacement_force_stencil() {
        let spec = PotentialSpec::new(0.0, 0.0, 0.0, 0.0);
        let n = 12;
        let mut q = vec![0.0; n];
        q[0] = 1.0;
        let f = forces(&q, &spec);
        let expected = [-8.0, 5.0, -1.0];
        for i in 0..n {
            let d = [0, 1, 2, 3]
                .iter()
                .find(|&&d| i == d || i == n - d)
                .copied()
                .unwrap_or(3);
            let want = if d < 3 { expected[d] } else { 0.0 };
            assert_eq!(f[i], want, "site {i}");
        }
        // quadratic-form energy of the same state: two W1 bonds at 5/2,
        // two W2 bonds at -1/2
        let state = LatticeState::new(q, vec![0.0; n], 0.0).unwrap();
        assert!((energy(&state, &spec) - 4.0f64).abs() < 1e-14);
    }

    #[test]
    fn forces_telescope_to_zero() {
        let state = smooth_state(64, 0.8, 3);
        let f = forces(&state.q, &nonlinear());
        assert!(pairwise_sum(&f).abs() < 1e-12);
    }

    #[test]
    fn verlet_is_time_reversible() {
        let spec = nonlinear();
        let state = smooth_state(32, 0.4, 11);
        let mut fwd = state.clone();
        for _ in 0..50 {
            fwd = step_verlet(&fwd, 0.02, &spec);
        }
        for _ in 0..50 {
            fwd = step_verlet(&fwd, -0.02, &spec);
        }
        for i in 0..32 {
            assert!((fwd.q[i] - state.q[i]).abs() < 1e-13);
            assert!((fwd.p[i] - state.p[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn normal_mode_frequency_matches_dispersion() {
        // linear chain, single commensurate mode; count zero crossings of
        // the site-0 trace
        let spec = PotentialSpec::new(0.0, 0.0, 0.0, 0.0);
        let n = 64;
        let m = 16;
        let k = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
        let omega = dispersion::omega_sq(k).sqrt();
        let q: Vec<f64> = (0..n).map(|i| 0.01 * (k * i as f64).cos()).collect();
        let mut state = LatticeState::new(q, vec![0.0; n], 0.0).unwrap();
        let dt = 0.01;
        let mut crossings = Vec::new();
        let mut prev = (state.t, state.q[0]);
        for _ in 0..4000 {
            state = step_verlet(&state, dt, &spec);
            let cur = (state.t, state.q[0]);
            if prev.1 != 0.0 && cur.1 != 0.0 && (prev.1 > 0.0) != (cur.1 > 0.0) {
                // linear interpolation of the crossing time
                crossings.push(prev.0 - prev.1 * (cur.0 - prev.0) / (cur.1 - prev.1));
            }
            prev = cur;
        }
        assert!(crossings.len() > 10);
        let spans = crossings.len() - 1;
        let measured =
            std::f64::consts::PI * spans as f64 / (crossings[spans] - crossings[0]);
        assert!(
            ((measured - omega) / omega).abs() < 1e-3,
            "omega {measured} vs {omega}"
        );
    }

    #[test]
    fn plane_wave_amplitude_is_steady() {
        // standing mode on the linear chain. Verlet conserves
        // q^2 + (p/obar)^2 with obar = omega sqrt(1 - (omega dt/2)^2),
        // so the mode amplitude at the antinode site must hold for the
        // whole run: the integrator neither pumps nor damps the wave.
        let spec = PotentialSpec::new(0.0, 0.0, 0.0, 0.0);
        let n = 64;
        let k = 2.0 * std::f64::consts::PI * 16.0 / n as f64;
        let omega = dispersion::omega_sq(k).sqrt();
        let dt = 0.005;
        let obar = omega * (1.0 - (omega * dt / 2.0).powi(2)).sqrt();
        let amp = 0.01;
        let q: Vec<f64> = (0..n).map(|i| amp * (k * i as f64).cos()).collect();
        let mut state = LatticeState::new(q, vec![0.0; n], 0.0).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..20_000 {
            state = step_verlet(&state, dt, &spec);
            let a = (state.q[0].powi(2) + (state.p[0] / obar).powi(2)).sqrt();
            worst = worst.max((a - amp).abs() / amp);
        }
        assert!(worst < 1e-6, "amplitude wobble {worst:e}");
    }

    #[test]
    fn energy_drift_shrinks_quadratically_in_dt() {
        let spec = nonlinear();
        let state = smooth_state(64, 0.3, 7);
        let drift = |dt: f64| {
            let options = RunOptions { dt, observe_stride: 10, snapshot_stride: None };
            let summary = run(&state, 10.0, &spec, &options, None).unwrap();
            let h0 = summary.records[0].energy;
            summary
                .records
                .iter()
                .map(|r| (r.energy - h0).abs())
                .fold(0.0f64, f64::max)
                / h0.abs()
        };
        let (coarse, fine) = (drift(0.04), drift(0.02));
        let ratio = coarse / fine;
        assert!(
            (3.2..=4.8).contains(&ratio),
            "drift {coarse:e} -> {fine:e}, ratio {ratio}"
        );
    }

    #[test]
    fn momentum_is_conserved_along_the_run() {
        let spec = nonlinear();
        let state = smooth_state(64, 0.5, 19);
        let before = momentum(&state);
        let options = RunOptions { dt: 0.005, observe_stride: 10_000, snapshot_stride: None };
        let summary = run(&state, 50.0, &spec, &options, None).unwrap();
        assert!((momentum(&summary.final_state) - before).abs() < 1e-12);
    }

    #[test]
    fn translation_equivariance_is_bitwise() {
        let spec = nonlinear();
        let state = smooth_state(32, 0.4, 23);
        let shift = 7usize;
        let rot = |xs: &[f64]| -> Vec<f64> {
            (0..xs.len()).map(|i| xs[(i + xs.len() - shift) % xs.len()]).collect()
        };
        let rotated =
            LatticeState::new(rot(&state.q), rot(&state.p), 0.0).unwrap();
        let mut a = state.clone();
        let mut b = rotated;
        for _ in 0..100 {
            a = step_verlet(&a, 0.01, &spec);
            b = step_verlet(&b, 0.01, &spec);
        }
        assert_eq!(rot(&a.q), b.q);
        assert_eq!(rot(&a.p), b.p);
    }

    #[test]
    fn time_reversal_recovers_the_initial_state() {
        let spec = nonlinear();
        let state = smooth_state(64, 0.3, 29);
        let options = RunOptions { dt: 0.005, observe_stride: 10_000, snapshot_stride: None };
        let fwd = run(&state, 10.0, &spec, &options, None).unwrap();
        let mut back = fwd.final_state;
        for p in back.p.iter_mut() {
            *p = -*p;
        }
        back.t = 0.0;
        let ret = run(&back, 10.0, &spec, &options, None).unwrap();
        let worst = ret
            .final_state
            .q
            .iter()
            .zip(&state.q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-8, "reversal defect {worst:e}");
    }

    #[test]
    fn zero_time_run_returns_the_initial_state() {
        let spec = nonlinear();
        let state = smooth_state(16, 0.2, 31);
        let summary = run(&state, 0.0, &spec, &RunOptions::default(), None).unwrap();
        assert_eq!(summary.records.len(), 1);
        assert_eq!(summary.final_state, state);
    }

    #[test]
    fn runaway_amplitude_is_reported_as_blow_up() {
        // softening bond (negative quartic term in W1) with a kick well
        // past the stability ridge
        let spec = PotentialSpec::new(0.0, 0.0, -1.0, 0.0);
        let mut q = vec![0.0; 16];
        q[0] = 50.0;
        let state = LatticeState::new(q, vec![0.0; 16], 0.0).unwrap();
        let err = run(&state, 5.0, &spec, &RunOptions::default(), None).unwrap_err();
        assert!(matches!(err, LatticeError::BlowUp { .. }), "{err}");
    }

    #[test]
    fn degenerate_states_are_rejected() {
        assert!(matches!(
            LatticeState::new(vec![0.0; 4], vec![0.0; 4], 0.0),
            Err(LatticeError::TooShort { n: 4 })
        ));
        assert!(matches!(
            LatticeState::new(vec![0.0; 9], vec![0.0; 8], 0.0),
            Err(LatticeError::LengthMismatch { .. })
        ));
        assert!(matches!(
            LatticeState::new(vec![f64::NAN; 8], vec![0.0; 8], 0.0),
            Err(LatticeError::NotFinite)
        ));
        let ok = LatticeState::new(vec![0.0; 8], vec![0.0; 8], 0.0).unwrap();
        let bad_dt = RunOptions { dt: 0.2, ..Default::default() };
        let spec = nonlinear();
        assert!(matches!(
            run(&ok, 1.0, &spec, &bad_dt, None),
            Err(LatticeError::BadTimeStep { .. })
        ));
    }

    fn pulse_profile() -> (bvp::ProfileSolution<f64>, f64) {
        let crit = find_critical::<f64>().unwrap();
        let spec = PotentialSpec::cubic(1.0, 1.0);
        let coeffs = normalform::compute_all(&crit, &spec);
        let config = bvp::SolveConfig { n_modes: 1024, ..Default::default() };
        let sol = bvp::solve(0.08, &crit, &coeffs, &spec, &config).unwrap();
        let c = sol.c;
        (sol, c)
    }

    #[test]
    fn shape_error_recovers_an_exact_translation() {
        let (sol, c) = pulse_profile();
        let interp = sol.interpolant();
        let ext = ZeroTailExtension(&interp);
        // chain longer than the window, sampled at sigma = c t
        let n = 384;
        let sigma = 192.0;
        let (q, p) = crate::waves::lattice_initial_data(&ext, c, n, sigma).unwrap();
        let state = LatticeState::new(q.clone(), p, sigma / c).unwrap();
        let (err, shift) = shape_error(&state, &interp, c);
        assert!(err < 1e-10, "exact sample misfit {err:e}");
        assert!((shift - sigma).abs() < 1e-8, "shift {shift}");

        // scaling the state by 1.1 leaves a 10% relative misfit
        let scaled: Vec<f64> = q.iter().map(|x| 1.1 * x).collect();
        let state = LatticeState::new(scaled, vec![0.0; n], sigma / c).unwrap();
        let (err, _) = shape_error(&state, &interp, c);
        assert!((err - 0.1).abs() < 0.02, "scaled misfit {err}");
    }

    #[test]
    fn tracked_pulse_travels_at_the_solved_speed() {
        let (sol, c) = pulse_profile();
        let interp = sol.interpolant();
        let ext = ZeroTailExtension(&interp);
        let n_sites = 512;
        let x0 = 160.0;
        let (q, p) = crate::waves::lattice_initial_data(&ext, c, n_sites, x0).unwrap();
        let state = LatticeState::new(q, p, x0 / c).unwrap();
        let spec = PotentialSpec::cubic(1.0, 1.0);
        let mut tracker = ShapeTracker::new(&interp, c, n_sites);
        let options = RunOptions { dt: 0.005, observe_stride: 200, snapshot_stride: None };
        let summary = run(&state, 4.0, &spec, &options, Some(&mut tracker)).unwrap();
        for r in &summary.records {
            let e = r.shape_error.unwrap();
            assert!(e < 2e-3, "shape error {e:e} at t {}", r.t);
        }
        let speed = fit_speed(&summary.records).unwrap();
        assert!(((speed - c) / c).abs() < 0.01, "speed {speed} vs {c}");
    }

    #[test]
    fn summary_csv_and_snapshots_round_trip() {
        let spec = nonlinear();
        let state = smooth_state(16, 0.2, 41);
        let options = RunOptions { dt: 0.01, observe_stride: 5, snapshot_stride: Some(10) };
        let summary = run(&state, 0.2, &spec, &options, None).unwrap();

        let mut csv = Vec::new();
        write_summary_csv(&summary.records, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,energy,momentum,shape_error,shift"));
        assert_eq!(lines.count(), summary.records.len());
        assert!(text.lines().nth(1).unwrap().ends_with(",,"), "no tracker columns");

        assert_eq!(summary.snapshots.len(), 3);
        let mut buf = Vec::new();
        write_snapshot(&summary.final_state, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 16 * 16);
        let back = read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(back, summary.final_state);
    }

    proptest::proptest! {
        // telescoping and site-relabeling hold for any bond coefficients
        // and any displacement field
        #[test]
        fn force_sum_and_rotation_invariance(
            seed in 0u64..512,
            n in 8usize..40,
            a1 in -2.0f64..2.0,
            b1 in -2.0f64..2.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = PotentialSpec::new(a1, -0.5 * a1, b1, 0.3 * b1);
            let q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = forces(&q, &spec);
            let scale = f.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            proptest::prop_assert!(pairwise_sum(&f).abs() < 1e-12 * scale * n as f64);

            let shift = (seed as usize) % n;
            let rot_q: Vec<f64> = (0..n).map(|i| q[(i + n - shift) % n]).collect();
            let rot_f = forces(&rot_q, &spec);
            for i in 0..n {
                proptest::prop_assert_eq!(rot_f[i], f[(i + n - shift) % n]);
            }
        }
    }
}
