//! Periodic collocation solver for the traveling-wave advance-delay
//! equation
//!
//!   c^2 v'' = W1'(v(xi+1) - v(xi)) - W1'(v(xi) - v(xi-1))
//!           + W2'(v(xi+2) - v(xi)) - W2'(v(xi) - v(xi-2))
//!
//! on a window of length L with trigonometric differentiation and exact
//! band-limited shifts. Newton's method runs on a bordered system that
//! pins the zero mean (the equation is invariant under v -> v + const)
//! and the translation phase.

use num_complex::Complex;
use rustfft::FftNum;
use serde::{Deserialize, Serialize};

use crate::dispersion::{self, CriticalData, DispersionError};
use crate::linalg::{self, Dense};
use crate::normalform::NormalFormCoeffs;
use crate::potentials::PotentialSpec;
use crate::real::Real;
use crate::spectral::SpectralGrid;
use crate::util::{golden_min, pairwise_sum, sup_norm};
use crate::waves::{self, TravelingProfile, WaveAnsatz};

#[derive(Debug, thiserror::Error)]
pub enum BvpError {
    #[error("grid size {n} is not a power of two")]
    NonPowerOfTwo { n: usize },
    #[error("window length {length} too small; the stencil reaches 2 sites each way and needs length > 8")]
    WindowTooSmall { length: f64 },
    #[error("window length {length} cannot hold the pulse tails; need at least {need}")]
    TailNotResolved { length: f64, need: f64 },
    #[error("cubic coefficient is not sign-definite; no pulse family bifurcates here")]
    ExistenceConditionViolated,
    #[error("Newton stalled at sup residual {residual:e} after {iterations} iterations (trace {trace:?})")]
    NoConvergence { residual: f64, iterations: usize, trace: Vec<f64> },
    #[error("continuation list must be strictly increasing and positive; saw {next} after {prev}")]
    NotAscending { prev: f64, next: f64 },
    #[error("continuation failed at epsilon {epsilon}: {source}")]
    AtEpsilon { epsilon: f64, source: Box<BvpError> },
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
}

/// Converged profile with its certificate numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct ProfileSolution<T> {
    pub epsilon: T,
    pub c: T,
    pub domain_length: T,
    /// Grid size; a power of two.
    pub n_modes: usize,
    /// Samples on xi_j = -L/2 + j L/N, mean zero.
    pub v: Vec<T>,
    /// Sup norm of the collocation residual.
    pub residual_norm: T,
    /// max - min of the conserved line integral over the interior.
    pub first_integral_drift: T,
    /// Best reflection defect over all centers, relative to sup |v|.
    pub symmetry_defect: T,
    pub newton_iterations: usize,
}

/// Newton/window policy knobs. `domain_length: None` selects
/// max(48 / width, 64), which keeps the decaying part of the outermost
/// tenth of the window below 1e-8 of the peak. A constant tail offset
/// of order 1/L remains on top of that; see `TailMetrics`.
#[derive(Debug, Clone)]
pub struct SolveConfig<T> {
    pub n_modes: usize,
    pub domain_length: Option<T>,
    pub newton_tol: T,
    pub max_newton: usize,
    pub max_backtracks: usize,
    /// Bordered systems of size n_modes + 2 at or below this use dense LU;
    /// larger ones use preconditioned GMRES.
    pub dense_threshold: usize,
    pub gmres_restart: usize,
    pub gmres_max_restarts: usize,
}

impl<T: Real> Default for SolveConfig<T> {
    fn default() -> Self {
        SolveConfig {
            n_modes: 2048,
            domain_length: None,
            newton_tol: T::of(1e-10),
            max_newton: 25,
            max_backtracks: 8,
            dense_threshold: 512,
            gmres_restart: 140,
            gmres_max_restarts: 30,
        }
    }
}

/// Per-solve diagnostics that are not part of the solution contract.
#[derive(Debug, Clone)]
pub struct SolveReport<T> {
    /// Sup residual before each Newton step, then the final value.
    pub residual_history: Vec<T>,
    /// Dense path hit the condition cap and fell back to least squares.
    pub used_least_squares: bool,
    /// Total GMRES iterations across all Newton steps (0 on the dense path).
    pub gmres_iterations: usize,
}

/// All five spectral fields the residual and Jacobian need, from one
/// forward transform.
struct ShiftSet<T> {
    xx: Vec<T>,
    p1: Vec<T>,
    m1: Vec<T>,
    p2: Vec<T>,
    m2: Vec<T>,
}

fn shift_set<T: Real + FftNum>(grid: &SpectralGrid<T>, v: &[T]) -> ShiftSet<T> {
    let vh = grid.to_freq(v);
    let shifted = |d: T| -> Vec<T> {
        let mut w = vh.clone();
        grid.shift_freq(&mut w, d);
        grid.to_phys(&w)
    };
    // second derivative: (ik)^2 is real, so the Nyquist mode needs no
    // special case
    let mut dh = vh.clone();
    for (j, z) in dh.iter_mut().enumerate() {
        let k = grid.wavenumber(j);
        *z = z.scale(-k * k);
    }
    ShiftSet {
        xx: grid.to_phys(&dh),
        p1: shifted(T::one()),
        m1: shifted(-T::one()),
        p2: shifted(T::two()),
        m2: shifted(-T::two()),
    }
}

fn check_grid<T: Real>(n: usize, length: T) -> Result<(), BvpError> {
    if !n.is_power_of_two() || n < 4 {
        return Err(BvpError::NonPowerOfTwo { n });
    }
    if !(length > T::of(8.0)) {
        return Err(BvpError::WindowTooSmall { length: length.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(())
}

/// Collocation residual F(v) on the nodes of a length-`length` window.
pub fn residual<T: Real + FftNum>(
    v: &[T],
    c: T,
    length: T,
    spec: &PotentialSpec<T>,
) -> Result<Vec<T>, BvpError> {
    check_grid(v.len(), length)?;
    let grid = SpectralGrid::symmetric(v.len(), length);
    Ok(residual_on(&grid, v, c, spec))
}

fn residual_on<T: Real + FftNum>(
    grid: &SpectralGrid<T>,
    v: &[T],
    c: T,
    spec: &PotentialSpec<T>,
) -> Vec<T> {
    let s = shift_set(grid, v);
    let c2 = c * c;
    (0..v.len())
        .map(|j| {
            let force = spec.w1_prime(s.p1[j] - v[j]) - spec.w1_prime(v[j] - s.m1[j])
                + spec.w2_prime(s.p2[j] - v[j])
                - spec.w2_prime(v[j] - s.m2[j]);
            c2 * s.xx[j] - force
        })
        .collect()
}

/// W'' weights at the current iterate's four difference fields.
struct JacWeights<T> {
    w1p: Vec<T>,
    w1m: Vec<T>,
    w2p: Vec<T>,
    w2m: Vec<T>,
}

fn jac_weights<T: Real + FftNum>(
    grid: &SpectralGrid<T>,
    v: &[T],
    spec: &PotentialSpec<T>,
) -> JacWeights<T> {
    let s = shift_set(grid, v);
    let n = v.len();
    let mut w = JacWeights {
        w1p: Vec::with_capacity(n),
        w1m: Vec::with_capacity(n),
        w2p: Vec::with_capacity(n),
        w2m: Vec::with_capacity(n),
    };
    for j in 0..n {
        w.w1p.push(spec.w1_second(s.p1[j] - v[j]));
        w.w1m.push(spec.w1_second(v[j] - s.m1[j]));
        w.w2p.push(spec.w2_second(s.p2[j] - v[j]));
        w.w2m.push(spec.w2_second(v[j] - s.m2[j]));
    }
    w
}

fn jacobian_apply<T: Real + FftNum>(
    grid: &SpectralGrid<T>,
    w: &JacWeights<T>,
    c: T,
    u: &[T],
) -> Vec<T> {
    let s = shift_set(grid, u);
    let c2 = c * c;
    (0..u.len())
        .map(|j| {
            let force = w.w1p[j] * (s.p1[j] - u[j]) - w.w1m[j] * (u[j] - s.m1[j])
                + w.w2p[j] * (s.p2[j] - u[j])
                - w.w2m[j] * (u[j] - s.m2[j]);
            c2 * s.xx[j] - force
        })
        .collect()
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let prods: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x * y).collect();
    pairwise_sum(&prods)
}

fn mean<T: Real>(v: &[T]) -> T {
    pairwise_sum(v) / T::of_usize(v.len())
}

/// Bordered operator: rows are the Jacobian plus two unit-scaled
/// constraint rows (mean and phase), columns append the gauge direction
/// 1/sqrt(n) and the unit phase reference.
fn bordered_apply<T: Real + FftNum>(
    grid: &SpectralGrid<T>,
    w: &JacWeights<T>,
    c: T,
    wref: &[T],
    x: &[T],
) -> Vec<T> {
    let n = wref.len();
    let (u, border) = x.split_at(n);
    let (alpha, beta) = (border[0], border[1]);
    let sqrt_n = T::of_usize(n).sqrt();
    let mut out = jacobian_apply(grid, w, c, u);
    for (o, &wi) in out.iter_mut().zip(wref) {
        *o = *o + alpha / sqrt_n + beta * wi;
    }
    out.push(pairwise_sum(u) / sqrt_n);
    out.push(dot(u, wref));
    out
}

/// Fourier-symbol preconditioner for the bordered system: divide each mode
/// by the linear-chain symbol f_c(k), clamped away from zero; pass the two
/// border entries through.
fn make_preconditioner<T: Real + FftNum>(
    grid: &SpectralGrid<T>,
    c: T,
) -> impl Fn(&[T]) -> Vec<T> + '_ {
    let n = grid.len();
    let clamp = T::of(0.01);
    let divisors: Vec<T> = (0..n)
        .map(|j| {
            if j == 0 {
                return -T::one();
            }
            let f = dispersion::f_c(grid.wavenumber(j).abs(), c);
            if f.abs() < clamp {
                if f < T::zero() {
                    -clamp
                } else {
                    clamp
                }
            } else {
                f
            }
        })
        .collect();
    move |r: &[T]| -> Vec<T> {
        let (ru, border) = r.split_at(n);
        let mut rh = grid.to_freq(ru);
        for (z, &d) in rh.iter_mut().zip(&divisors) {
            *z = z.scale(T::one() / d);
        }
        let mut out = grid.to_phys(&rh);
        out.extend_from_slice(border);
        out
    }
}

struct NewtonOutcome<T> {
    v: Vec<T>,
    iterations: usize,
    trace: Vec<T>,
    used_least_squares: bool,
    gmres_iterations: usize,
}

fn newton<T: Real + FftNum>(
    grid: &SpectralGrid<T>,
    seed: Vec<T>,
    c: T,
    spec: &PotentialSpec<T>,
    config: &SolveConfig<T>,
) -> Result<NewtonOutcome<T>, BvpError> {
    let n = grid.len();
    let sqrt_n = T::of_usize(n).sqrt();
    let v0 = seed.clone();
    // frozen phase reference: the seed's derivative, unit l2 norm
    let wref = {
        let d = grid.deriv(&seed, 1);
        let norm = dot(&d, &d).sqrt();
        assert!(norm > T::zero(), "seed profile must not be constant");
        d.iter().map(|&x| x / norm).collect::<Vec<T>>()
    };

    let mut v = seed;
    let mut trace: Vec<T> = Vec::new();
    let mut used_least_squares = false;
    let mut gmres_iterations = 0usize;

    for iter in 0..config.max_newton {
        let f = residual_on(grid, &v, c, spec);
        let r = sup_norm(&f);
        trace.push(r);
        if r <= config.newton_tol {
            return Ok(NewtonOutcome {
                v,
                iterations: iter,
                trace,
                used_least_squares,
                gmres_iterations,
            });
        }

        let weights = jac_weights(grid, &v, spec);
        let mut rhs: Vec<T> = f.iter().map(|&x| -x).collect();
        rhs.push(-pairwise_sum(&v) / sqrt_n);
        let vdiff: Vec<T> = v.iter().zip(&v0).map(|(&a, &b)| a - b).collect();
        rhs.push(-dot(&vdiff, &wref));

        let delta: Vec<T> = if n <= config.dense_threshold {
            let dim = n + 2;
            let mut mat = Dense::zeros(dim);
            let mut e = vec![T::zero(); dim];
            for col in 0..dim {
                e[col] = T::one();
                let out = bordered_apply(grid, &weights, c, &wref, &e);
                for (row, &val) in out.iter().enumerate() {
                    mat.set(row, col, val);
                }
                e[col] = T::zero();
            }
            let mut factored = mat.clone();
            let sol = match factored.lu_factor() {
                Ok(piv) => {
                    let mut dmax = T::zero();
                    let mut dmin = T::infinity();
                    for i in 0..dim {
                        let d = factored.at(i, i).abs();
                        dmax = dmax.max(d);
                        dmin = dmin.min(d);
                    }
                    if dmin > T::zero() && dmax / dmin < T::of(1e12) {
                        Some(factored.lu_solve(&piv, &rhs))
                    } else {
                        None
                    }
                }
                Err(linalg::LinalgError::Singular { .. }) => None,
            };
            match sol {
                Some(x) => x,
                None => {
                    used_least_squares = true;
                    let mut flat = vec![T::zero(); dim * dim];
                    for i in 0..dim {
                        for j in 0..dim {
                            flat[i * dim + j] = mat.at(i, j);
                        }
                    }
                    let mut b = rhs.clone();
                    linalg::lstsq_qr(&mut flat, dim, dim, &mut b)
                }
            }
        } else {
            let apply = |x: &[T]| bordered_apply(grid, &weights, c, &wref, x);
            let precond = make_preconditioner(grid, c);
            let rhs_norm = dot(&rhs, &rhs).sqrt();
            let tol = rhs_norm * T::of(1e-12) + T::of(1e-15);
            let x0 = vec![T::zero(); n + 2];
            let out = linalg::gmres(
                &apply,
                &precond,
                &rhs,
                &x0,
                config.gmres_restart,
                config.gmres_max_restarts,
                tol,
            );
            gmres_iterations += out.iterations;
            out.x
        };

        // backtracking on the sup residual
        let mut step = T::one();
        let mut accepted = false;
        for _ in 0..=config.max_backtracks {
            let trial: Vec<T> = v
                .iter()
                .zip(&delta[..n])
                .map(|(&vi, &di)| vi + step * di)
                .collect();
            let rf = sup_norm(&residual_on(grid, &trial, c, spec));
            if rf < r {
                v = trial;
                accepted = true;
                break;
            }
            step = step.half();
        }
        if !accepted {
            return Err(BvpError::NoConvergence {
                residual: r.to_f64().unwrap_or(f64::NAN),
                iterations: iter,
                trace: trace.iter().map(|t| t.to_f64().unwrap_or(f64::NAN)).collect(),
            });
        }
    }

    let f = residual_on(grid, &v, c, spec);
    let r = sup_norm(&f);
    trace.push(r);
    if r <= config.newton_tol {
        return Ok(NewtonOutcome {
            v,
            iterations: config.max_newton,
            trace,
            used_least_squares,
            gmres_iterations,
        });
    }
    Err(BvpError::NoConvergence {
        residual: r.to_f64().unwrap_or(f64::NAN),
        iterations: config.max_newton,
        trace: trace.iter().map(|t| t.to_f64().unwrap_or(f64::NAN)).collect(),
    })
}

/// `width` is the exact envelope decay rate sqrt(s0(c)); the hard lower
/// bound uses the a-priori rate epsilon sqrt(s0') so that a window sized
/// from epsilon alone is always admissible.
fn window_length<T: Real>(
    width: T,
    nominal_width: T,
    config: &SolveConfig<T>,
) -> Result<T, BvpError> {
    let need = T::of(40.0) / nominal_width;
    let length = config
        .domain_length
        .unwrap_or_else(|| (T::of(48.0) / width.min(nominal_width)).max(T::of(64.0)));
    if length < need {
        return Err(BvpError::TailNotResolved {
            length: length.to_f64().unwrap_or(f64::NAN),
            need: need.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(length)
}

fn finalize<T: Real + FftNum>(
    grid: &SpectralGrid<T>,
    mut v: Vec<T>,
    epsilon: T,
    c: T,
    spec: &PotentialSpec<T>,
    iterations: usize,
) -> Result<ProfileSolution<T>, BvpError> {
    let m = mean(&v);
    for x in v.iter_mut() {
        *x = *x - m;
    }
    let residual_norm = sup_norm(&residual_on(grid, &v, c, spec));
    let mut sol = ProfileSolution {
        epsilon,
        c,
        domain_length: grid.length(),
        n_modes: grid.len(),
        v,
        residual_norm,
        first_integral_drift: T::zero(),
        symmetry_defect: T::zero(),
        newton_iterations: iterations,
    };
    sol.symmetry_defect = symmetry_defect_on(grid, &sol.v);
    let samples = interior_samples(grid, 33);
    let values = first_integral(&sol, spec, &samples)?;
    let hi = values.iter().cloned().fold(T::neg_infinity(), T::max);
    let lo = values.iter().cloned().fold(T::infinity(), T::min);
    sol.first_integral_drift = hi - lo;
    Ok(sol)
}

/// Evenly spaced points covering the interior 80% of the window.
pub fn interior_samples<T: Real + FftNum>(grid: &SpectralGrid<T>, count: usize) -> Vec<T> {
    let len = grid.length();
    let lo = grid.origin() + len * T::of(0.1);
    let span = len * T::of(0.8);
    (0..count)
        .map(|i| lo + span * T::of_usize(i) / T::of_usize(count.saturating_sub(1).max(1)))
        .collect()
}

/// Solve for the pulse at c = c* + epsilon^2, seeding Newton with the
/// leading-order profile (theta = 0).
pub fn solve<T: Real + FftNum>(
    epsilon: T,
    crit: &CriticalData<T>,
    coeffs: &NormalFormCoeffs<T>,
    spec: &PotentialSpec<T>,
    config: &SolveConfig<T>,
) -> Result<ProfileSolution<T>, BvpError> {
    solve_traced(epsilon, crit, coeffs, spec, config).map(|(sol, _)| sol)
}

/// `solve` plus convergence diagnostics.
pub fn solve_traced<T: Real + FftNum>(
    epsilon: T,
    crit: &CriticalData<T>,
    coeffs: &NormalFormCoeffs<T>,
    spec: &PotentialSpec<T>,
    config: &SolveConfig<T>,
) -> Result<(ProfileSolution<T>, SolveReport<T>), BvpError> {
    assert!(
        spec.is_even(),
        "pulse continuation assumes an even potential (a1 = a2 = 0)"
    );
    if epsilon == T::zero() {
        let length = config.domain_length.unwrap_or_else(|| T::of(64.0));
        check_grid(config.n_modes, length)?;
        let sol = ProfileSolution {
            epsilon,
            c: crit.c_star,
            domain_length: length,
            n_modes: config.n_modes,
            v: vec![T::zero(); config.n_modes],
            residual_norm: T::zero(),
            first_integral_drift: T::zero(),
            symmetry_defect: T::zero(),
            newton_iterations: 0,
        };
        let report = SolveReport {
            residual_history: vec![T::zero()],
            used_least_squares: false,
            gmres_iterations: 0,
        };
        return Ok((sol, report));
    }
    if !coeffs.sign_condition_ok {
        return Err(BvpError::ExistenceConditionViolated);
    }
    let (ansatz, s0, p0) = WaveAnsatz::at_epsilon(epsilon, T::zero(), crit, coeffs)
        .map_err(|_| BvpError::ExistenceConditionViolated)?;
    let length = window_length(ansatz.width, epsilon * crit.s0_prime.sqrt(), config)?;
    check_grid(config.n_modes, length)?;
    let grid = SpectralGrid::symmetric(config.n_modes, length);
    let mut seed: Vec<T> = grid
        .nodes()
        .iter()
        .map(|&xi| waves::leading_profile(xi, &ansatz, coeffs, crit.k0, s0, p0))
        .collect();
    let m = mean(&seed);
    for x in seed.iter_mut() {
        *x = *x - m;
    }
    let out = newton(&grid, seed, ansatz.c, spec, config)?;
    let sol = finalize(&grid, out.v, epsilon, ansatz.c, spec, out.iterations)?;
    let report = SolveReport {
        residual_history: out.trace,
        used_least_squares: out.used_least_squares,
        gmres_iterations: out.gmres_iterations,
    };
    Ok((sol, report))
}

/// How often a warm-start step may be halved before the failure is
/// reported. Depth 6 admits ratios eps_next/eps_prev up to ~2^64 in
/// principle; in practice one level absorbs a doubling of epsilon.
const MAX_BISECTIONS: usize = 6;

/// Solve along a strictly increasing epsilon list, reusing each profile
/// (trig-resampled and amplitude-rescaled) to seed the next. A rescaled
/// seed keeps the previous envelope width, and that width error lies
/// along the weakly damped sidebands at k0 where the Jacobian is of
/// order epsilon^2; too large a step in epsilon therefore lands outside
/// Newton's contraction basin. Stalled steps are bisected (corrector
/// restart from the midpoint profile) up to `MAX_BISECTIONS` deep, and
/// the midpoint solutions are dropped from the output.
pub fn continuation<T: Real + FftNum>(
    eps_list: &[T],
    crit: &CriticalData<T>,
    coeffs: &NormalFormCoeffs<T>,
    spec: &PotentialSpec<T>,
    config: &SolveConfig<T>,
) -> Result<Vec<ProfileSolution<T>>, BvpError> {
    assert!(spec.is_even(), "pulse continuation assumes an even potential");
    for pair in eps_list.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(BvpError::NotAscending {
                prev: pair[0].to_f64().unwrap_or(f64::NAN),
                next: pair[1].to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let mut out: Vec<ProfileSolution<T>> = Vec::with_capacity(eps_list.len());
    for (i, &eps) in eps_list.iter().enumerate() {
        let warm = i > 0 && out[i - 1].epsilon > T::zero();
        let step = if warm {
            advance(&out[i - 1], eps, crit, coeffs, spec, config, MAX_BISECTIONS)
        } else {
            solve(eps, crit, coeffs, spec, config)
        };
        match step {
            Ok(sol) => out.push(sol),
            Err(e) => {
                return Err(BvpError::AtEpsilon {
                    epsilon: eps.to_f64().unwrap_or(f64::NAN),
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(out)
}

/// One warm-started corrector step from `prev` to `eps`; on a Newton
/// stall the step is bisected, recursing at most `depth` levels.
fn advance<T: Real + FftNum>(
    prev: &ProfileSolution<T>,
    eps: T,
    crit: &CriticalData<T>,
    coeffs: &NormalFormCoeffs<T>,
    spec: &PotentialSpec<T>,
    config: &SolveConfig<T>,
    depth: usize,
) -> Result<ProfileSolution<T>, BvpError> {
    match seeded_step(prev, eps, crit, coeffs, spec, config) {
        Err(BvpError::NoConvergence { .. }) if depth > 0 => {
            let mid = (prev.epsilon + eps).half();
            let half = advance(prev, mid, crit, coeffs, spec, config, depth - 1)?;
            advance(&half, eps, crit, coeffs, spec, config, depth - 1)
        }
        other => other,
    }
}

fn seeded_step<T: Real + FftNum>(
    prev: &ProfileSolution<T>,
    eps: T,
    crit: &CriticalData<T>,
    coeffs: &NormalFormCoeffs<T>,
    spec: &PotentialSpec<T>,
    config: &SolveConfig<T>,
) -> Result<ProfileSolution<T>, BvpError> {
    if !coeffs.sign_condition_ok {
        return Err(BvpError::ExistenceConditionViolated);
    }
    let (ansatz, _, _) = WaveAnsatz::at_epsilon(eps, T::zero(), crit, coeffs)
        .map_err(|_| BvpError::ExistenceConditionViolated)?;
    let length = window_length(ansatz.width, eps * crit.s0_prime.sqrt(), config)?;
    check_grid(config.n_modes, length)?;
    let grid = SpectralGrid::symmetric(config.n_modes, length);

    let scale = eps / prev.epsilon;
    let mut seed: Vec<T> = if (length - prev.domain_length).abs()
        > T::of(1e-12) * (T::one() + length)
    {
        let prev_grid = SpectralGrid::symmetric(prev.n_modes, prev.domain_length);
        let vh = prev_grid.to_freq(&prev.v);
        prev_grid
            .eval_uniform(&vh, grid.origin(), grid.spacing(), grid.len(), T::zero())
            .into_iter()
            .map(|x| x * scale)
            .collect()
    } else {
        prev.v.iter().map(|&x| x * scale).collect()
    };
    let m = mean(&seed);
    for x in seed.iter_mut() {
        *x = *x - m;
    }
    let run = newton(&grid, seed, ansatz.c, spec, config)?;
    finalize(&grid, run.v, eps, ansatz.c, spec, run.iterations)
}

/// One step of the Jacobian-free fixed-point refinement: solve the linear
/// chain exactly against the frozen nonlinear force, L v_new = N(v), with
/// the mean gauged to zero. Contracts from smooth iterates; near the
/// bifurcation it amplifies error concentrated on the nearly-resonant
/// modes, so it cross-checks Newton rather than replacing it.
pub fn picard_refine<T: Real + FftNum>(
    v: &[T],
    c: T,
    length: T,
    spec: &PotentialSpec<T>,
) -> Result<Vec<T>, BvpError> {
    check_grid(v.len(), length)?;
    let grid = SpectralGrid::symmetric(v.len(), length);
    let linear = PotentialSpec::new(T::zero(), T::zero(), T::zero(), T::zero());
    let f = residual_on(&grid, v, c, spec);
    let lv = residual_on(&grid, v, c, &linear);
    let nonlin: Vec<T> = lv.iter().zip(&f).map(|(&l, &r)| l - r).collect();
    let mut nh = grid.to_freq(&nonlin);
    nh[0] = Complex::new(T::zero(), T::zero());
    for (j, z) in nh.iter_mut().enumerate().skip(1) {
        *z = z.scale(T::one() / dispersion::f_c(grid.wavenumber(j).abs(), c));
    }
    Ok(grid.to_phys(&nh))
}

/// Conserved line integral of the profile at the given points:
/// I(xi) = (c^2 v'(xi) - int_0^1 W1'(U(p) - U(p-1)) dp
///                     - int_0^2 W2'(U(p) - U(p-2)) dp) / (c^2 - 1),
/// with U(p) = v(xi + p) by trigonometric interpolation.
pub fn first_integral<T: Real + FftNum>(
    sol: &ProfileSolution<T>,
    spec: &PotentialSpec<T>,
    xi_samples: &[T],
) -> Result<Vec<T>, BvpError> {
    let grid = SpectralGrid::symmetric(sol.n_modes, sol.domain_length);
    let half = sol.domain_length.half();
    let limit = half * T::of(0.8) * (T::one() + T::of(1e-12));
    for &xi in xi_samples {
        assert!(
            xi.abs() <= limit,
            "first-integral samples must stay in the interior 80% of the window"
        );
    }
    let vh = grid.to_freq(&sol.v);
    let mut dh = vh.clone();
    for (j, z) in dh.iter_mut().enumerate() {
        let k = grid.wavenumber(j);
        if j == sol.n_modes / 2 {
            *z = Complex::new(T::zero(), T::zero());
        } else {
            *z = *z * Complex::new(T::zero(), k);
        }
    }
    let m = 64usize;
    let step = T::one() / T::of_usize(m);
    let mut out = Vec::with_capacity(xi_samples.len());
    for &xi in xi_samples {
        let z = grid.eval_at(&vh, xi);
        let y = grid.eval_at(&dh, xi);
        let u = grid.eval_uniform(&vh, xi - T::two(), step, 4 * m + 1, T::zero());
        out.push(dispersion::first_integral_state(z, y, &u, sol.c, spec)?);
    }
    Ok(out)
}

/// Tail diagnostics over the outermost tenth of the window.
#[derive(Debug, Clone, Copy)]
pub struct TailMetrics<T> {
    /// Mean of v over the outer tenth. The mean-zero gauge shifts a
    /// localized pulse by -mu/L, mu its line integral, so the tails sit
    /// on this constant rather than on zero; it shrinks like 1/L, not
    /// like the pulse width.
    pub offset: T,
    /// Sup of |v - offset| over the outer tenth: localization proper.
    pub defect: T,
}

pub fn tail_metrics<T: Real + FftNum>(sol: &ProfileSolution<T>) -> TailMetrics<T> {
    let grid = SpectralGrid::<T>::symmetric(sol.n_modes, sol.domain_length);
    let edge = T::of(0.45) * sol.domain_length;
    let outer: Vec<T> = grid
        .nodes()
        .iter()
        .zip(&sol.v)
        .filter(|(xi, _)| xi.abs() >= edge)
        .map(|(_, &vi)| vi)
        .collect();
    if outer.is_empty() {
        return TailMetrics { offset: T::zero(), defect: T::zero() };
    }
    let offset = pairwise_sum(&outer) / T::of_usize(outer.len());
    let defect =
        outer.iter().fold(T::zero(), |acc, &vi| acc.max((vi - offset).abs()));
    TailMetrics { offset, defect }
}

/// Relative reflection defect: min over centers sigma of
/// sup_j |v(xi_j) - v(2 sigma - xi_j)| / sup |v|.
pub fn symmetry_defect<T: Real + FftNum>(sol: &ProfileSolution<T>) -> T {
    let grid = SpectralGrid::symmetric(sol.n_modes, sol.domain_length);
    symmetry_defect_on(&grid, &sol.v)
}

fn symmetry_defect_on<T: Real + FftNum>(grid: &SpectralGrid<T>, v: &[T]) -> T {
    let n = v.len();
    let scale = sup_norm(v);
    if scale == T::zero() {
        return T::zero();
    }
    // integer and half-integer centers by index arithmetic: reflection
    // about node jc/2 maps i to (jc - i) mod n
    let mut best = T::infinity();
    let mut best_jc = 0usize;
    for jc in 0..2 * n {
        let mut worst = T::zero();
        for i in 0..n {
            let r = (jc + 2 * n - i) % n;
            let d = (v[i] - v[r]).abs();
            if d > worst {
                worst = d;
            }
            if worst >= best {
                break;
            }
        }
        if worst < best {
            best = worst;
            best_jc = jc;
        }
    }
    let vh = grid.to_freq(v);
    let h = grid.spacing();
    let center = grid.origin() + h.half() * T::of_usize(best_jc);
    let defect = |sigma: T| -> T {
        let mut w = vh.clone();
        for (j, z) in w.iter_mut().enumerate() {
            let k = grid.wavenumber(j);
            let phase = T::two() * k * (sigma - grid.origin());
            if j == n / 2 {
                *z = z.scale(phase.cos());
            } else {
                *z = z.conj() * Complex::from_polar(T::one(), -phase);
            }
        }
        let refl = grid.to_phys(&w);
        let mut worst = T::zero();
        for (a, b) in v.iter().zip(&refl) {
            worst = worst.max((*a - *b).abs());
        }
        worst
    };
    let (_, refined) = golden_min(center - h, center + h, h * T::of(1e-6), defect);
    refined.min(best) / scale
}

/// (chi0, chi1) of the solution's state (v(xi), v'(xi), p -> v(xi + p)) at
/// each requested point.
pub fn chi_diagnostics<T: Real + FftNum>(
    sol: &ProfileSolution<T>,
    xi_samples: &[T],
) -> Result<Vec<(T, T)>, BvpError> {
    let grid = SpectralGrid::symmetric(sol.n_modes, sol.domain_length);
    let vh = grid.to_freq(&sol.v);
    let mut dh = vh.clone();
    for (j, z) in dh.iter_mut().enumerate() {
        let k = grid.wavenumber(j);
        if j == sol.n_modes / 2 {
            *z = Complex::new(T::zero(), T::zero());
        } else {
            *z = *z * Complex::new(T::zero(), k);
        }
    }
    let m = 64usize;
    let step = T::one() / T::of_usize(m);
    let mut out = Vec::with_capacity(xi_samples.len());
    for &xi in xi_samples {
        let z = grid.eval_at(&vh, xi);
        let y = grid.eval_at(&dh, xi);
        let u = grid.eval_uniform(&vh, xi - T::two(), step, 4 * m + 1, T::zero());
        let c0 = dispersion::chi0(z, y, &u, sol.c)?;
        let c1 = dispersion::chi1(z, y, &u, sol.c)?;
        out.push((c0, c1));
    }
    Ok(out)
}

/// Trigonometric interpolant of a solution, usable as lattice seed data.
pub struct ProfileInterpolant<T: Real + FftNum> {
    grid: SpectralGrid<T>,
    vh: Vec<Complex<T>>,
    dh: Vec<Complex<T>>,
}

impl<T: Real + FftNum> ProfileSolution<T> {
    pub fn interpolant(&self) -> ProfileInterpolant<T> {
        let grid = SpectralGrid::symmetric(self.n_modes, self.domain_length);
        let vh = grid.to_freq(&self.v);
        let mut dh = vh.clone();
        for (j, z) in dh.iter_mut().enumerate() {
            let k = grid.wavenumber(j);
            if j == self.n_modes / 2 {
                *z = Complex::new(T::zero(), T::zero());
            } else {
                *z = *z * Complex::new(T::zero(), k);
            }
        }
        ProfileInterpolant { grid, vh, dh }
    }
}

impl<T: Real + FftNum> TravelingProfile<T> for ProfileInterpolant<T> {
    fn value(&self, xi: T) -> T {
        self.grid.eval_at(&self.vh, xi)
    }

    fn slope(&self, xi: T) -> T {
        self.grid.eval_at(&self.dh, xi)
    }

    fn domain(&self) -> Option<(T, T)> {
        Some((self.grid.origin(), self.grid.origin() + self.grid.length()))
    }

    fn values_uniform(&self, start: T, step: T, count: usize) -> Vec<T> {
        self.grid.eval_uniform(&self.vh, start, step, count, T::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::find_critical;
    use crate::normalform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (CriticalData<f64>, NormalFormCoeffs<f64>, PotentialSpec<f64>) {
        let crit = find_critical::<f64>().unwrap();
        let spec = PotentialSpec::cubic(1.0, 1.0);
        let coeffs = normalform::compute_all(&crit, &spec);
        (crit, coeffs, spec)
    }

    fn smooth_random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn residual_rejects_bad_grids() {
        let spec = PotentialSpec::cubic(1.0, 1.0);
        let v = vec![0.0f64; 100];
        assert!(matches!(
            residual(&v, 1.7, 64.0, &spec),
            Err(BvpError::NonPowerOfTwo { n: 100 })
        ));
        let v = vec![0.0f64; 64];
        assert!(matches!(
            residual(&v, 1.7, 8.0, &spec),
            Err(BvpError::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn zero_profile_has_zero_residual() {
        let spec = PotentialSpec::cubic(1.0, 1.0);
        let v = vec![0.0f64; 64];
        let r = residual(&v, 1.7, 64.0, &spec).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn plane_waves_on_the_linear_chain_are_solutions() {
        // with a = b = 0 the residual acts mode by mode as f_c(k), so a
        // resonant cosine at c^2 = omega^2(k)/k^2 must vanish
        let spec = PotentialSpec::new(0.0, 0.0, 0.0, 0.0);
        let n = 256;
        let length = 64.0;
        let grid = SpectralGrid::<f64>::symmetric(n, length);
        for &m0 in &[3usize, 10, 30] {
            let k = 2.0 * std::f64::consts::PI * m0 as f64 / length;
            let c = (crate::dispersion::omega_sq(k) / (k * k)).sqrt();
            let v: Vec<f64> = grid.nodes().iter().map(|&xi| 0.7 * (k * xi + 0.3).cos()).collect();
            let r = residual(&v, c, length, &spec).unwrap();
            assert!(sup_norm(&r) < 1e-10, "m0 = {m0}: {:e}", sup_norm(&r));
        }
    }

    #[test]
    fn spectral_shifts_match_index_rolls_on_a_commensurate_grid() {
        // h = 0.25, so the advance-delay stencil lands exactly on grid
        // nodes and the whole residual can be assembled with rolls
        let (_, _, spec) = setup();
        let n = 256usize;
        let length = 64.0;
        let grid = SpectralGrid::<f64>::symmetric(n, length);
        let v = smooth_random(n, 5);
        let c = 1.7;
        let r = residual(&v, c, length, &spec).unwrap();
        let vxx = grid.deriv(&v, 2);
        let roll = |j: usize, s: i64| -> f64 {
            let i = (j as i64 + s).rem_euclid(n as i64) as usize;
            v[i]
        };
        for j in 0..n {
            let force = spec.w1_prime(roll(j, 4) - v[j]) - spec.w1_prime(v[j] - roll(j, -4))
                + spec.w2_prime(roll(j, 8) - v[j])
                - spec.w2_prime(v[j] - roll(j, -8));
            let direct = c * c * vxx[j] - force;
            assert!((r[j] - direct).abs() < 1e-10, "node {j}");
        }
    }

    #[test]
    fn residual_is_gauge_invariant() {
        let (_, _, spec) = setup();
        let n = 128usize;
        let length = 32.0;
        let v = smooth_random(n, 11);
        let base = residual(&v, 1.8, length, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let shift = rng.random_range(-2.0..2.0);
            let w: Vec<f64> = v.iter().map(|&x| x + shift).collect();
            let r = residual(&w, 1.8, length, &spec).unwrap();
            let worst = r
                .iter()
                .zip(&base)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(worst < 1e-10, "shift {shift}: {worst:e}");
        }
    }

    #[test]
    fn pulse_certificates_hold_on_the_iterative_path() {
        // n chosen so the Nyquist wavenumber clears the fifth carrier
        // harmonic; coarser grids alias it into visible tail ripple
        let (crit, coeffs, spec) = setup();
        let config = SolveConfig { n_modes: 2048, ..Default::default() };
        let (sol, report) = solve_traced(0.08, &crit, &coeffs, &spec, &config).unwrap();
        assert!(sol.residual_norm < 1e-10);
        assert!(sol.newton_iterations <= 10);
        assert!(!report.used_least_squares);
        assert!(mean(&sol.v).abs() < 1e-12);

        let amp = sup_norm(&sol.v);
        let predicted = 2.0 * 0.08 * (2.0 * crit.s0_prime / coeffs.nu2).sqrt();
        assert!(
            (amp - predicted).abs() < 0.25 * predicted,
            "amp {amp} vs leading order {predicted}"
        );

        // tails: decay to a flat constant (the -mu/L gauge offset), and
        // that constant is itself far below the peak
        let tails = tail_metrics(&sol);
        assert!(tails.defect < 1e-8 * amp, "tail defect {:e} vs amp {amp:e}", tails.defect);
        assert!(tails.offset.abs() < 1e-7 * amp, "tail offset {:e}", tails.offset);

        assert!(sol.first_integral_drift < 1e-8, "{:e}", sol.first_integral_drift);
        assert!(sol.symmetry_defect < 1e-6, "{:e}", sol.symmetry_defect);
    }

    #[test]
    fn newton_converges_superquadratically() {
        let (crit, coeffs, spec) = setup();
        let config = SolveConfig { n_modes: 1024, ..Default::default() };
        let (_, report) = solve_traced(0.08, &crit, &coeffs, &spec, &config).unwrap();
        let rs: Vec<f64> = report
            .residual_history
            .iter()
            .copied()
            .filter(|&r| r > 1e-13)
            .collect();
        assert!(rs.len() >= 3, "history too short: {:?}", report.residual_history);
        let (r1, r2, r3) = (rs[rs.len() - 3], rs[rs.len() - 2], rs[rs.len() - 1]);
        let order = (r3 / r2).ln() / (r2 / r1).ln();
        assert!(
            (1.5..=4.5).contains(&order),
            "estimated order {order} from {r1:e} {r2:e} {r3:e}"
        );
    }

    #[test]
    fn dense_and_iterative_paths_agree() {
        let (crit, coeffs, spec) = setup();
        let dense_cfg = SolveConfig { n_modes: 512, ..Default::default() };
        let (dense_sol, dense_rep) = solve_traced(0.08, &crit, &coeffs, &spec, &dense_cfg).unwrap();
        assert!(dense_sol.residual_norm < 1e-10);
        assert!(!dense_rep.used_least_squares);
        assert_eq!(dense_rep.gmres_iterations, 0, "512 modes must take the dense path");

        let gmres_cfg = SolveConfig { n_modes: 512, dense_threshold: 0, ..Default::default() };
        let (gmres_sol, gmres_rep) = solve_traced(0.08, &crit, &coeffs, &spec, &gmres_cfg).unwrap();
        assert!(gmres_rep.gmres_iterations > 0);
        let diff = dense_sol
            .v
            .iter()
            .zip(&gmres_sol.v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-8, "paths differ by {diff:e}");
    }

    #[test]
    fn reference_window_converges_fast_at_full_resolution() {
        let (crit, coeffs, spec) = setup();
        let length = 40.0 / (0.05 * crit.s0_prime.sqrt());
        let config = SolveConfig {
            n_modes: 4096,
            domain_length: Some(length),
            ..Default::default()
        };
        let (sol, _) = solve_traced(0.05, &crit, &coeffs, &spec, &config).unwrap();
        assert!(sol.newton_iterations <= 10);
        assert!(sol.residual_norm < 1e-10);
        let amp = sup_norm(&sol.v);
        let predicted = 2.0 * 0.05 * (2.0 * crit.s0_prime / coeffs.nu2).sqrt();
        assert!((amp - predicted).abs() < 0.25 * predicted);
    }

    #[test]
    fn doubling_the_window_leaves_the_profile_unchanged() {
        let (crit, coeffs, spec) = setup();
        let base = SolveConfig { n_modes: 1024, ..Default::default() };
        let (coarse, _) = solve_traced(0.08, &crit, &coeffs, &spec, &base).unwrap();
        let fine_cfg = SolveConfig {
            n_modes: 2048,
            domain_length: Some(2.0 * coarse.domain_length),
            ..Default::default()
        };
        let (fine, _) = solve_traced(0.08, &crit, &coeffs, &spec, &fine_cfg).unwrap();
        // same spacing, so coarse node j sits at fine node j + n/2
        let mut worst = 0.0f64;
        for j in 0..coarse.n_modes {
            worst = worst.max((coarse.v[j] - fine.v[j + coarse.n_modes / 2]).abs());
        }
        assert!(worst < 1e-8, "window sensitivity {worst:e}");

        // the tail offsets recover the same line integral mu = -offset * L
        let (tc, tf) = (tail_metrics(&coarse), tail_metrics(&fine));
        let mu_c = tc.offset * coarse.domain_length;
        let mu_f = tf.offset * fine.domain_length;
        assert!(mu_c.abs() > 1e-7, "offset lost: {:e}", tc.offset);
        assert!((mu_c - mu_f).abs() < 0.02 * mu_c.abs(), "mu {mu_c:e} vs {mu_f:e}");
    }

    #[test]
    fn newton_step_beats_the_independent_picard_refinement() {
        // same window and grid as `reference_window_converges_fast_...`;
        // the fixed-point refinement must contract from the ansatz, and one
        // bordered Newton step must do strictly better from the same point
        let (crit, coeffs, spec) = setup();
        let eps = 0.05f64;
        let (ansatz, s0, p0) = WaveAnsatz::at_epsilon(eps, 0.0, &crit, &coeffs).unwrap();
        let n = 4096usize;
        let length = 40.0 / (eps * crit.s0_prime.sqrt());
        let grid = SpectralGrid::symmetric(n, length);
        let mut seed: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&xi| waves::leading_profile(xi, &ansatz, &coeffs, crit.k0, s0, p0))
            .collect();
        let mb = mean(&seed);
        for x in seed.iter_mut() {
            *x -= mb;
        }
        let r_seed = sup_norm(&residual_on(&grid, &seed, ansatz.c, &spec));

        let refined = picard_refine(&seed, ansatz.c, length, &spec).unwrap();
        let r_picard = sup_norm(&residual_on(&grid, &refined, ansatz.c, &spec));
        assert!(r_picard < r_seed, "Picard {r_picard:e} vs seed {r_seed:e}");

        // one bordered Newton step, replicated with the iterative solver
        let wref: Vec<f64> = {
            let d = grid.deriv(&seed, 1);
            let nn = dot(&d, &d).sqrt();
            d.iter().map(|&x| x / nn).collect()
        };
        let f = residual_on(&grid, &seed, ansatz.c, &spec);
        let weights = jac_weights(&grid, &seed, &spec);
        let mut rhs: Vec<f64> = f.iter().map(|&x| -x).collect();
        rhs.push(-pairwise_sum(&seed) / (n as f64).sqrt());
        rhs.push(0.0);
        let apply = |x: &[f64]| bordered_apply(&grid, &weights, ansatz.c, &wref, x);
        let precond = make_preconditioner(&grid, ansatz.c);
        let rhs_norm = dot(&rhs, &rhs).sqrt();
        let out =
            linalg::gmres(&apply, &precond, &rhs, &vec![0.0; n + 2], 140, 30, rhs_norm * 1e-10);
        let v1: Vec<f64> = seed.iter().zip(&out.x[..n]).map(|(a, b)| a + b).collect();
        let r_newton = sup_norm(&residual_on(&grid, &v1, ansatz.c, &spec));
        assert!(
            r_newton < r_picard,
            "Newton step {r_newton:e} vs Picard {r_picard:e}"
        );
    }

    #[test]
    fn continuation_amplitudes_grow_linearly() {
        let (crit, coeffs, spec) = setup();
        let config = SolveConfig { n_modes: 1024, ..Default::default() };
        let family = continuation(&[0.04, 0.06, 0.08], &crit, &coeffs, &spec, &config).unwrap();
        assert_eq!(family.len(), 3);
        let mut slopes = Vec::new();
        for sol in &family {
            assert!(sol.residual_norm < 1e-10);
            slopes.push(sup_norm(&sol.v) / sol.epsilon);
        }
        let hi = slopes.iter().cloned().fold(f64::MIN, f64::max);
        let lo = slopes.iter().cloned().fold(f64::MAX, f64::min);
        assert!(hi / lo < 1.1, "amplitude slopes {slopes:?}");

        assert!(matches!(
            continuation(&[0.08, 0.06], &crit, &coeffs, &spec, &config),
            Err(BvpError::NotAscending { .. })
        ));
    }

    // Doubling epsilon in one step rescales the seed amplitude but keeps
    // the previous envelope width, which parks Newton outside its basin;
    // the step must be bisected internally and still deliver only the
    // requested members.
    #[test]
    fn doubling_epsilon_step_is_bisected() {
        let (crit, coeffs, spec) = setup();
        let config = SolveConfig { n_modes: 2048, ..Default::default() };
        let family = continuation(&[0.02, 0.04], &crit, &coeffs, &spec, &config).unwrap();
        assert_eq!(family.len(), 2);
        assert!((family[1].epsilon - 0.04).abs() < 1e-15);
        for sol in &family {
            assert!(sol.residual_norm < 1e-10, "residual {:e}", sol.residual_norm);
        }
    }

    #[test]
    fn epsilon_zero_returns_the_rest_state() {
        let (crit, coeffs, spec) = setup();
        let config = SolveConfig { n_modes: 256, ..Default::default() };
        let (sol, _) = solve_traced(0.0, &crit, &coeffs, &spec, &config).unwrap();
        assert_eq!(sol.newton_iterations, 0);
        assert_eq!(sol.residual_norm, 0.0);
        assert!(sol.v.iter().all(|&x| x == 0.0));
        assert_eq!(sol.c, crit.c_star);
    }

    #[test]
    fn sign_violating_potential_is_rejected() {
        let (crit, _, _) = setup();
        let bad = PotentialSpec::cubic(-1.0, -1.0);
        let coeffs = normalform::compute_all(&crit, &bad);
        let config = SolveConfig { n_modes: 256, ..Default::default() };
        assert!(matches!(
            solve(0.05, &crit, &coeffs, &bad, &config),
            Err(BvpError::ExistenceConditionViolated)
        ));
    }

    #[test]
    fn short_explicit_window_errors_out() {
        let (crit, coeffs, spec) = setup();
        let config = SolveConfig {
            n_modes: 1024,
            domain_length: Some(100.0),
            ..Default::default()
        };
        assert!(matches!(
            solve(0.05, &crit, &coeffs, &spec, &config),
            Err(BvpError::TailNotResolved { .. })
        ));
    }

    #[test]
    fn first_integral_is_flat_and_zero_on_a_solved_pulse() {
        let (crit, coeffs, spec) = setup();
        let config = SolveConfig { n_modes: 1024, ..Default::default() };
        let sol = solve(0.08, &crit, &coeffs, &spec, &config).unwrap();
        let grid = SpectralGrid::<f64>::symmetric(sol.n_modes, sol.domain_length);
        let samples = interior_samples(&grid, 33);
        let values = first_integral(&sol, &spec, &samples).unwrap();
        let hi = values.iter().cloned().fold(f64::MIN, f64::max);
        let lo = values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(hi - lo < 1e-8, "drift {:e}", hi - lo);
        // zero level: the pulse carries no net flux
        let imax = values.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(imax < 1e-8, "level {imax:e}");
    }

    #[test]
    fn symmetry_defect_vanishes_for_even_profiles_and_ignores_translation() {
        let n = 256usize;
        let length = 64.0;
        let grid = SpectralGrid::<f64>::symmetric(n, length);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coefs: Vec<f64> = (1..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let even: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&xi| {
                coefs
                    .iter()
                    .enumerate()
                    .map(|(m, &a)| a * (2.0 * std::f64::consts::PI * (m + 1) as f64 * xi / length).cos())
                    .sum()
            })
            .collect();
        let make = |v: Vec<f64>| ProfileSolution {
            epsilon: 0.1,
            c: 1.7,
            domain_length: length,
            n_modes: n,
            v,
            residual_norm: 0.0,
            first_integral_drift: 0.0,
            symmetry_defect: 0.0,
            newton_iterations: 0,
        };
        let defect = symmetry_defect(&make(even.clone()));
        assert!(defect < 1e-12, "even profile defect {defect:e}");

        // translation by 37 grid slots must not change the defect
        let rolled: Vec<f64> = (0..n).map(|j| even[(j + 37) % n]).collect();
        let defect_rolled = symmetry_defect(&make(rolled));
        assert!((defect - defect_rolled).abs() < 1e-9, "{defect:e} vs {defect_rolled:e}");

        // an asymmetric profile must register
        let skew: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&xi| {
                let k = 2.0 * std::f64::consts::PI / length;
                (k * xi).cos() + 0.3 * (2.0 * k * xi).sin() * (k * xi).cos()
            })
            .collect();
        assert!(symmetry_defect(&make(skew)) > 1e-3);
    }

    #[test]
    fn chi1_diagnostic_scales_quadratically_in_epsilon() {
        let (crit, coeffs, spec) = setup();
        let mut maxima = Vec::new();
        for &eps in &[0.04f64, 0.08] {
            let config = SolveConfig { n_modes: 1024, ..Default::default() };
            let sol = solve(eps, &crit, &coeffs, &spec, &config).unwrap();
            let pts: Vec<f64> = (0..9).map(|i| -20.0 + 5.0 * i as f64).collect();
            let chis = chi_diagnostics(&sol, &pts).unwrap();
            let c1 = chis.iter().map(|c| c.1.abs()).fold(0.0f64, f64::max);
            assert!(c1 < eps * eps, "chi1 {c1:e} at eps {eps}");
            maxima.push(c1);
        }
        let ratio = maxima[1] / maxima[0];
        assert!((3.0..=5.5).contains(&ratio), "chi1 growth ratio {ratio}");
    }

    #[test]
    fn interpolant_reproduces_samples_and_seeds_a_lattice() {
        let (crit, coeffs, spec) = setup();
        let config = SolveConfig { n_modes: 512, ..Default::default() };
        let sol = solve(0.08, &crit, &coeffs, &spec, &config).unwrap();
        let interp = sol.interpolant();
        let grid = SpectralGrid::<f64>::symmetric(sol.n_modes, sol.domain_length);
        for j in (0..sol.n_modes).step_by(37) {
            assert!((interp.value(grid.node(j)) - sol.v[j]).abs() < 1e-11);
        }
        let (lo, hi) = interp.domain().unwrap();
        assert!(lo < -100.0 && hi > 100.0);

        let n_sites = 101usize;
        let x0 = 50.0;
        let (q, qdot) = waves::lattice_initial_data(&interp, sol.c, n_sites, x0).unwrap();
        assert_eq!(q.len(), n_sites);
        // the lattice rides the wave: qdot = -c v'
        let mid = 50usize;
        let fd = (interp.value(mid as f64 - x0 + 1e-6) - interp.value(mid as f64 - x0 - 1e-6)) / 2e-6;
        assert!((qdot[mid] + sol.c * fd).abs() < 1e-5);
    }

    #[test]
    fn profile_solution_serde_roundtrip() {
        let (crit, coeffs, spec) = setup();
        let config = SolveConfig { n_modes: 256, domain_length: Some(12.0), ..Default::default() };
        // too short a window for a pulse, but serde only needs a struct
        let sol = ProfileSolution {
            epsilon: 0.05,
            c: crit.c_star + 0.0025,
            domain_length: 12.0,
            n_modes: 256,
            v: vec![0.25; 256],
            residual_norm: 1e-11,
            first_integral_drift: 1e-9,
            symmetry_defect: 1e-7,
            newton_iterations: 4,
        };
        let _ = (&coeffs, &spec, &config);
        let text = serde_json::to_string(&sol).unwrap();
        let back: ProfileSolution<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back.n_modes, sol.n_modes);
        assert_eq!(back.v, sol.v);
        assert_eq!(back.newton_iterations, 4);
    }
}
