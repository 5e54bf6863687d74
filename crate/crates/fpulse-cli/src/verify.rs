//! Full verification pipeline: every promise the toolkit makes, evaluated
//! with tolerances pinned here and reported one line per criterion. Stage
//! errors fail their criterion and skip everything downstream, so the
//! first failure surfaces with its context intact.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use fpulse_core::bvp::{continuation, tail_metrics, ProfileSolution};
use fpulse_core::dispersion::{
    chi0, chi1, find_critical, neutral_eigenvalues, omega_sq, EigenvalueSet,
};
use fpulse_core::lattice::{
    fit_speed, run, step_verlet, LatticeState, RunOptions, ShapeTracker, ZeroTailExtension,
};
use fpulse_core::normalform::{compute_all, nls_params, sign_condition_sides};
use fpulse_core::potentials::PotentialSpec;
use fpulse_core::spectral::SpectralGrid;
use fpulse_core::util::sup_norm;
use fpulse_core::waves::{lattice_initial_data, nls_error_resampled, truncated_nf_residual, WaveAnsatz};

use crate::config::ExperimentConfig;
use crate::codes;

pub const CRITERIA: [(u32, &str); 10] = [
    (1, "critical point"),
    (2, "spectral panel counts"),
    (3, "unfolding sign facts"),
    (4, "projection duality"),
    (5, "normal-form identity suite"),
    (6, "pulse family certificates"),
    (7, "envelope error scaling"),
    (8, "permanence of form"),
    (9, "lattice dispersion"),
    (10, "negative control"),
];

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub skipped: bool,
    /// Wall-clock budget verdict where the criterion pins one; folded
    /// into `pass`. The measured seconds go to stderr only, keeping the
    /// report deterministic.
    pub runtime_ok: Option<bool>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub config_hash: String,
    pub all_pass: bool,
    pub first_failure: Option<String>,
    pub criteria: Vec<CriterionOutcome>,
}

pub fn criterion_line(c: &CriterionOutcome) -> String {
    let status = if c.pass {
        "pass"
    } else if c.skipped {
        "skip"
    } else {
        "FAIL"
    };
    format!("criterion {:02}  {:<28} {status}  {}", c.id, c.name, c.detail)
}

struct StageFailure {
    criterion: u32,
    message: String,
}

fn name_of(id: u32) -> &'static str {
    CRITERIA.iter().find(|(i, _)| *i == id).map(|(_, n)| *n).unwrap_or("criterion")
}

pub fn run_verify(cfg: &ExperimentConfig) -> VerifyReport {
    let mut results: Vec<CriterionOutcome> = Vec::new();
    let failure = pipeline(cfg, &mut results).err();
    if let Some(f) = &failure {
        results.push(CriterionOutcome {
            id: f.criterion,
            name: name_of(f.criterion),
            pass: false,
            skipped: false,
            runtime_ok: None,
            detail: f.message.clone(),
        });
    }
    for (id, name) in CRITERIA {
        if !results.iter().any(|c| c.id == id) {
            results.push(CriterionOutcome {
                id,
                name,
                pass: false,
                skipped: true,
                runtime_ok: None,
                detail: "skipped: an earlier stage failed".into(),
            });
        }
    }
    results.sort_by_key(|c| c.id);
    let all_pass = results.iter().all(|c| c.pass);
    VerifyReport {
        config_hash: cfg.hash(),
        all_pass,
        first_failure: failure
            .map(|f| format!("criterion {} ({}): {}", f.criterion, name_of(f.criterion), f.message)),
        criteria: results,
    }
}

fn push(
    out: &mut Vec<CriterionOutcome>,
    id: u32,
    pass: bool,
    runtime_ok: Option<bool>,
    detail: String,
) {
    let pass = pass && runtime_ok.unwrap_or(true);
    out.push(CriterionOutcome { id, name: name_of(id), pass, skipped: false, runtime_ok, detail });
}

fn pipeline(
    cfg: &ExperimentConfig,
    out: &mut Vec<CriterionOutcome>,
) -> Result<(), StageFailure> {
    let spec = cfg.potential.spec();
    let fail = |criterion: u32, message: String| StageFailure { criterion, message };

    // 1: the tangency exists where advertised
    let t = Instant::now();
    let crit = find_critical::<f64>().map_err(|e| fail(1, codes::dispersion(&e)))?;
    let rt = t.elapsed().as_secs_f64();
    eprintln!("verify: critical point in {rt:.3} s");
    let c2 = crit.c_star * crit.c_star;
    push(
        out,
        1,
        (c2 - 2.743).abs() <= 5e-3 && (crit.c_star - 1.656).abs() <= 1e-2,
        Some(rt < 1.0),
        format!(
            "c*^2 = {:.6} (2.743 within 5e-3), c* = {:.6} (1.656 within 1e-2)",
            c2, crit.c_star
        ),
    );

    // 3: strict signs with margin
    push(
        out,
        3,
        crit.d2_sigma > 1e-6 && crit.sigma_2ik0 < -1e-6 && crit.s0_prime > 1e-6,
        None,
        format!(
            "d2_sigma = {:.6e} > 0, sigma_2ik0 = {:.6e} < 0, s0_prime = {:.6e} > 0, margin 1e-6",
            crit.d2_sigma, crit.sigma_2ik0, crit.s0_prime
        ),
    );

    // 4: chi_i(V_j) = delta_ij on the zero modes V0 = (1, 0, 1),
    // V1 = (0, 1, p)
    {
        let c = crit.c_star;
        let m = 64usize;
        let u_const = vec![1.0; 4 * m + 1];
        let u_linear: Vec<f64> = (0..=4 * m).map(|j| -2.0 + j as f64 / m as f64).collect();
        let map = |r: Result<f64, _>| r.map_err(|e| fail(4, codes::dispersion(&e)));
        let worst = [
            (map(chi0(1.0, 0.0, &u_const, c))? - 1.0).abs(),
            map(chi1(1.0, 0.0, &u_const, c))?.abs(),
            map(chi0(0.0, 1.0, &u_linear, c))?.abs(),
            (map(chi1(0.0, 1.0, &u_linear, c))? - 1.0).abs(),
        ]
        .into_iter()
        .fold(0.0_f64, f64::max);
        push(out, 4, worst < 1e-10, None, format!("worst |chi_i(V_j) - delta_ij| = {worst:.3e}, tolerance 1e-10"));
    }

    // 5: family members solve the truncated reduced equation to rounding
    let coeffs = compute_all(&crit, &spec);
    if let Err(e) = nls_params(&crit, &spec) {
        return Err(fail(5, codes::normalform(&e)));
    }
    {
        let grid: Vec<f64> = (-300..=300).map(|i| i as f64 * 0.25).collect();
        let mut worst_rel = 0.0_f64;
        for i in 1..=8 {
            let eps = 0.01 * i as f64;
            for theta in [0.0, PI] {
                let (ansatz, s0, p0) = WaveAnsatz::at_epsilon(eps, theta, &crit, &coeffs)
                    .map_err(|e| fail(5, codes::wave(&e)))?;
                let r = truncated_nf_residual(&ansatz, &coeffs, crit.k0, s0, p0, &grid);
                worst_rel = worst_rel.max(r / ansatz.amplitude_scale);
            }
        }
        push(
            out,
            5,
            worst_rel < 1e-12,
            None,
            format!(
                "worst residual {worst_rel:.3e} of scale over eps in 0.01..0.08, theta in {{0, pi}}, tolerance 1e-12"
            ),
        );
    }

    // 10: flipping both cubic coefficients must be rejected
    {
        let flipped = PotentialSpec::cubic(-1.0, -1.0);
        let (lhs, rhs) = sign_condition_sides(&crit, &flipped);
        let rejected = nls_params(&crit, &flipped).is_err();
        push(
            out,
            10,
            rejected && lhs >= rhs,
            None,
            format!("b1 = b2 = -1 rejected: lhs {lhs:.4e} >= rhs {rhs:.4e}, family constructor errors"),
        );
    }

    // 2: the three spectral regimes with the winding cross-check
    {
        let search_box = (0.5, 3.0);
        let grid = 40usize;
        let panel = |c: f64| -> Result<(EigenvalueSet<f64>, f64), StageFailure> {
            let t = Instant::now();
            let set = neutral_eigenvalues(c, search_box, grid)
                .map_err(|e| fail(2, codes::dispersion(&e)))?;
            Ok((set, t.elapsed().as_secs_f64()))
        };
        let (super_, rt_a) = panel(2.9_f64.sqrt())?;
        let (critical, rt_b) = panel(crit.c_star)?;
        let (sub, rt_c) = panel(2.5_f64.sqrt())?;
        eprintln!("verify: spectral panels in {rt_a:.2} / {rt_b:.2} / {rt_c:.2} s");

        let winding_ok = [&super_, &critical, &sub]
            .iter()
            .all(|s| s.winding == s.count_with_multiplicity() as i64);
        // the +-i k0 clusters: multiplicity 2 per sign, members within 1e-3
        let cluster = |sign: f64| -> (usize, f64) {
            let members: Vec<_> = critical
                .roots
                .iter()
                .filter(|r| (r.im * sign) > 1.0 && (r.im.abs() - crit.k0).abs() < 1e-3)
                .collect();
            let mult = members.iter().map(|r| r.multiplicity).sum();
            let mut gap = 0.0_f64;
            for (i, a) in members.iter().enumerate() {
                for b in &members[i + 1..] {
                    gap = gap.max((a.lambda() - b.lambda()).norm());
                }
            }
            (mult, gap)
        };
        let (mult_up, gap_up) = cluster(1.0);
        let (mult_dn, gap_dn) = cluster(-1.0);
        let pass = super_.imaginary_nonzero().is_empty()
            && mult_up == 2
            && mult_dn == 2
            && gap_up < 1e-3
            && gap_dn < 1e-3
            && sub.imaginary_nonzero().len() == 4
            && winding_ok;
        push(
            out,
            2,
            pass,
            Some(rt_a < 10.0 && rt_b < 10.0 && rt_c < 10.0),
            format!(
                "c2=2.9: {} imaginary; c2=c*^2: double pairs at +-ik0 with gaps {:.1e}/{:.1e}; c2=2.5: {} imaginary; winding matches multiplicity: {}",
                super_.imaginary_nonzero().len(),
                gap_up,
                gap_dn,
                sub.imaginary_nonzero().len(),
                winding_ok
            ),
        );
    }

    // 6: the solved family carries its certificates
    if !spec.is_even() {
        return Err(fail(6, "AsymmetricPotential: pulse continuation requires an even potential (a1 = a2 = 0)".into()));
    }
    let t = Instant::now();
    let sols = continuation(&cfg.epsilon_list, &crit, &coeffs, &spec, &cfg.solver.solve_config())
        .map_err(|e| fail(6, codes::bvp(&e)))?;
    let rt6 = t.elapsed().as_secs_f64();
    eprintln!("verify: pulse family in {rt6:.2} s");
    {
        let mut worst_res = 0.0_f64;
        let mut worst_drift = 0.0_f64;
        let mut worst_sym = 0.0_f64;
        let mut worst_tail_defect = 0.0_f64;
        let mut worst_tail_offset = 0.0_f64;
        for sol in &sols {
            let peak = sup_norm(&sol.v);
            let tails = tail_metrics(sol);
            worst_res = worst_res.max(sol.residual_norm);
            worst_drift = worst_drift.max(sol.first_integral_drift);
            worst_sym = worst_sym.max(sol.symmetry_defect);
            worst_tail_defect = worst_tail_defect.max(tails.defect / peak);
            worst_tail_offset = worst_tail_offset.max(tails.offset.abs() / peak);
        }
        let pass = worst_res < 1e-10
            && worst_drift < 1e-8
            && worst_sym < 1e-6
            && worst_tail_defect < 1e-8
            && worst_tail_offset < 1e-7;
        push(
            out,
            6,
            pass,
            Some(rt6 < 120.0),
            format!(
                "{} profiles: worst residual {:.2e} (1e-10), drift {:.2e} (1e-8), symmetry {:.2e} (1e-6), tail decay {:.2e} (1e-8) and offset {:.2e} (1e-7) of peak",
                sols.len(), worst_res, worst_drift, worst_sym, worst_tail_defect, worst_tail_offset
            ),
        );
    }

    // 7: the distance to the leading-order family tracks eps^2 |log eps|
    {
        let mut ratios = Vec::with_capacity(sols.len());
        for sol in &sols {
            let grid = SpectralGrid::symmetric(sol.n_modes, sol.domain_length);
            let err = nls_error_resampled(&grid, &sol.v, sol.epsilon, &crit, &coeffs)
                .map_err(|e| fail(7, codes::wave(&e)))?;
            ratios.push(err / (sol.epsilon * sol.epsilon * sol.epsilon.ln().abs()));
        }
        let hi = ratios.iter().fold(0.0_f64, |m, &r| m.max(r));
        let lo = ratios.iter().fold(f64::INFINITY, |m, &r| m.min(r));
        let spread = hi / lo;
        let listed: Vec<String> = ratios.iter().map(|r| format!("{r:.4e}")).collect();
        push(
            out,
            7,
            spread < 3.0,
            None,
            format!("ratios err/(eps^2 |log eps|) = [{}], spread {:.2} (< 3)", listed.join(", "), spread),
        );
    }

    // 8: the chain keeps the solved shape at the solved speed
    permanence(cfg, &spec, &sols, out)?;

    // 9: small plane waves oscillate on the linear dispersion curve
    {
        let n = 64usize;
        let dt = 0.005_f64;
        let amp = 1e-6_f64;
        let modes = [3usize, 7, 11, 16, 23];
        let mut worst = 0.0_f64;
        for m in modes {
            let k = 2.0 * PI * m as f64 / n as f64;
            let w = omega_sq(k).sqrt();
            let q: Vec<f64> = (0..n).map(|j| amp * (k * j as f64).cos()).collect();
            let state = LatticeState::new(q, vec![0.0; n], 0.0)
                .map_err(|e| fail(9, codes::lattice(&e)))?;
            let steps = (6.0 * 2.0 * PI / w / dt).round() as usize;
            // site 0 carries amp * cos(w t); crossings are pi/w apart
            let mut s = state;
            let mut crossings: Vec<f64> = Vec::new();
            let mut prev = s.q[0];
            for i in 0..steps {
                s = step_verlet(&s, dt, &spec);
                let cur = s.q[0];
                if prev * cur < 0.0 {
                    crossings.push((i as f64 + prev / (prev - cur)) * dt);
                }
                prev = cur;
            }
            let est = if crossings.len() >= 2 {
                PI * (crossings.len() - 1) as f64
                    / (crossings.last().unwrap() - crossings.first().unwrap())
            } else {
                f64::NAN
            };
            worst = worst.max(((est - w) / w).abs());
        }
        push(
            out,
            9,
            worst < 0.01,
            None,
            format!("worst relative frequency error {worst:.2e} over 5 wavenumbers, tolerance 1e-2"),
        );
    }

    Ok(())
}

fn permanence(
    cfg: &ExperimentConfig,
    spec: &PotentialSpec<f64>,
    sols: &[ProfileSolution<f64>],
    out: &mut Vec<CriterionOutcome>,
) -> Result<(), StageFailure> {
    let fail = |message: String| StageFailure { criterion: 8, message };
    let Some(sol) = sols.iter().find(|s| (s.epsilon - 0.04).abs() < 1e-9) else {
        push(out, 8, false, None, "epsilon_list does not contain 0.04; no permanence run".into());
        return Ok(());
    };
    let n = cfg.lattice.n_sites;
    if (n as f64) < sol.domain_length + 8.0 {
        push(
            out,
            8,
            false,
            None,
            format!("lattice.n_sites {n} cannot hold the profile window of length {:.1}", sol.domain_length),
        );
        return Ok(());
    }

    let t = Instant::now();
    let interp = sol.interpolant();
    let ext = ZeroTailExtension(&interp);
    let x0 = (n / 2) as f64;
    let (q, p) = lattice_initial_data(&ext, sol.c, n, x0).map_err(|e| fail(codes::wave(&e)))?;
    let state0 =
        LatticeState::new(q.clone(), p.clone(), x0 / sol.c).map_err(|e| fail(codes::lattice(&e)))?;

    let mut tracker = ShapeTracker::new(&ext, sol.c, n);
    let opts = RunOptions { dt: 0.005, observe_stride: 1000, snapshot_stride: None };
    let main = run(&state0, 50.0, spec, &opts, Some(&mut tracker))
        .map_err(|e| fail(codes::lattice(&e)))?;

    // The traveling wave is a relative equilibrium: the dt^2 term of the
    // shadow energy is constant along its orbit, so the pristine run's
    // drift refines at dt^4 (measured ratio 16). The second-order
    // refinement law is measured off that degenerate orbit, on a seeded
    // 1%-of-peak perturbation of the same state.
    let peak = q.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let eta = 1e-2 * peak;
    let qp: Vec<f64> = q.iter().map(|&x| x + eta * rng.random_range(-1.0..1.0)).collect();
    let pp: Vec<f64> = p.iter().map(|&x| x + eta * rng.random_range(-1.0..1.0)).collect();
    let pert = LatticeState::new(qp, pp, x0 / sol.c).map_err(|e| fail(codes::lattice(&e)))?;
    let coarse_opts = RunOptions { dt: 0.005, observe_stride: 200, snapshot_stride: None };
    let fine_opts = RunOptions { dt: 0.0025, observe_stride: 400, snapshot_stride: None };
    let coarse = run(&pert, 50.0, spec, &coarse_opts, None).map_err(|e| fail(codes::lattice(&e)))?;
    let fine = run(&pert, 50.0, spec, &fine_opts, None).map_err(|e| fail(codes::lattice(&e)))?;
    let rt = t.elapsed().as_secs_f64();
    eprintln!("verify: permanence runs in {rt:.2} s");

    let drift_of = |records: &[fpulse_core::lattice::SummaryRecord<f64>]| -> f64 {
        let e0 = records[0].energy;
        records.iter().map(|r| (r.energy - e0).abs()).fold(0.0_f64, f64::max) / e0.abs()
    };
    let drift_main = drift_of(&main.records);
    let ratio = drift_of(&coarse.records) / drift_of(&fine.records);
    let shape = main.records.last().and_then(|r| r.shape_error).unwrap_or(f64::INFINITY);
    let speed = fit_speed(&main.records).unwrap_or(f64::NAN);
    let speed_rel = ((speed - sol.c) / sol.c).abs();

    let pass = n >= 2048
        && shape < 1e-3
        && speed_rel < 0.01
        && drift_main < 1e-6
        && (3.2..=4.8).contains(&ratio);
    push(
        out,
        8,
        pass,
        Some(rt < 60.0),
        format!(
            "n = {n}, T = 50: shape error {shape:.2e} (1e-3), speed error {speed_rel:.2e} rel (1e-2), energy drift {drift_main:.2e} rel (1e-6), halving ratio {ratio:.2} ([3.2, 4.8], perturbed orbit)"
        ),
    );
    Ok(())
}
