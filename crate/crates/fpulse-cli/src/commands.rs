//! Subcommand implementations. Each command computes, writes its
//! artifacts under the output directory, and prints either a table or the
//! same JSON the file received.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use fpulse_core::bvp::{continuation, tail_metrics, ProfileSolution};
use fpulse_core::dispersion::{find_critical, neutral_eigenvalues, CriticalData, EigenvalueSet};
use fpulse_core::lattice::{
    fit_speed, run, write_snapshot, LatticeState, ShapeTracker, ZeroTailExtension,
};
use fpulse_core::normalform::{compute_all, sign_condition_sides, NormalFormCoeffs};
use fpulse_core::waves::lattice_initial_data;

use crate::config::ExperimentConfig;
use crate::{codes, emit, verify, CliError};

/// Output routing shared by every command.
pub struct Emit {
    pub out_dir: PathBuf,
    pub json: bool,
    pub gnuplot: bool,
}

fn table(rows: &[(&str, String)]) {
    for (k, v) in rows {
        println!("{k:<22} {v}");
    }
}

#[derive(Debug, Serialize)]
pub struct CriticalArtifact {
    pub config_hash: String,
    pub c_star_sq: f64,
    pub critical: CriticalData<f64>,
}

pub fn critical_artifact(cfg: &ExperimentConfig) -> Result<CriticalArtifact, CliError> {
    let crit = find_critical::<f64>().map_err(|e| CliError::Numerical(codes::dispersion(&e)))?;
    Ok(CriticalArtifact {
        config_hash: cfg.hash(),
        c_star_sq: crit.c_star * crit.c_star,
        critical: crit,
    })
}

pub fn cmd_critical(cfg: &ExperimentConfig, em: &Emit) -> Result<(), CliError> {
    let art = critical_artifact(cfg)?;
    let bytes = emit::to_json_vec(&art);
    emit::write_file(&em.out_dir, "critical.json", &bytes)?;
    if em.json {
        print!("{}", String::from_utf8(bytes).expect("JSON is UTF-8"));
    } else {
        let c = &art.critical;
        table(&[
            ("config_hash", art.config_hash.clone()),
            ("c_star_sq", emit::fmt(art.c_star_sq)),
            ("c_star", emit::fmt(c.c_star)),
            ("k0", emit::fmt(c.k0)),
            ("d2_sigma", emit::fmt(c.d2_sigma)),
            ("sigma_2ik0", emit::fmt(c.sigma_2ik0)),
            ("s0_prime", emit::fmt(c.s0_prime)),
            ("p0_prime", emit::fmt(c.p0_prime)),
        ]);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SpectrumArtifact {
    pub config_hash: String,
    pub c2: f64,
    pub re_max: f64,
    pub im_max: f64,
    pub grid: usize,
    pub roots_found: usize,
    pub count_with_multiplicity: usize,
    pub winding: i64,
    pub imaginary_nonzero: usize,
    pub csv: String,
    pub set: EigenvalueSet<f64>,
}

pub fn cmd_spectrum(
    cfg: &ExperimentConfig,
    em: &Emit,
    c2: f64,
    search_box: (f64, f64),
    grid: usize,
) -> Result<(), CliError> {
    if !(c2.is_finite() && c2 > 0.0) {
        return Err(CliError::Usage(format!("--c2 must be positive and finite, got {c2}")));
    }
    let hash = cfg.hash();
    let set = neutral_eigenvalues(c2.sqrt(), search_box, grid)
        .map_err(|e| CliError::Numerical(codes::dispersion(&e)))?;
    let csv_name = format!("spectrum_c2_{c2:.4}.csv");
    emit::write_file(&em.out_dir, &csv_name, emit::spectrum_csv(&hash, &set).as_bytes())?;
    if em.gnuplot {
        let gp = emit::spectrum_gnuplot(&hash, &csv_name);
        emit::write_file(&em.out_dir, &format!("spectrum_c2_{c2:.4}.gp"), gp.as_bytes())?;
    }
    let art = SpectrumArtifact {
        config_hash: hash,
        c2,
        re_max: search_box.0,
        im_max: search_box.1,
        grid,
        roots_found: set.roots.len(),
        count_with_multiplicity: set.count_with_multiplicity(),
        winding: set.winding,
        imaginary_nonzero: set.imaginary_nonzero().len(),
        csv: csv_name,
        set,
    };
    if em.json {
        print!("{}", emit::to_json_string(&art));
    } else {
        table(&[
            ("config_hash", art.config_hash.clone()),
            ("c2", emit::fmt(art.c2)),
            ("re_max", emit::fmt(art.re_max)),
            ("im_max", emit::fmt(art.im_max)),
            ("grid", art.grid.to_string()),
            ("roots_found", art.roots_found.to_string()),
            ("count_with_multiplicity", art.count_with_multiplicity.to_string()),
            ("winding", art.winding.to_string()),
            ("imaginary_nonzero", art.imaginary_nonzero.to_string()),
            ("csv", art.csv.clone()),
        ]);
        for r in &art.set.roots {
            println!(
                "root {} {} residual {} multiplicity {}",
                emit::fmt(r.re),
                emit::fmt(r.im),
                emit::fmt(r.residual),
                r.multiplicity
            );
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct CoeffsArtifact {
    pub config_hash: String,
    pub coeffs: NormalFormCoeffs<f64>,
    pub condition_lhs: f64,
    pub condition_rhs: f64,
    pub verdict: String,
}

pub fn cmd_coeffs(cfg: &ExperimentConfig, em: &Emit) -> Result<(), CliError> {
    let crit = find_critical::<f64>().map_err(|e| CliError::Numerical(codes::dispersion(&e)))?;
    let spec = cfg.potential.spec();
    let coeffs = compute_all(&crit, &spec);
    let (lhs, rhs) = sign_condition_sides(&crit, &spec);
    let art = CoeffsArtifact {
        config_hash: cfg.hash(),
        coeffs,
        condition_lhs: lhs,
        condition_rhs: rhs,
        verdict: if coeffs.sign_condition_ok { "satisfied".into() } else { "violated".into() },
    };
    let bytes = emit::to_json_vec(&art);
    emit::write_file(&em.out_dir, "coeffs.json", &bytes)?;
    if em.json {
        print!("{}", String::from_utf8(bytes).expect("JSON is UTF-8"));
    } else {
        let c = &art.coeffs;
        table(&[
            ("config_hash", art.config_hash.clone()),
            ("m2_v1v2", emit::fmt(c.m2_v1v2)),
            ("m2_v2v2_im", emit::fmt(c.m2_v2v2_im)),
            ("m3", emit::fmt(c.m3)),
            ("s_printed", emit::fmt(c.s_printed)),
            ("s_effective", emit::fmt(c.s_effective)),
            ("sign_condition_ok", c.sign_condition_ok.to_string()),
            ("nu1", emit::fmt(c.nu1)),
            ("nu2", emit::fmt(c.nu2)),
            ("gamma", emit::fmt(c.gamma)),
            ("condition_lhs", emit::fmt(art.condition_lhs)),
            ("condition_rhs", emit::fmt(art.condition_rhs)),
            ("verdict", art.verdict.clone()),
        ]);
    }
    Ok(())
}

/// On-disk form of one solved profile; `simulate` reads this back.
#[derive(Debug, Serialize, Deserialize)]
pub struct SolutionFile {
    pub config_hash: String,
    pub solution: ProfileSolution<f64>,
}

#[derive(Debug, Serialize)]
struct SolveRow {
    epsilon: f64,
    c: f64,
    domain_length: f64,
    n_modes: usize,
    newton_iterations: usize,
    residual_norm: f64,
    first_integral_drift: f64,
    symmetry_defect: f64,
    tail_offset: f64,
    tail_defect: f64,
    json: String,
    csv: String,
}

fn existence_guard(
    crit: &CriticalData<f64>,
    spec: &fpulse_core::potentials::PotentialSpec<f64>,
) -> Result<NormalFormCoeffs<f64>, CliError> {
    if !spec.is_even() {
        return Err(CliError::Numerical(
            "AsymmetricPotential: pulse continuation requires an even potential (a1 = a2 = 0)"
                .into(),
        ));
    }
    let coeffs = compute_all(crit, spec);
    if let Err(e) = fpulse_core::normalform::nls_params(crit, spec) {
        return Err(CliError::Numerical(codes::normalform(&e)));
    }
    Ok(coeffs)
}

pub fn cmd_solve(cfg: &ExperimentConfig, em: &Emit) -> Result<(), CliError> {
    let hash = cfg.hash();
    let crit = find_critical::<f64>().map_err(|e| CliError::Numerical(codes::dispersion(&e)))?;
    let spec = cfg.potential.spec();
    let coeffs = existence_guard(&crit, &spec)?;
    let sols = continuation(&cfg.epsilon_list, &crit, &coeffs, &spec, &cfg.solver.solve_config())
        .map_err(|e| CliError::Numerical(codes::bvp(&e)))?;

    let mut rows = Vec::with_capacity(sols.len());
    for sol in &sols {
        let json_name = format!("profile_eps{:.4}.json", sol.epsilon);
        let csv_name = format!("profile_eps{:.4}.csv", sol.epsilon);
        let file = SolutionFile { config_hash: hash.clone(), solution: sol.clone() };
        emit::write_file(&em.out_dir, &json_name, &emit::to_json_vec(&file))?;
        let csv = emit::profile_csv(&hash, sol.n_modes, sol.domain_length, &sol.v);
        emit::write_file(&em.out_dir, &csv_name, csv.as_bytes())?;
        if em.gnuplot {
            let gp = emit::profile_gnuplot(&hash, &csv_name);
            emit::write_file(&em.out_dir, &format!("profile_eps{:.4}.gp", sol.epsilon), gp.as_bytes())?;
        }
        let tails = tail_metrics(sol);
        rows.push(SolveRow {
            epsilon: sol.epsilon,
            c: sol.c,
            domain_length: sol.domain_length,
            n_modes: sol.n_modes,
            newton_iterations: sol.newton_iterations,
            residual_norm: sol.residual_norm,
            first_integral_drift: sol.first_integral_drift,
            symmetry_defect: sol.symmetry_defect,
            tail_offset: tails.offset,
            tail_defect: tails.defect,
            json: json_name,
            csv: csv_name,
        });
    }
    if em.json {
        print!("{}", emit::to_json_string(&rows));
    } else {
        println!("config_hash            {hash}");
        println!(
            "{:<8} {:<20} {:>6} {:>5} {:>12} {:>12} {:>12} {:>12}",
            "epsilon", "c", "L", "iters", "residual", "drift", "symmetry", "tail"
        );
        for r in &rows {
            println!(
                "{:<8.4} {:<20.16} {:>6.1} {:>5} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e}",
                r.epsilon,
                r.c,
                r.domain_length,
                r.newton_iterations,
                r.residual_norm,
                r.first_integral_drift,
                r.symmetry_defect,
                r.tail_defect,
            );
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SimulateArtifact {
    pub config_hash: String,
    pub profile: String,
    pub epsilon: f64,
    pub c: f64,
    pub n_sites: usize,
    pub dt: f64,
    pub t_final: f64,
    pub perturb: f64,
    pub records: usize,
    pub energy_drift_rel: f64,
    pub shape_error_final: Option<f64>,
    pub fit_speed: Option<f64>,
    pub trajectory_csv: String,
}

pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    em: &Emit,
    profile_path: &Path,
    perturb: f64,
) -> Result<(), CliError> {
    if !(perturb.is_finite() && perturb >= 0.0) {
        return Err(CliError::Usage(format!("--perturb must be nonnegative, got {perturb}")));
    }
    let text = fs::read_to_string(profile_path).map_err(|e| {
        CliError::Usage(format!("cannot read profile {}: {e}", profile_path.display()))
    })?;
    let file: SolutionFile = serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!("{} is not a profile file: {e}", profile_path.display()))
    })?;
    let hash = cfg.hash();
    if file.config_hash != hash {
        eprintln!(
            "fpulse: profile {} was produced under config {}, current is {}",
            profile_path.display(),
            &file.config_hash[..12.min(file.config_hash.len())],
            &hash[..12]
        );
    }
    let sol = file.solution;
    let n = cfg.lattice.n_sites;
    if (n as f64) < sol.domain_length + 8.0 {
        return Err(CliError::Usage(format!(
            "lattice.n_sites {n} cannot hold the profile window of length {:.1}",
            sol.domain_length
        )));
    }

    let spec = cfg.potential.spec();
    let interp = sol.interpolant();
    let ext = ZeroTailExtension(&interp);
    let x0 = (n / 2) as f64;
    let (mut q, mut p) = lattice_initial_data(&ext, sol.c, n, x0)
        .map_err(|e| CliError::Numerical(codes::wave(&e)))?;
    if perturb > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for x in q.iter_mut().chain(p.iter_mut()) {
            *x += perturb * rng.random_range(-1.0..1.0);
        }
    }
    let state0 = LatticeState::new(q, p, x0 / sol.c)
        .map_err(|e| CliError::Numerical(codes::lattice(&e)))?;
    let mut tracker = ShapeTracker::new(&ext, sol.c, n);
    let summary = run(&state0, cfg.lattice.t_final, &spec, &cfg.lattice.run_options(), Some(&mut tracker))
        .map_err(|e| CliError::Numerical(codes::lattice(&e)))?;

    let csv_name = "trajectory.csv".to_string();
    emit::write_file(
        &em.out_dir,
        &csv_name,
        emit::trajectory_csv(&hash, &summary.records).as_bytes(),
    )?;
    if em.gnuplot {
        let gp = emit::trajectory_gnuplot(&hash, &csv_name);
        emit::write_file(&em.out_dir, "trajectory.gp", gp.as_bytes())?;
    }
    if cfg.lattice.snapshot_stride.is_some() {
        #[derive(Serialize)]
        struct SnapshotEntry {
            file: String,
            t: f64,
        }
        #[derive(Serialize)]
        struct SnapshotManifest {
            config_hash: String,
            n_sites: usize,
            files: Vec<SnapshotEntry>,
        }
        let mut files = Vec::with_capacity(summary.snapshots.len());
        for (i, snap) in summary.snapshots.iter().enumerate() {
            let name = format!("snapshot_{i:04}.bin");
            let mut bytes = Vec::new();
            write_snapshot(snap, &mut bytes)
                .map_err(|e| CliError::Numerical(format!("cannot encode snapshot: {e}")))?;
            emit::write_file(&em.out_dir, &name, &bytes)?;
            files.push(SnapshotEntry { file: name, t: snap.t });
        }
        let manifest = SnapshotManifest { config_hash: hash.clone(), n_sites: n, files };
        emit::write_file(&em.out_dir, "snapshots.json", &emit::to_json_vec(&manifest))?;
    }

    let e0 = summary.records[0].energy;
    let drift = summary
        .records
        .iter()
        .map(|r| (r.energy - e0).abs())
        .fold(0.0_f64, f64::max);
    let energy_drift_rel = if e0 != 0.0 { drift / e0.abs() } else { drift };
    let art = SimulateArtifact {
        config_hash: hash,
        profile: profile_path.display().to_string(),
        epsilon: sol.epsilon,
        c: sol.c,
        n_sites: n,
        dt: cfg.lattice.dt,
        t_final: cfg.lattice.t_final,
        perturb,
        records: summary.records.len(),
        energy_drift_rel,
        shape_error_final: summary.records.last().and_then(|r| r.shape_error),
        fit_speed: fit_speed(&summary.records),
        trajectory_csv: csv_name,
    };
    let bytes = emit::to_json_vec(&art);
    emit::write_file(&em.out_dir, "simulate.json", &bytes)?;
    if em.json {
        print!("{}", String::from_utf8(bytes).expect("JSON is UTF-8"));
    } else {
        table(&[
            ("config_hash", art.config_hash.clone()),
            ("profile", art.profile.clone()),
            ("epsilon", emit::fmt(art.epsilon)),
            ("c", emit::fmt(art.c)),
            ("n_sites", art.n_sites.to_string()),
            ("dt", emit::fmt(art.dt)),
            ("t_final", emit::fmt(art.t_final)),
            ("perturb", emit::fmt(art.perturb)),
            ("records", art.records.to_string()),
            ("energy_drift_rel", emit::fmt(art.energy_drift_rel)),
            (
                "shape_error_final",
                art.shape_error_final.map_or("none".into(), emit::fmt),
            ),
            ("fit_speed", art.fit_speed.map_or("none".into(), emit::fmt)),
            ("trajectory_csv", art.trajectory_csv.clone()),
        ]);
    }
    Ok(())
}

pub fn cmd_verify(cfg: &ExperimentConfig, em: &Emit) -> Result<(), CliError> {
    let report = verify::run_verify(cfg);
    let bytes = emit::to_json_vec(&report);
    emit::write_file(&em.out_dir, "verify_report.json", &bytes)?;
    if em.json {
        print!("{}", String::from_utf8(bytes).expect("JSON is UTF-8"));
    } else {
        for c in &report.criteria {
            println!("{}", verify::criterion_line(c));
        }
    }
    if report.all_pass {
        Ok(())
    } else {
        let msg = report
            .first_failure
            .clone()
            .unwrap_or_else(|| {
                let failed: Vec<String> = report
                    .criteria
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.id.to_string())
                    .collect();
                format!("criteria failed: {}", failed.join(", "))
            });
        Err(CliError::Numerical(msg))
    }
}
