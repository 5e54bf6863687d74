//! Experiment configuration: JSON file -> env overrides -> validation.
//! Every knob has a default, so a missing config file runs the standard
//! even-cubic experiment.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fpulse_core::bvp::SolveConfig;
use fpulse_core::lattice::RunOptions;
use fpulse_core::potentials::PotentialSpec;

use crate::{emit, CliError};

/// Tolerance overrides honored by every subcommand.
pub const ENV_NEWTON_TOL: &str = "FPULSE_NEWTON_TOL";
pub const ENV_MAX_NEWTON: &str = "FPULSE_MAX_NEWTON";

/// Spring coefficients W1'(r) = 5r + a1 r^2 + b1 r^3,
/// W2'(r) = -r + a2 r^2 + b2 r^3. The default is the even cubic chain the
/// pulse family needs; explicitly configured fields are taken literally.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialParams {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Default for PotentialParams {
    fn default() -> Self {
        PotentialParams { a1: 0.0, a2: 0.0, b1: 1.0, b2: 1.0 }
    }
}

impl PotentialParams {
    pub fn spec(&self) -> PotentialSpec<f64> {
        PotentialSpec::new(self.a1, self.a2, self.b1, self.b2)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    /// Collocation modes per window; a power of two.
    pub n_modes: usize,
    /// Window length; `null` picks max(48 / envelope width, 64).
    pub domain_length: Option<f64>,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams { n_modes: 4096, domain_length: None, newton_tol: 1e-10, max_newton: 25 }
    }
}

impl SolverParams {
    pub fn solve_config(&self) -> SolveConfig<f64> {
        SolveConfig {
            n_modes: self.n_modes,
            domain_length: self.domain_length,
            newton_tol: self.newton_tol,
            max_newton: self.max_newton,
            ..SolveConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeParams {
    pub n_sites: usize,
    pub dt: f64,
    /// Integration span of `simulate`, in chain time units.
    pub t_final: f64,
    /// Steps between summary records.
    pub observe_stride: usize,
    /// Steps between binary state dumps; `null` disables them.
    pub snapshot_stride: Option<usize>,
}

impl Default for LatticeParams {
    fn default() -> Self {
        LatticeParams {
            n_sites: 2048,
            dt: 0.005,
            t_final: 50.0,
            observe_stride: 1000,
            snapshot_stride: None,
        }
    }
}

impl LatticeParams {
    pub fn run_options(&self) -> RunOptions<f64> {
        RunOptions {
            dt: self.dt,
            observe_stride: self.observe_stride,
            snapshot_stride: self.snapshot_stride,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub potential: PotentialParams,
    /// Amplitude parameters for `solve`; strictly increasing.
    pub epsilon_list: Vec<f64>,
    pub solver: SolverParams,
    pub lattice: LatticeParams,
    pub out_dir: PathBuf,
    /// Seed for the optional perturbation applied by `simulate --perturb`.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            potential: PotentialParams::default(),
            epsilon_list: vec![0.02, 0.04, 0.06, 0.08],
            solver: SolverParams::default(),
            lattice: LatticeParams::default(),
            out_dir: PathBuf::from("out"),
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    /// File -> env overrides -> validation; any defect is a usage error
    /// before computation starts.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            None => ExperimentConfig::default(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::Usage(format!("invalid config {}: {e}", p.display()))
                })?
            }
        };
        cfg.apply_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_env(&mut self) -> Result<(), CliError> {
        if let Some(v) = env_parse::<f64>(ENV_NEWTON_TOL)? {
            self.solver.newton_tol = v;
        }
        if let Some(v) = env_parse::<usize>(ENV_MAX_NEWTON)? {
            self.solver.max_newton = v;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Usage(format!("invalid config: {msg}")));
        let p = &self.potential;
        if ![p.a1, p.a2, p.b1, p.b2].iter().all(|x| x.is_finite()) {
            return bad("potential coefficients must be finite".into());
        }
        if self.epsilon_list.is_empty() {
            return bad("epsilon_list must not be empty".into());
        }
        for &e in &self.epsilon_list {
            if !(e.is_finite() && e > 0.0 && e < 1.0) {
                return bad(format!("epsilon {e} outside (0, 1)"));
            }
        }
        for w in self.epsilon_list.windows(2) {
            if !(w[1] > w[0]) {
                return bad(format!("epsilon_list must be strictly increasing at {} -> {}", w[0], w[1]));
            }
        }
        let s = &self.solver;
        if !s.n_modes.is_power_of_two() || !(64..=1 << 20).contains(&s.n_modes) {
            return bad(format!("solver.n_modes {} must be a power of two in [64, 2^20]", s.n_modes));
        }
        if let Some(l) = s.domain_length {
            if !(l.is_finite() && l > 8.0) {
                return bad(format!("solver.domain_length {l} must exceed the stencil reach 8"));
            }
        }
        if !(s.newton_tol.is_finite() && s.newton_tol > 0.0) {
            return bad(format!("solver.newton_tol {} must be positive", s.newton_tol));
        }
        if s.max_newton == 0 {
            return bad("solver.max_newton must be at least 1".into());
        }
        let l = &self.lattice;
        if l.n_sites < 8 {
            return bad(format!("lattice.n_sites {} below the stencil minimum 8", l.n_sites));
        }
        if !(l.dt.is_finite() && l.dt > 0.0 && l.dt <= 0.05) {
            return bad(format!("lattice.dt {} outside (0, 0.05]", l.dt));
        }
        if !(l.t_final.is_finite() && l.t_final >= 0.0) {
            return bad(format!("lattice.t_final {} must be nonnegative", l.t_final));
        }
        if l.observe_stride == 0 {
            return bad("lattice.observe_stride must be at least 1".into());
        }
        if l.snapshot_stride == Some(0) {
            return bad("lattice.snapshot_stride must be at least 1".into());
        }
        if self.out_dir.as_os_str().is_empty() {
            return bad("out_dir must not be empty".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialized form (defaults and env overrides
    /// applied), so equal effective experiments share a hash regardless of
    /// config-file formatting.
    pub fn hash(&self) -> String {
        let bytes = emit::to_json_vec(self);
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }
}

fn env_parse<T: std::str::FromStr>(key: &str) -> Result<Option<T>, CliError> {
    match std::env::var(key) {
        Err(_) => Ok(None),
        Ok(raw) => raw.parse::<T>().map(Some).map_err(|_| {
            CliError::Usage(format!("cannot parse {key}={raw} as a {}", std::any::type_name::<T>()))
        }),
    }
}
