//! Library side of the `fpulse` command-line driver: experiment
//! configuration, output formatting, and the subcommand implementations.
//! The binary in `main.rs` is a thin argument-parsing shell over this.

use std::fmt;

pub mod commands;
pub mod config;
pub mod emit;
pub mod verify;

pub use config::ExperimentConfig;

/// Process outcome along the exit-code convention: 64 for bad invocations
/// and configs, 2 for numerical failures and lost outputs.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

/// Stable machine-greppable names prefixed onto the library error text, so
/// reports and stderr identify failures without parsing prose.
pub mod codes {
    use fpulse_core::bvp::BvpError;
    use fpulse_core::dispersion::DispersionError;
    use fpulse_core::lattice::LatticeError;
    use fpulse_core::normalform::NormalFormError;
    use fpulse_core::waves::WaveError;

    pub fn dispersion(e: &DispersionError) -> String {
        let code = match e {
            DispersionError::NoConvergence { .. } => "NoConvergence",
            DispersionError::BracketFailure => "NoConvergence",
            DispersionError::ContourThroughRoot { .. } => "ContourThroughRoot",
            DispersionError::RootCountMismatch { .. } => "RootCountMismatch",
            DispersionError::GridTooCoarse { .. } => "GridTooCoarse",
        };
        format!("{code}: {e}")
    }

    pub fn normalform(e: &NormalFormError) -> String {
        let NormalFormError::ExistenceConditionViolated { .. } = e;
        format!("ExistenceConditionViolated: {e}")
    }

    pub fn bvp(e: &BvpError) -> String {
        let code = match e {
            BvpError::NonPowerOfTwo { .. } => "NonPowerOfTwo",
            BvpError::WindowTooSmall { .. } => "WindowTooSmall",
            BvpError::TailNotResolved { .. } => "TailNotResolved",
            BvpError::ExistenceConditionViolated => "ExistenceConditionViolated",
            BvpError::NoConvergence { .. } => "NoConvergence",
            BvpError::NotAscending { .. } => "NotAscending",
            BvpError::AtEpsilon { source, .. } => {
                let inner = bvp(source);
                let code = inner.split(':').next().unwrap_or("NoConvergence");
                return format!("{code}: {e}");
            }
            BvpError::Dispersion(inner) => return dispersion(inner),
        };
        format!("{code}: {e}")
    }

    pub fn wave(e: &WaveError) -> String {
        let code = match e {
            WaveError::ParameterSignError { .. } => "ParameterSignError",
            WaveError::DomainTooSmall { .. } => "DomainTooSmall",
            WaveError::GridTooCoarse { .. } => "GridTooCoarse",
            WaveError::Dispersion(inner) => return dispersion(inner),
        };
        format!("{code}: {e}")
    }

    pub fn lattice(e: &LatticeError) -> String {
        let code = match e {
            LatticeError::TooShort { .. } => "TooShort",
            LatticeError::LengthMismatch { .. } => "LengthMismatch",
            LatticeError::NotFinite => "NotFinite",
            LatticeError::BadTimeStep { .. } => "BadTimeStep",
            LatticeError::BlowUp { .. } => "BlowUp",
        };
        format!("{code}: {e}")
    }
}
