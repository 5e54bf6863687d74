use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use fpulse_cli::commands::{self, Emit};
use fpulse_cli::config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "fpulse",
    version,
    about = "Supersonic pulse toolkit for an FPU chain with attracting \
             nearest-neighbor and repelling next-to-nearest-neighbor springs",
    after_help = "Exit codes: 0 success, 2 numerical failure, 64 usage error.\n\
                  Env overrides: FPULSE_NEWTON_TOL, FPULSE_MAX_NEWTON."
)]
struct Cli {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's out_dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print the emitted JSON instead of a table.
    #[arg(long, global = true)]
    json: bool,
    /// Also write gnuplot scripts next to the CSV files.
    #[arg(long, global = true)]
    gnuplot: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Critical wavespeed, carrier wavenumber, and spectral constants.
    Critical,
    /// Roots of the dispersion function in a box, with the winding check.
    Spectrum {
        /// Squared wavespeed of the panel.
        #[arg(long)]
        c2: f64,
        /// Search box half-widths, RExIM (e.g. 0.5x3).
        #[arg(long = "box", value_name = "RExIM", value_parser = parse_box, default_value = "0.5x3")]
        search_box: (f64, f64),
        /// Seed points per axis for the root scan.
        #[arg(long, default_value_t = 40)]
        grid: usize,
    },
    /// Normal-form and envelope coefficients with the existence verdict.
    Coeffs,
    /// Pulse profiles over the configured epsilon list.
    Solve,
    /// Drive a chain seeded with a solved profile and track its shape.
    Simulate {
        /// Profile JSON produced by `solve`.
        #[arg(long, value_name = "PATH")]
        profile: PathBuf,
        /// Seeded uniform perturbation amplitude on the initial state.
        #[arg(long, default_value_t = 0.0)]
        perturb: f64,
    },
    /// Full pipeline; one pass/fail line per acceptance criterion.
    Verify,
}

fn parse_box(s: &str) -> Result<(f64, f64), String> {
    let (re, im) = s
        .split_once('x')
        .ok_or_else(|| format!("expected RExIM (e.g. 0.5x3), got {s:?}"))?;
    let re: f64 = re.trim().parse().map_err(|_| format!("bad Re half-width {re:?}"))?;
    let im: f64 = im.trim().parse().map_err(|_| format!("bad Im half-width {im:?}"))?;
    if !(re.is_finite() && re > 0.0 && im.is_finite() && im > 0.0) {
        return Err(format!("box half-widths must be positive, got {re}x{im}"));
    }
    Ok((re, im))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match ExperimentConfig::load(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("fpulse: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let em = Emit {
        out_dir: cli.out.unwrap_or_else(|| cfg.out_dir.clone()),
        json: cli.json,
        gnuplot: cli.gnuplot,
    };
    let result = match cli.command {
        Cmd::Critical => commands::cmd_critical(&cfg, &em),
        Cmd::Spectrum { c2, search_box, grid } => {
            commands::cmd_spectrum(&cfg, &em, c2, search_box, grid)
        }
        Cmd::Coeffs => commands::cmd_coeffs(&cfg, &em),
        Cmd::Solve => commands::cmd_solve(&cfg, &em),
        Cmd::Simulate { profile, perturb } => {
            commands::cmd_simulate(&cfg, &em, &profile, perturb)
        }
        Cmd::Verify => commands::cmd_verify(&cfg, &em),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fpulse: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
