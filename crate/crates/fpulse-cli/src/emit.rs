//! Deterministic artifact emission. All floats are printed with
//! `{:.16e}` (17 significant digits), JSON fields keep declaration order,
//! and every file starts with or contains the config hash, so a re-run
//! with the same effective config is byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use fpulse_core::dispersion::EigenvalueSet;
use fpulse_core::lattice::{write_summary_csv, SummaryRecord};
use fpulse_core::spectral::SpectralGrid;

use crate::CliError;

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON serializer whose only deviation from the default is scientific
/// float notation at full precision.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        write!(writer, "{value:.8e}")
    }
}

pub fn to_json_vec<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value.serialize(&mut ser).expect("artifact types serialize infallibly");
    out.push(b'\n');
    out
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    String::from_utf8(to_json_vec(value)).expect("JSON output is UTF-8")
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Numerical(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    fs::write(&path, bytes)
        .map_err(|e| CliError::Numerical(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn spectrum_csv(hash: &str, set: &EigenvalueSet<f64>) -> String {
    let mut out = format!("# config {hash}\nre,im,residual\n");
    for r in &set.roots {
        out.push_str(&format!("{},{},{}\n", fmt(r.re), fmt(r.im), fmt(r.residual)));
    }
    out
}

pub fn profile_csv(hash: &str, n_modes: usize, length: f64, v: &[f64]) -> String {
    let grid = SpectralGrid::symmetric(n_modes, length);
    let mut out = format!("# config {hash}\nxi,v\n");
    for (j, &val) in v.iter().enumerate() {
        out.push_str(&format!("{},{}\n", fmt(grid.node(j)), fmt(val)));
    }
    out
}

pub fn trajectory_csv(hash: &str, records: &[SummaryRecord<f64>]) -> String {
    let mut bytes = format!("# config {hash}\n").into_bytes();
    write_summary_csv(records, &mut bytes).expect("writing to a Vec cannot fail");
    String::from_utf8(bytes).expect("summary CSV is UTF-8")
}

pub fn spectrum_gnuplot(hash: &str, csv: &str) -> String {
    format!(
        "# config {hash}\n\
         set datafile separator \",\"\n\
         set datafile commentschars \"#\"\n\
         set xlabel \"Re\"\n\
         set ylabel \"Im\"\n\
         set key off\n\
         plot \"{csv}\" skip 1 using 1:2 with points pt 7\n"
    )
}

pub fn profile_gnuplot(hash: &str, csv: &str) -> String {
    format!(
        "# config {hash}\n\
         set datafile separator \",\"\n\
         set datafile commentschars \"#\"\n\
         set xlabel \"xi\"\n\
         set ylabel \"v\"\n\
         set key off\n\
         plot \"{csv}\" skip 1 using 1:2 with lines\n"
    )
}

pub fn trajectory_gnuplot(hash: &str, csv: &str) -> String {
    format!(
        "# config {hash}\n\
         set datafile separator \",\"\n\
         set datafile commentschars \"#\"\n\
         set xlabel \"t\"\n\
         set key outside\n\
         plot \"{csv}\" skip 1 using 1:4 with lines title \"shape error\", \
         \"{csv}\" skip 1 using 1:5 with lines title \"shift\"\n"
    )
}
