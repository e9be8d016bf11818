//! Configuration, single runs, sweeps, comparisons and convergence studies,
//! with CSV and SVG output.

pub mod compare;
pub mod config;
pub mod convergence;
pub mod run;
pub mod sweep;
pub mod svg;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use compare::{compare_mu, CompareTable};
pub use config::{load_config, Amplitude, RunConfig};
pub use convergence::{convergence_study, ConvergenceTable};
pub use run::{run_single, BlowupReport, RunDiagnostics};
pub use sweep::{run_sweep, SweepResult};

/// 17 significant digits.
pub(crate) fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Empty field for a missing value.
pub(crate) fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

/// Write `name` under `dir` and record it in `manifest`.
pub(crate) fn write_file(dir: &Path, name: &str, contents: &str, manifest: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    manifest.push(PathBuf::from(name));
    Ok(())
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f(-2.5), "-2.5000000000000000e0");
        assert_eq!(fmt_opt(None), "");
        let x = 1.0 / 3.0;
        assert_eq!(fmt_f(x).parse::<f64>().unwrap(), x);
    }
}
