//! Report emission. Everything a run produces funnels through here: JSON
//! goes through the library's fixed-precision renderer (12 significant
//! digits, stable field order), CSV through the library's two schemas
//! (experiment rows and the concentration grid). The same bytes go to
//! stdout or to a file, so redirecting output never changes it.

use std::io::Write;
use std::path::Path;

use myerson_lab::report::{concentration_csv, rows_to_csv, to_json, ExperimentRow};
use myerson_lab::verification::{
    ConcentrationReport, DiscretizationReport, MonotonicityReport, OracleReport, TailBoundReport,
};

use crate::config::FormatArg;
use crate::run::OptDominanceBundle;
use crate::{CliError, CliResult};

/// A finished run's result, one variant per report family.
pub enum Report<'a> {
    Monotonicity(&'a MonotonicityReport),
    OptDominance(&'a OptDominanceBundle),
    Concentration(&'a ConcentrationReport),
    Discretization(&'a DiscretizationReport),
    Tail(&'a TailBoundReport),
    Oracle(&'a OracleReport),
    Rows(&'a [ExperimentRow]),
}

impl Report<'_> {
    fn to_json(&self) -> CliResult<String> {
        let text = match self {
            Report::Monotonicity(r) => to_json(r),
            Report::OptDominance(r) => to_json(r),
            Report::Concentration(r) => to_json(r),
            Report::Discretization(r) => to_json(r),
            Report::Tail(r) => to_json(r),
            Report::Oracle(r) => to_json(r),
            Report::Rows(rows) => to_json(rows),
        }?;
        Ok(text)
    }

    /// CSV exists only for the tabular reports; asking for it elsewhere is
    /// a usage error rather than an invented schema.
    fn to_csv(&self) -> CliResult<String> {
        match self {
            Report::Concentration(r) => Ok(concentration_csv(r)),
            Report::Rows(rows) => Ok(rows_to_csv(rows)),
            _ => Err(CliError::usage(
                "this report has no CSV form; use --format json",
            )),
        }
    }
}

/// Renders `report` in `format` and writes it to `out`, or stdout when no
/// path is given. Output always ends in exactly one newline.
pub fn emit_report(report: &Report, format: FormatArg, out: Option<&Path>) -> CliResult<()> {
    let text = match format {
        FormatArg::Json => report.to_json()?,
        FormatArg::Csv => report.to_csv()?,
    };
    emit_text(&text, out)
}

/// Writes already-rendered text to a file or stdout with a trailing newline.
pub fn emit_text(text: &str, out: Option<&Path>) -> CliResult<()> {
    let body = if text.ends_with('\n') { text.to_string() } else { format!("{text}\n") };
    match out {
        Some(path) => std::fs::write(path, body).map_err(|e| {
            CliError::runtime(format!("cannot write {}: {e}", path.display()))
        }),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(body.as_bytes())
                .and_then(|()| lock.flush())
                .map_err(|e| CliError::runtime(format!("cannot write to stdout: {e}")))
        }
    }
}
