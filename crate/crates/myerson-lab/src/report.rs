//! Result rendering. Every float in every emitted report goes through one
//! formatter ([`float12`], scientific notation with 12 significant digits),
//! and rows are rendered in a fixed field order, so a rerun with the same
//! seed reproduces output files byte for byte.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::verification::ConcentrationReport;

/// Renders a float in scientific notation with 12 significant digits —
/// enough to distinguish any two doubles these experiments produce while
/// keeping columns a fixed width. Non-finite values render as Rust displays
/// them (`inf`, `NaN`).
pub fn float12(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        x.to_string()
    }
}

/// Header of the main experiment CSV every subcommand's trial rows share.
pub const EXPERIMENT_CSV_HEADER: &str = "experiment,m,trial,revenue,opt,ratio,stderr,seed";

/// One trial's result in the shared experiment schema. `experiment` is a
/// short comma-free tag (the subcommand name); `m` is the sample size the
/// trial ran at; `opt` and `ratio` are the benchmark and revenue/opt when
/// the pipeline knows them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub m: usize,
    pub trial: usize,
    pub revenue: f64,
    pub opt: f64,
    pub ratio: f64,
    pub stderr: f64,
    pub seed: u64,
}

impl ExperimentRow {
    pub fn to_csv(&self) -> String {
        debug_assert!(!self.experiment.contains(','), "experiment tags must be comma-free");
        format!(
            "{},{},{},{},{},{},{},{}",
            self.experiment,
            self.m,
            self.trial,
            float12(self.revenue),
            float12(self.opt),
            float12(self.ratio),
            float12(self.stderr),
            self.seed
        )
    }
}

/// Full experiment CSV: header plus one line per row, newline-terminated.
/// No rows gives a header-only file.
pub fn rows_to_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from(EXPERIMENT_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

/// Concentration results as a CSV grid, one line per (m, δ) cell.
pub fn concentration_csv(report: &ConcentrationReport) -> String {
    let mut out = String::from("m,delta,frequency,bound,stderr,ok\n");
    for cell in &report.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            cell.m,
            float12(cell.delta),
            float12(cell.frequency),
            float12(cell.bound),
            float12(cell.stderr),
            cell.ok
        ));
    }
    out
}

/// JSON with every float printed by [`float12`]; field order is declaration
/// order, so output is byte-stable.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, TwelveDigits);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::invalid(format!("report not JSON-encodable: {e}")))?;
    String::from_utf8(buf).map_err(|e| Error::invalid(format!("non-UTF-8 JSON output: {e}")))
}

/// Compact JSON formatter that routes every finite f64 through [`float12`]
/// (serde_json itself turns non-finite floats into null before the
/// formatter sees them).
struct TwelveDigits;

impl serde_json::ser::Formatter for TwelveDigits {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        writer.write_all(float12(value).as_bytes())
    }
}
