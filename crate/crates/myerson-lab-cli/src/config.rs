//! Experiment configs. A run is described either by subcommand flags or by
//! a JSON file passed to `--config`; both spellings normalize into
//! [`ExperimentConfig`] and pass through the same validation, so a config
//! file is exactly a saved set of flags. The config is deliberately strict:
//! the seed is mandatory (an experiment without one is not reproducible),
//! sample schedules must be non-empty and strictly increasing (a disordered
//! schedule is almost always a typo'd plan), and unknown fields are
//! rejected rather than ignored.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use myerson_lab::learning::Variant;
use myerson_lab::spec_io::{self, InstanceSpec};
use myerson_lab::verification::RoundingMode;

use crate::{CliError, CliResult};

/// Which pipeline a config drives. Mirrors the subcommand names; a config
/// run under a different subcommand is rejected, so a saved file can't be
/// silently reinterpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Opt,
    Learn,
    Signals,
    Verify,
    Lowerbound,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Opt => "opt",
            CommandKind::Learn => "learn",
            CommandKind::Signals => "signals",
            CommandKind::Verify => "verify",
            CommandKind::Lowerbound => "lowerbound",
        }
    }
}

/// The verification suites `verify --suite` can dispatch to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SuiteKind {
    /// Fixed-mechanism revenue under upward mass shifts.
    Monotonicity,
    /// Optimal-revenue dominance pairs plus the two-step shift example.
    Optdom,
    /// Empirical product deviation frequencies against the stated bound.
    Concentration,
    /// Grid-rounding revenue loss in both rounding modes.
    Discretize,
    /// Tail truncation on heavy-tailed products.
    Tail,
    /// Engine vs. brute-force search, with a full incentive audit.
    Oracle,
}

/// Signals pipeline shape: one buyer with a posted price, or an auction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SignalsMode {
    Single,
    Multi,
}

/// CLI twin of the library's rounding modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RoundingArg {
    Additive,
    Multiplicative,
}

impl RoundingArg {
    pub fn to_lib(self) -> RoundingMode {
        match self {
            RoundingArg::Additive => RoundingMode::Additive,
            RoundingArg::Multiplicative => RoundingMode::Multiplicative,
        }
    }
}

/// CLI twin of the learning variants. Flags spell these kebab-case
/// (`bounded-additive`), configs snake_case (`"bounded_additive"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VariantArg {
    Finite,
    BoundedAdditive,
    BoundedMultiplicative,
    Regular,
    Mhr,
}

impl VariantArg {
    pub fn to_lib(self) -> Variant {
        match self {
            VariantArg::Finite => Variant::Finite,
            VariantArg::BoundedAdditive => Variant::BoundedAdditive,
            VariantArg::BoundedMultiplicative => Variant::BoundedMultiplicative,
            VariantArg::Regular => Variant::Regular,
            VariantArg::Mhr => Variant::Mhr,
        }
    }
}

/// Output encodings for `verify` reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FormatArg {
    Json,
    Csv,
}

/// One experiment, fully specified. Fields are optional wherever only some
/// commands need them; [`ExperimentConfig::validate`] enforces the shape
/// constraints that hold regardless of command, and each pipeline demands
/// its required fields with an error naming the field and its flag.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    /// Master seed. Every trial derives an independent stream from
    /// (seed, experiment tag, trial index), so reruns and thread counts
    /// cannot change what any trial sees.
    pub seed: u64,
    /// Distribution spec, inline. The `--dist` flag reads a file into here.
    #[serde(default)]
    pub dist: Option<InstanceSpec>,
    /// Signal model: an inline model object, or the `"lb:eps,levels,bits"`
    /// shorthand as a string.
    #[serde(default)]
    pub model: Option<serde_json::Value>,
    #[serde(default)]
    pub suite: Option<SuiteKind>,
    #[serde(default)]
    pub mode: Option<SignalsMode>,
    #[serde(default)]
    pub rounding: Option<RoundingArg>,
    #[serde(default)]
    pub variant: Option<VariantArg>,
    /// Accuracy target; every pipeline that takes one requires it in (0,1).
    #[serde(default)]
    pub eps: Option<f64>,
    /// Sample sizes m to sweep, strictly increasing.
    #[serde(default)]
    pub schedule: Option<Vec<usize>>,
    /// Deviation widths for the concentration suite, each in (0,1).
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    /// Sample count for pipelines that take a single m (signals).
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub trials: Option<usize>,
    /// Scale knob multiplying every Θ(·) sample-count formula.
    #[serde(default)]
    pub constant_scale: Option<f64>,
    /// Value bound for the bounded learning variants.
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub buyers: Option<usize>,
    /// Per-buyer support size for the monotonicity suite.
    #[serde(default)]
    pub support: Option<usize>,
    /// Signal levels of the generated lower-bound instance.
    #[serde(default)]
    pub levels: Option<usize>,
    /// Conditional type per level, as a 0/1 string (e.g. "0101").
    #[serde(default)]
    pub bits: Option<String>,
    /// Value threshold of the concentration observable.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Atom count when a closed-form conditional needs a finite view.
    #[serde(default)]
    pub grid: Option<usize>,
    /// Primary artifact path (mechanism, model, or report by command).
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// CSV destination; stdout when absent.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Report format for `verify`.
    #[serde(default)]
    pub format: Option<FormatArg>,
}

impl ExperimentConfig {
    /// A blank config for `command`; flag normalization fills it in.
    pub fn blank(command: CommandKind, seed: u64) -> Self {
        ExperimentConfig {
            command,
            seed,
            dist: None,
            model: None,
            suite: None,
            mode: None,
            rounding: None,
            variant: None,
            eps: None,
            schedule: None,
            deltas: None,
            m: None,
            trials: None,
            constant_scale: None,
            h: None,
            buyers: None,
            support: None,
            levels: None,
            bits: None,
            threshold: None,
            grid: None,
            out: None,
            csv: None,
            format: None,
        }
    }

    /// Shape constraints that hold for every command. Violations are usage
    /// errors naming the offending field.
    pub fn validate(&self) -> CliResult<()> {
        if let Some(eps) = self.eps {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(CliError::usage(format!("eps {eps} must lie in (0,1)")));
            }
        }
        if let Some(schedule) = &self.schedule {
            if schedule.is_empty() {
                return Err(CliError::usage("schedule must be non-empty"));
            }
            if schedule.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::usage(format!(
                    "schedule must be strictly increasing, got {schedule:?}"
                )));
            }
        }
        if let Some(deltas) = &self.deltas {
            if deltas.is_empty() {
                return Err(CliError::usage("deltas must be non-empty"));
            }
            if let Some(bad) = deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
                return Err(CliError::usage(format!("delta {bad} must lie in (0,1)")));
            }
        }
        if self.trials == Some(0) {
            return Err(CliError::usage("trials must be at least 1"));
        }
        if self.m == Some(0) {
            return Err(CliError::usage("m must be at least 1"));
        }
        if let Some(cs) = self.constant_scale {
            if !(cs > 0.0) {
                return Err(CliError::usage(format!(
                    "constant_scale {cs} must be positive"
                )));
            }
        }
        if let Some(h) = self.h {
            if !(h > 0.0) {
                return Err(CliError::usage(format!("h {h} must be positive")));
            }
        }
        if self.buyers == Some(0) {
            return Err(CliError::usage("buyers must be at least 1"));
        }
        if self.grid == Some(0) {
            return Err(CliError::usage("grid must be at least 1"));
        }
        Ok(())
    }
}

/// Reads and validates a config file. Schema violations come back as usage
/// errors carrying the JSON path of the offending field.
pub fn load_config(path: &std::path::Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = match spec_io::parse_json(&text, "experiment config") {
        Ok(cfg) => cfg,
        Err(e) => {
            // an instance spec is an untagged enum, so serde flattens any
            // error inside it to "did not match any variant ... (at dist)";
            // re-parse just that field to recover the deep path
            if let Some(msg) = deep_dist_error(&text) {
                return Err(CliError::usage(msg));
            }
            return Err(CliError::usage_from(e));
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// If the config's `dist` field is what failed, reports the error with its
/// full path (`dist.buyers[1].rate` rather than just `dist`).
fn deep_dist_error(text: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(text).ok()?;
    let dist = value.get("dist")?;
    let err = spec_io::parse_instance(&dist.to_string()).err()?;
    let msg = err.to_string().replace("invalid input: instance spec: ", "");
    Some(match msg.rfind("(at ") {
        Some(i) => {
            let (head, tail) = msg.split_at(i);
            let path = tail.trim_start_matches("(at ").trim_end_matches(')');
            if path == "." {
                format!("experiment config: {head}(at dist)")
            } else {
                format!("experiment config: {head}(at dist.{path})")
            }
        }
        None => format!("experiment config: {msg} (at dist)"),
    })
}

/// Pulls a required field out of a config, naming both the config field and
/// the flag that sets it when absent.
pub fn require<T>(value: Option<T>, field: &str, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| {
        CliError::usage(format!("{field} is required (flag {flag} or config field \"{field}\")"))
    })
}

/// Parses a `--dist` argument (a file path) into an inline instance spec.
pub fn dist_from_file(path: &std::path::Path) -> CliResult<InstanceSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    spec_io::parse_instance(&text).map_err(CliError::usage_from)
}

/// Parses a `--model` argument: the inline `lb:` shorthand stays a string;
/// anything else is a file whose JSON is stored inline.
pub fn model_from_arg(arg: &str) -> CliResult<serde_json::Value> {
    if arg.starts_with("lb:") {
        return Ok(serde_json::Value::String(arg.to_string()));
    }
    let text = std::fs::read_to_string(arg)
        .map_err(|e| CliError::usage(format!("cannot read model {arg}: {e}")))?;
    spec_io::parse_json(&text, "signal model").map_err(CliError::usage_from)
}

/// Resolves a config's model value into a validated signal model.
pub fn resolve_model(value: &serde_json::Value) -> CliResult<myerson_lab::signals::SignalModel> {
    match value {
        serde_json::Value::String(s) if s.starts_with("lb:") => {
            spec_io::parse_lb_arg(s).map_err(CliError::usage_from)
        }
        serde_json::Value::String(s) => Err(CliError::usage(format!(
            "model string must be an lb:eps,levels,bits shorthand, got {s:?}"
        ))),
        other => spec_io::parse_signal_model(&other.to_string()).map_err(CliError::usage_from),
    }
}
