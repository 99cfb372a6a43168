//! `myerson-lab` — deterministic experiment runner over the auction
//! library. Five subcommands: `opt` (exact optimal auction for a spec),
//! `learn` (sample-based learners, CSV trials), `signals` (windowed
//! signal learners), `verify` (the theorem-backed suites), and
//! `lowerbound` (the hard signal-instance generator).
//!
//! Two invariants shape everything here. First, determinism: a config
//! names a master seed, every trial derives its own RNG stream from
//! (seed, tag, trial index), rows are aggregated in index order, and all
//! floats render at a fixed precision — so the same config produces the
//! same bytes, whatever `--jobs` says. Second, explicitness: every
//! experiment can be written down as a JSON file (`--config`) equivalent
//! to its flags, and malformed requests fail with the offending field
//! named rather than a default silently applied.
//!
//! Exit codes: 0 clean, 1 runtime failure or suite violations, 2 usage.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod emit;
mod run;

use config::{
    dist_from_file, load_config, model_from_arg, require, CommandKind, ExperimentConfig,
    FormatArg, RoundingArg, SignalsMode, SuiteKind, VariantArg,
};

/// Errors split by exit code: `Usage` is a malformed request (exit 2),
/// `Runtime` is a pipeline failing on legitimate input (exit 1).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    /// Library errors that arise while *reading a request* (schema and
    /// argument validation) are usage errors, not runtime ones.
    pub fn usage_from(e: myerson_lab::error::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<myerson_lab::error::Error> for CliError {
    fn from(e: myerson_lab::error::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "myerson-lab",
    version,
    about = "Exact optimal auctions, sample-based learning, and verification suites"
)]
struct Cli {
    /// Worker threads for trial-level parallelism (0 = all cores);
    /// the MYERSON_LAB_JOBS environment variable overrides this flag.
    /// Results never depend on the thread count.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the exact optimal auction for a distribution spec
    Opt(OptArgs),
    /// Learn mechanisms from samples and report per-trial revenue CSV
    Learn(LearnArgs),
    /// Run the windowed signal learners (posted price or auction)
    Signals(SignalsArgs),
    /// Run a verification suite; exits nonzero if violations are found
    Verify(VerifyArgs),
    /// Generate a hard signal instance and report its closed-form shape
    Lowerbound(LowerboundArgs),
}

/// Starts from `--config` (checking it names this subcommand) or from a
/// blank config with the mandatory seed.
fn base_config(
    config: &Option<PathBuf>,
    seed: Option<u64>,
    kind: CommandKind,
) -> CliResult<ExperimentConfig> {
    match config {
        Some(path) => {
            let cfg = load_config(path)?;
            if cfg.command != kind {
                return Err(CliError::usage(format!(
                    "config command \"{}\" does not match subcommand \"{}\"",
                    cfg.command.name(),
                    kind.name()
                )));
            }
            Ok(cfg)
        }
        None => {
            let seed = require(seed, "seed", "--seed")?;
            Ok(ExperimentConfig::blank(kind, seed))
        }
    }
}

#[derive(Args)]
struct OptArgs {
    /// Experiment config JSON (equivalent to spelling the flags out)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Distribution spec JSON file (single spec or {"buyers": [...]})
    #[arg(long, value_name = "FILE", conflicts_with = "config")]
    dist: Option<PathBuf>,
    /// Master seed (every experiment names one)
    #[arg(long, conflicts_with = "config")]
    seed: Option<u64>,
    /// Write the mechanism itself here (report always goes to stdout)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

impl OptArgs {
    fn into_config(self) -> CliResult<ExperimentConfig> {
        let mut cfg = base_config(&self.config, self.seed, CommandKind::Opt)?;
        if let Some(path) = &self.dist {
            cfg.dist = Some(dist_from_file(path)?);
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct LearnArgs {
    /// Experiment config JSON (equivalent to spelling the flags out)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Distribution spec JSON file
    #[arg(long, value_name = "FILE", conflicts_with = "config")]
    dist: Option<PathBuf>,
    /// Learning pipeline to run
    #[arg(long, value_enum, conflicts_with = "config")]
    variant: Option<VariantArg>,
    /// Accuracy target in (0,1)
    #[arg(long, conflicts_with = "config")]
    eps: Option<f64>,
    /// Sample sizes m to sweep, comma-separated, strictly increasing
    #[arg(long, value_delimiter = ',', value_name = "M,...", conflicts_with = "config")]
    samples: Option<Vec<usize>>,
    /// Trials per sample size (default 1)
    #[arg(long, conflicts_with = "config")]
    trials: Option<usize>,
    /// Scale on the Θ(·) sample-count formulas (default 1.0)
    #[arg(long = "cs", value_name = "C", conflicts_with = "config")]
    constant_scale: Option<f64>,
    /// Value bound for the bounded variants
    #[arg(long, conflicts_with = "config")]
    h: Option<f64>,
    /// Master seed
    #[arg(long, conflicts_with = "config")]
    seed: Option<u64>,
    /// Write the learned mechanism (first trial, largest m) here
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Write the trial CSV here instead of stdout
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

impl LearnArgs {
    fn into_config(self) -> CliResult<ExperimentConfig> {
        let mut cfg = base_config(&self.config, self.seed, CommandKind::Learn)?;
        if let Some(path) = &self.dist {
            cfg.dist = Some(dist_from_file(path)?);
        }
        if self.variant.is_some() {
            cfg.variant = self.variant;
        }
        if self.eps.is_some() {
            cfg.eps = self.eps;
        }
        if self.samples.is_some() {
            cfg.schedule = self.samples;
        }
        if self.trials.is_some() {
            cfg.trials = self.trials;
        }
        if self.constant_scale.is_some() {
            cfg.constant_scale = self.constant_scale;
        }
        if self.h.is_some() {
            cfg.h = self.h;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        if self.csv.is_some() {
            cfg.csv = self.csv;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SignalsArgs {
    /// Experiment config JSON (equivalent to spelling the flags out)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Signal model: a JSON file, or inline lb:eps,levels,bits
    #[arg(long, value_name = "FILE|lb:...", conflicts_with = "config")]
    model: Option<String>,
    /// single: posted price for one buyer; multi: auction over several
    #[arg(long, value_enum, conflicts_with = "config")]
    mode: Option<SignalsMode>,
    /// Accuracy target in (0,1)
    #[arg(long, conflicts_with = "config")]
    eps: Option<f64>,
    /// Sample pairs drawn per trial
    #[arg(long, conflicts_with = "config")]
    m: Option<usize>,
    /// Trials (default 20)
    #[arg(long, conflicts_with = "config")]
    trials: Option<usize>,
    /// Buyers in multi mode (default 2)
    #[arg(long, conflicts_with = "config")]
    buyers: Option<usize>,
    /// Scale on the window-size formulas (default 1.0)
    #[arg(long = "cs", value_name = "C", conflicts_with = "config")]
    constant_scale: Option<f64>,
    /// Atoms when a closed-form conditional needs a finite view (default 200)
    #[arg(long, conflicts_with = "config")]
    grid: Option<usize>,
    /// Master seed
    #[arg(long, conflicts_with = "config")]
    seed: Option<u64>,
    /// Write the trial CSV here instead of stdout
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

impl SignalsArgs {
    fn into_config(self) -> CliResult<ExperimentConfig> {
        let mut cfg = base_config(&self.config, self.seed, CommandKind::Signals)?;
        if let Some(arg) = &self.model {
            cfg.model = Some(model_from_arg(arg)?);
        }
        if self.mode.is_some() {
            cfg.mode = self.mode;
        }
        if self.eps.is_some() {
            cfg.eps = self.eps;
        }
        if self.m.is_some() {
            cfg.m = self.m;
        }
        if self.trials.is_some() {
            cfg.trials = self.trials;
        }
        if self.buyers.is_some() {
            cfg.buyers = self.buyers;
        }
        if self.constant_scale.is_some() {
            cfg.constant_scale = self.constant_scale;
        }
        if self.grid.is_some() {
            cfg.grid = self.grid;
        }
        if self.csv.is_some() {
            cfg.csv = self.csv;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// Experiment config JSON (equivalent to spelling the flags out)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Which suite to run
    #[arg(long, value_enum, conflicts_with = "config")]
    suite: Option<SuiteKind>,
    /// Trials (suite-specific defaults)
    #[arg(long, conflicts_with = "config")]
    trials: Option<usize>,
    /// Master seed
    #[arg(long, conflicts_with = "config")]
    seed: Option<u64>,
    /// Accuracy / step parameter where the suite takes one
    #[arg(long, conflicts_with = "config")]
    eps: Option<f64>,
    /// Rounding mode for the discretize suite (default additive)
    #[arg(long, value_enum, conflicts_with = "config")]
    rounding: Option<RoundingArg>,
    /// Buyers (monotonicity; default 3)
    #[arg(long, conflicts_with = "config")]
    buyers: Option<usize>,
    /// Per-buyer support size (monotonicity; default 4)
    #[arg(long, conflicts_with = "config")]
    support: Option<usize>,
    /// Distribution spec file (concentration/tail; built-in defaults)
    #[arg(long, value_name = "FILE", conflicts_with = "config")]
    dist: Option<PathBuf>,
    /// Observable threshold (concentration; default 1.0)
    #[arg(long, conflicts_with = "config")]
    threshold: Option<f64>,
    /// Sample sizes for the concentration grid (default 20,50,100)
    #[arg(long, value_delimiter = ',', value_name = "M,...", conflicts_with = "config")]
    samples: Option<Vec<usize>>,
    /// Deviation widths for the concentration grid (default 0.1,0.2,0.3)
    #[arg(long, value_delimiter = ',', value_name = "D,...", conflicts_with = "config")]
    deltas: Option<Vec<f64>>,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Report encoding (default json; csv for tabular reports)
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

impl VerifyArgs {
    fn into_config(self) -> CliResult<ExperimentConfig> {
        let mut cfg = base_config(&self.config, self.seed, CommandKind::Verify)?;
        if self.suite.is_some() {
            cfg.suite = self.suite;
        }
        if self.trials.is_some() {
            cfg.trials = self.trials;
        }
        if self.eps.is_some() {
            cfg.eps = self.eps;
        }
        if self.rounding.is_some() {
            cfg.rounding = self.rounding;
        }
        if self.buyers.is_some() {
            cfg.buyers = self.buyers;
        }
        if self.support.is_some() {
            cfg.support = self.support;
        }
        if let Some(path) = &self.dist {
            cfg.dist = Some(dist_from_file(path)?);
        }
        if self.threshold.is_some() {
            cfg.threshold = self.threshold;
        }
        if self.samples.is_some() {
            cfg.schedule = self.samples;
        }
        if self.deltas.is_some() {
            cfg.deltas = self.deltas;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        if self.format.is_some() {
            cfg.format = self.format;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct LowerboundArgs {
    /// Experiment config JSON (equivalent to spelling the flags out)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Construction parameter ε in (0, 1/18)
    #[arg(long, conflicts_with = "config")]
    eps: Option<f64>,
    /// Signal levels (the instance gets levels+1 signal atoms)
    #[arg(long, conflicts_with = "config")]
    levels: Option<usize>,
    /// Conditional type per signal, one 0/1 digit each (e.g. 0101)
    #[arg(long, conflicts_with = "config")]
    bits: Option<String>,
    /// Atoms used to report per-signal optima (default 2000)
    #[arg(long, conflicts_with = "config")]
    grid: Option<usize>,
    /// Master seed
    #[arg(long, conflicts_with = "config")]
    seed: Option<u64>,
    /// Write the generated model JSON here (usable as signals --model)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

impl LowerboundArgs {
    fn into_config(self) -> CliResult<ExperimentConfig> {
        let mut cfg = base_config(&self.config, self.seed, CommandKind::Lowerbound)?;
        if self.eps.is_some() {
            cfg.eps = self.eps;
        }
        if self.levels.is_some() {
            cfg.levels = self.levels;
        }
        if self.bits.is_some() {
            cfg.bits = self.bits;
        }
        if self.grid.is_some() {
            cfg.grid = self.grid;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        Ok(cfg)
    }
}

impl Command {
    fn into_config(self) -> CliResult<ExperimentConfig> {
        match self {
            Command::Opt(args) => args.into_config(),
            Command::Learn(args) => args.into_config(),
            Command::Signals(args) => args.into_config(),
            Command::Verify(args) => args.into_config(),
            Command::Lowerbound(args) => args.into_config(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli.jobs;
    match cli.command.into_config().and_then(|cfg| run::run_experiment(&cfg, jobs)) {
        Ok(code) => ExitCode::from(code as u8),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
