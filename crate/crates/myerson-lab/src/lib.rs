//! Optimal single-item auctions over finite value distributions, the
//! sample-based learning pipelines built on top of them, and executable
//! verification suites for the structural facts the pipelines rely on
//! (revenue monotonicity, concentration of empirical products,
//! discretization and truncation bounds).
//!
//! The exact core works entirely with [`DiscreteDistribution`]s: revenue
//! curves with ironing ([`distributions::RevenueCurve`]), the rank-based
//! optimal mechanism ([`mechanisms::RankMechanism`]), and a brute-force
//! optimality oracle that enumerates monotone deterministic mechanisms
//! ([`mechanisms::brute_force_opt`]). Continuous families enter only through
//! sampling or finite discretization, so every revenue figure in a test is a
//! finite sum.
//!
//! Everything is deterministic given a seed: experiments derive one
//! counter-based RNG per (seed, tag, trial) via [`rng::trial_rng`], so trial
//! counts and thread counts never change results.

pub mod distributions;
pub mod error;
pub mod learning;
pub mod mechanisms;
pub mod report;
pub mod rng;
pub mod signals;
pub mod spec_io;
pub mod verification;

pub use distributions::{ContinuousFamily, DiscreteDistribution, ProductDistribution, ValueGrid};
pub use error::{Error, Result};
pub use mechanisms::{Outcome, RankMechanism};
pub use signals::{SignalModel, SignalSample};

/// Tolerance for probability identities (masses summing to one, CDF
/// comparisons). Double-precision accumulation over at most ~10^6 terms
/// stays well inside this.
pub const PROB_TOL: f64 = 1e-12;

/// Tolerance for revenue comparisons (expected revenues are sums of
/// value-weighted probabilities, so they accumulate more rounding than raw
/// masses).
pub const REVENUE_TOL: f64 = 1e-9;
