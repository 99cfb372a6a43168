//! Probability-distribution machinery: finite distributions with exact
//! CDF/quantile/tail evaluation, truncation and grid-rounding transforms,
//! mixtures, stochastic-dominance checks, continuous families consumed via
//! discretization, and revenue curves with ironing.
//!
//! Two quantile-like conventions coexist and are deliberately kept apart:
//! [`DiscreteDistribution::quantile_value`] works in CDF space
//! (`inf {v : F(v) >= q}`), while revenue curves work in sale-probability
//! space (`s = P(X >= v)`). No formula mixes the two.

mod family;
mod revenue;

pub use family::ContinuousFamily;
pub use revenue::{revenue_curve, single_buyer_opt, RevenueCurve};

use crate::error::{Error, Result};
use crate::PROB_TOL;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A finite value distribution: strictly ascending non-negative support with
/// aligned probabilities. Zero-probability atoms are permitted — they carry
/// no mass but participate in mechanism supports (a mechanism must be able to
/// price values it may be shown later).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiscreteAtoms", into = "DiscreteAtoms")]
pub struct DiscreteDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
    /// cum[i] = P(X <= support[i]), prefix sums of probs.
    cum: Vec<f64>,
    /// tails[i] = P(X >= support[i]), suffix sums of probs
    /// (tails[i] = probs[i] + tails[i+1], so adjacent atoms share boundary
    /// mass bit-for-bit).
    tails: Vec<f64>,
}

/// Wire form of [`DiscreteDistribution`]: just the atom lists.
/// Deserialization funnels through [`DiscreteDistribution::new`], so JSON
/// inputs face the same validation as constructed values and the cached
/// prefix/suffix sums are rebuilt rather than trusted.
#[derive(Serialize, Deserialize)]
struct DiscreteAtoms {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<DiscreteAtoms> for DiscreteDistribution {
    type Error = Error;

    fn try_from(atoms: DiscreteAtoms) -> Result<Self> {
        Self::new(atoms.support, atoms.probs)
    }
}

impl From<DiscreteDistribution> for DiscreteAtoms {
    fn from(d: DiscreteDistribution) -> Self {
        DiscreteAtoms { support: d.support, probs: d.probs }
    }
}

impl DiscreteDistribution {
    /// Validates and builds a distribution. Probabilities must be
    /// non-negative and sum to 1 within 1e-12; the support must be finite,
    /// non-negative, and strictly ascending.
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::invalid("support must be non-empty"));
        }
        if support.len() != probs.len() {
            return Err(Error::invalid(format!(
                "support has {} atoms but probs has {} entries",
                support.len(),
                probs.len()
            )));
        }
        for &v in &support {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!("support value {v} is not a non-negative real")));
            }
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("support must be strictly ascending"));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !(p >= 0.0) {
                return Err(Error::invalid(format!("probability {p} is negative")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::invalid(format!("probabilities sum to {sum}, expected 1")));
        }
        Ok(Self::assemble(support, probs))
    }

    /// Internal constructor for inputs already known to be a valid
    /// (ascending-support, mass-preserving) atom list.
    fn assemble(support: Vec<f64>, probs: Vec<f64>) -> Self {
        let mut cum = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cum.push(acc);
        }
        let mut tails = vec![0.0; probs.len()];
        let mut tail_acc = 0.0;
        for i in (0..probs.len()).rev() {
            tail_acc = probs[i] + tail_acc;
            tails[i] = tail_acc;
        }
        Self { support, probs, cum, tails }
    }

    pub fn point_mass(v: f64) -> Result<Self> {
        Self::new(vec![v], vec![1.0])
    }

    /// Uniform distribution over a list of values; duplicates merge with
    /// summed mass.
    pub fn uniform_over(values: &[f64]) -> Result<Self> {
        Self::empirical_from(values)
    }

    /// The empirical distribution of a sample multiset: uniform over the
    /// samples, duplicate values merged.
    pub fn empirical_from(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("empirical distribution needs at least one sample"));
        }
        let w = 1.0 / samples.len() as f64;
        Self::from_atoms(samples.iter().map(|&v| (v, w)))
    }

    /// Builds from (value, mass) pairs in any order; equal values merge.
    /// Masses must already total 1.
    fn from_atoms(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support = Vec::with_capacity(pairs.len());
        let mut probs: Vec<f64> = Vec::with_capacity(pairs.len());
        for (v, p) in pairs {
            if support.last() == Some(&v) {
                *probs.last_mut().unwrap() += p;
            } else {
                support.push(v);
                probs.push(p);
            }
        }
        Self::new(support, probs)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        false // support is never empty by construction
    }

    pub fn min_value(&self) -> f64 {
        self.support[0]
    }

    pub fn max_value(&self) -> f64 {
        *self.support.last().unwrap()
    }

    /// P(X <= v); right-continuous step function.
    pub fn cdf(&self, v: f64) -> f64 {
        let idx = self.support.partition_point(|&s| s <= v);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    /// P(X >= v). Note the weak inequality: this is the sale probability of
    /// posting price v, not 1 - cdf(v).
    pub fn tail(&self, v: f64) -> f64 {
        let idx = self.support.partition_point(|&s| s < v);
        if idx == self.support.len() {
            0.0
        } else {
            self.tails[idx]
        }
    }

    /// P(X >= support[i]) for a support index, sharing boundary mass
    /// bit-for-bit with the adjacent atom.
    pub(crate) fn tail_at(&self, i: usize) -> f64 {
        self.tails[i]
    }

    /// Expected revenue of posting price p: `p * P(X >= p)`.
    pub fn posted_revenue(&self, p: f64) -> f64 {
        p * self.tail(p)
    }

    /// Generalized inverse of the CDF: `inf {v : F(v) >= q}`. Always returns
    /// a support atom; q = 0 returns the minimum support value.
    pub fn quantile_value(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!("quantile argument {q} outside [0,1]")));
        }
        let idx = self.cum.partition_point(|&c| c < q).min(self.support.len() - 1);
        Ok(self.support[idx])
    }

    /// One inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let idx = self.cum.partition_point(|&c| c <= u).min(self.support.len() - 1);
        self.support[idx]
    }

    /// Moves all mass strictly above `vbar` down onto the atom `vbar`
    /// (capping values: X -> min(X, vbar)).
    pub fn truncate_at(&self, vbar: f64) -> Result<Self> {
        if !(vbar > 0.0) {
            return Err(Error::invalid(format!("truncation point {vbar} must be positive")));
        }
        if self.max_value() <= vbar {
            return Ok(self.clone());
        }
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(self.len());
        let mut capped = 0.0;
        for (&v, &p) in self.support.iter().zip(&self.probs) {
            if v > vbar {
                capped += p;
            } else {
                atoms.push((v, p));
            }
        }
        atoms.push((vbar, capped));
        Self::from_atoms(atoms)
    }

    /// Collapses the top `delta` of probability mass to a point: every atom
    /// weakly above the (1-delta)-quantile merges into that quantile atom.
    /// The CDF strictly below the quantile is untouched.
    pub fn truncate_top_mass(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("top-mass fraction {delta} outside (0,1)")));
        }
        let vstar = self.quantile_value(1.0 - delta)?;
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(self.len());
        let mut collapsed = 0.0;
        for (&v, &p) in self.support.iter().zip(&self.probs) {
            if v >= vstar {
                collapsed += p;
            } else {
                atoms.push((v, p));
            }
        }
        atoms.push((vstar, collapsed));
        Self::from_atoms(atoms)
    }

    /// Rounds every atom down to the closest grid value from below, merging
    /// masses. Errors when an atom lies below the whole grid (no 0 to catch
    /// it).
    pub fn round_down_to_grid(&self, grid: &ValueGrid) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(self.len());
        for (&v, &p) in self.support.iter().zip(&self.probs) {
            let Some(g) = grid.floor(v) else {
                return Err(Error::invalid(format!(
                    "value {v} lies below every grid value and the grid does not contain 0"
                )));
            };
            atoms.push((g, p));
        }
        Self::from_atoms(atoms)
    }

    /// Extends the support with extra zero-probability atoms (values already
    /// present are ignored). The distribution is unchanged as a measure; the
    /// new atoms exist so a mechanism built from it can price those values.
    pub fn with_zero_atoms(&self, values: &[f64]) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> =
            self.support.iter().zip(&self.probs).map(|(&v, &p)| (v, p)).collect();
        for &v in values {
            if self.support.binary_search_by(|s| s.total_cmp(&v)).is_err() {
                atoms.push((v, 0.0));
            }
        }
        Self::from_atoms(atoms)
    }

    /// First-order stochastic dominance: self ⪰ other iff
    /// `F_self(v) <= F_other(v) + 1e-12` at every value of either support.
    pub fn dominates(&self, other: &DiscreteDistribution) -> bool {
        let check = |v: f64| self.cdf(v) <= other.cdf(v) + PROB_TOL;
        self.support.iter().chain(other.support.iter()).all(|&v| check(v))
    }
}

/// Atomwise weighted merge of finite distributions. Weights must be
/// non-negative and sum to 1.
pub fn mixture(components: &[DiscreteDistribution], weights: &[f64]) -> Result<DiscreteDistribution> {
    if components.is_empty() || components.len() != weights.len() {
        return Err(Error::invalid("mixture needs equally many components and weights"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::invalid(format!("mixture weights sum to {sum}, expected 1")));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::invalid("mixture weights must be non-negative"));
    }
    let atoms = components
        .iter()
        .zip(weights)
        .flat_map(|(d, &w)| d.support.iter().zip(&d.probs).map(move |(&v, &p)| (v, w * p)));
    DiscreteDistribution::from_atoms(atoms)
}

/// Independent per-buyer value distributions; the domain of Opt(·) and of
/// every mechanism in this crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProductBuyers", into = "ProductBuyers")]
pub struct ProductDistribution {
    buyers: Vec<DiscreteDistribution>,
}

/// Wire form of [`ProductDistribution`]; deserialization re-checks the
/// at-least-one-buyer invariant.
#[derive(Serialize, Deserialize)]
struct ProductBuyers {
    buyers: Vec<DiscreteDistribution>,
}

impl TryFrom<ProductBuyers> for ProductDistribution {
    type Error = Error;

    fn try_from(wire: ProductBuyers) -> Result<Self> {
        Self::new(wire.buyers)
    }
}

impl From<ProductDistribution> for ProductBuyers {
    fn from(d: ProductDistribution) -> Self {
        ProductBuyers { buyers: d.buyers }
    }
}

impl ProductDistribution {
    pub fn new(buyers: Vec<DiscreteDistribution>) -> Result<Self> {
        if buyers.is_empty() {
            return Err(Error::invalid("product distribution needs at least one buyer"));
        }
        Ok(Self { buyers })
    }

    pub fn n(&self) -> usize {
        self.buyers.len()
    }

    pub fn buyers(&self) -> &[DiscreteDistribution] {
        &self.buyers
    }

    pub fn buyer(&self, i: usize) -> &DiscreteDistribution {
        &self.buyers[i]
    }

    /// Number of profiles in the exact enumeration, None on overflow.
    pub fn profile_count(&self) -> Option<usize> {
        self.buyers.iter().try_fold(1usize, |acc, d| acc.checked_mul(d.len()))
    }

    /// One iid profile draw (one value per buyer).
    pub fn sample_profile<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.buyers.iter().map(|d| d.sample(rng)).collect()
    }

    /// Rescales every support by `lambda > 0` (used by scaling-invariance
    /// property tests).
    pub fn scale(&self, lambda: f64) -> Result<Self> {
        let buyers = self
            .buyers
            .iter()
            .map(|d| {
                DiscreteDistribution::new(d.support.iter().map(|&v| v * lambda).collect(), d.probs.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(buyers)
    }
}

/// A descending finite price grid; the last element may be 0. Grids are what
/// sampled values get rounded down to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridValues", into = "GridValues")]
pub struct ValueGrid {
    values: Vec<f64>,
}

/// Wire form of [`ValueGrid`]; deserialization re-checks the
/// strictly-descending invariant `floor` relies on.
#[derive(Serialize, Deserialize)]
struct GridValues {
    values: Vec<f64>,
}

impl TryFrom<GridValues> for ValueGrid {
    type Error = Error;

    fn try_from(wire: GridValues) -> Result<Self> {
        Self::new(wire.values)
    }
}

impl From<ValueGrid> for GridValues {
    fn from(g: ValueGrid) -> Self {
        GridValues { values: g.values }
    }
}

impl ValueGrid {
    /// Values must be strictly descending and non-negative.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("value grid must be non-empty"));
        }
        if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::invalid("grid values must be non-negative reals"));
        }
        if values.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::invalid("grid values must be strictly descending"));
        }
        Ok(Self { values })
    }

    /// Descending view.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    /// Largest grid value <= v, or None when v lies below the entire grid.
    pub fn floor(&self, v: f64) -> Option<f64> {
        // values are descending: skip the prefix strictly above v
        let idx = self.values.partition_point(|&g| g > v);
        self.values.get(idx).copied()
    }
}
