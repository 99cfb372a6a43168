//! Sample-based auction learning: estimate revenue scale from samples, build
//! a rounding grid, and run the Myerson construction on per-buyer empirical
//! distributions.
//!
//! Five variants share one pipeline. `Finite` builds empirical distributions
//! straight from the samples. The bounded variants round sampled values to an
//! arithmetic (`BoundedAdditive`) or geometric (`BoundedMultiplicative`) grid
//! under a known value bound h. `Regular` and `Mhr` first spend a prefix of
//! the samples on a constant-factor revenue estimate Apx, anchor a geometric
//! grid at a multiple of Apx, and round the remaining samples to it. Every
//! sample-count requirement is the shape the analysis dictates, scaled by a
//! user constant: the guarantees are asymptotic, so trends — not absolute
//! constants — are what experiments check.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{DiscreteDistribution, ProductDistribution, ValueGrid};
use crate::error::{Error, Result};
use crate::mechanisms::{
    build_myerson, expected_revenue_exact, expected_revenue_rounded_exact, RankMechanism,
};

/// m iid profile draws, one row per draw, one column per buyer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    rows: Vec<Vec<f64>>,
}

impl SampleMatrix {
    /// Rows must be non-empty, rectangular, and non-negative.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::invalid("sample matrix must have at least one row and column"));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("sample matrix rows must all have the same length"));
        }
        if rows.iter().flatten().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::invalid("sample values must be non-negative reals"));
        }
        Ok(Self { rows })
    }

    /// Draws m iid profiles from `d`.
    pub fn draw(d: &ProductDistribution, m: usize, rng: &mut impl Rng) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("cannot draw an empty sample matrix"));
        }
        Ok(Self { rows: (0..m).map(|_| d.sample_profile(rng)).collect() })
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Buyer i's values over a row range.
    fn column(&self, i: usize, rows: std::ops::Range<usize>) -> Vec<f64> {
        self.rows[rows].iter().map(|r| r[i]).collect()
    }
}

/// Which learning pipeline to run; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Finite,
    BoundedAdditive,
    BoundedMultiplicative,
    Regular,
    Mhr,
}

/// Accuracy target, variant, optional value bound, and the scale knob
/// applied to every Θ(·) sample-count formula.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub eps: f64,
    pub variant: Variant,
    /// Upper bound on values; required by the bounded variants.
    pub h: Option<f64>,
    pub constant_scale: f64,
}

impl LearnerConfig {
    pub fn new(eps: f64, variant: Variant, h: Option<f64>, constant_scale: f64) -> Result<Self> {
        let cfg = LearnerConfig { eps, variant, h, constant_scale };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid(format!("eps {} must lie in (0,1)", self.eps)));
        }
        if !(self.constant_scale > 0.0) {
            return Err(Error::invalid("constant_scale must be positive"));
        }
        match self.variant {
            Variant::BoundedAdditive | Variant::BoundedMultiplicative => match self.h {
                Some(h) if h > 0.0 => Ok(()),
                _ => Err(Error::invalid("bounded variants need a positive value bound h")),
            },
            _ => Ok(()),
        }
    }
}

/// Median-guarded single-buyer revenue estimate: the best revenue among
/// sampled prices that at least half the samples would pay,
/// max over v with empirical P(X ≥ v) ≥ 1/2 of v · P̂(X ≥ v).
pub fn srev_estimate(samples: &[f64]) -> Result<f64> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            available: m,
            context: "srev_estimate".into(),
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = f64::NEG_INFINITY;
    for (idx, &v) in sorted.iter().enumerate() {
        if idx > 0 && sorted[idx - 1] == v {
            continue; // tail counted at the first occurrence
        }
        let tail = (m - idx) as f64 / m as f64;
        if tail >= 0.5 {
            let rev = v * tail;
            // ascending scan + strict improvement = smallest price on ties
            if rev > best {
                best = rev;
            }
        }
    }
    Ok(best)
}

/// Row budget of the two [`approx_opt`] phases: per-buyer SRev rows, then
/// two rows per duplicate-buyer second-price run.
pub fn approx_phase_shape(n: usize, eps: f64, constant_scale: f64) -> (usize, usize) {
    let nf = n as f64;
    let srev_rows = (constant_scale * (nf / eps).ln()).ceil().max(2.0) as usize;
    let vcg_runs = (constant_scale * nf / eps * (1.0 / eps).ln()).ceil().max(1.0) as usize;
    (srev_rows, vcg_runs)
}

/// Rows [`approx_opt`] consumes at this configuration.
pub fn approx_opt_rows(n: usize, eps: f64, constant_scale: f64) -> usize {
    let (srev_rows, vcg_runs) = approx_phase_shape(n, eps, constant_scale);
    srev_rows + 2 * vcg_runs
}

/// Second-highest value of two profiles merged and capped — the revenue of
/// one second-price run over two iid copies of each buyer.
fn duplicate_second_price(row_a: &[f64], row_b: &[f64], cap: f64) -> f64 {
    let mut best = 0.0f64;
    let mut second = 0.0f64;
    for &v in row_a.iter().chain(row_b) {
        let v = v.min(cap);
        if v > best {
            second = best;
            best = v;
        } else if v > second {
            second = v;
        }
    }
    second
}

/// Constant-factor estimate of the optimal revenue. Phase 1 sums per-buyer
/// guarded revenue estimates into SRev; phase 2 averages duplicate-buyer
/// second-price revenue with values capped at SRev/ε. Rows are consumed in
/// order and never reused, preserving phase independence.
pub fn approx_opt(samples: &SampleMatrix, eps: f64, constant_scale: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("eps {eps} must lie in (0,1)")));
    }
    let n = samples.n();
    let (srev_rows, vcg_runs) = approx_phase_shape(n, eps, constant_scale);
    let required = srev_rows + 2 * vcg_runs;
    if samples.m() < required {
        return Err(Error::InsufficientSamples {
            required,
            available: samples.m(),
            context: "approx_opt".into(),
        });
    }
    let mut srev = 0.0;
    for i in 0..n {
        srev += srev_estimate(&samples.column(i, 0..srev_rows))?;
    }
    let cap = srev / eps;
    let mut total = 0.0;
    for run in 0..vcg_runs {
        let r = srev_rows + 2 * run;
        total += duplicate_second_price(&samples.rows[r], &samples.rows[r + 1], cap);
    }
    Ok(total / vcg_runs as f64)
}

/// Grid families [`build_value_grid`] can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// Multiples of ε from 0 up to the anchor (the value bound h).
    Additive,
    /// Powers of (1-ε)^-1 from 1 up to the anchor (the value bound h).
    Multiplicative,
    /// Geometric, ratio 1-ε, from (8/ε)·anchor down to (ε/8)·anchor, plus 0.
    Regular,
    /// Geometric from 8·ln(1/ε)·anchor down to (ε/8)·anchor, plus 0.
    Mhr,
    /// Geometric from (2/ε)·anchor down to (ε/n²)·anchor, plus 0 — the grid
    /// of the multi-agent signal auction.
    Signal,
}

impl Variant {
    fn grid_kind(self) -> Option<GridKind> {
        match self {
            Variant::Finite => None,
            Variant::BoundedAdditive => Some(GridKind::Additive),
            Variant::BoundedMultiplicative => Some(GridKind::Multiplicative),
            Variant::Regular => Some(GridKind::Regular),
            Variant::Mhr => Some(GridKind::Mhr),
        }
    }
}

/// Builds the rounding grid for one variant, anchored at a revenue estimate
/// (geometric kinds) or the value bound h (bounded kinds). `n` only enters
/// the `Signal` kind's bottom end ε/n².
pub fn build_value_grid(anchor: f64, eps: f64, n: usize, kind: GridKind) -> Result<ValueGrid> {
    if !(anchor > 0.0 && anchor.is_finite()) {
        return Err(Error::invalid(format!("grid anchor {anchor} must be positive and finite")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("eps {eps} must lie in (0,1)")));
    }
    let mut values = Vec::new();
    match kind {
        GridKind::Additive => {
            let mut k = (anchor / eps * (1.0 + 1e-12)).floor() as i64;
            while k >= 0 {
                values.push(k as f64 * eps);
                k -= 1;
            }
        }
        GridKind::Multiplicative => {
            // powers (1-ε)^-k for k = 0,1,... while they stay ≤ anchor
            let ratio = 1.0 - eps;
            let mut k = 0i32;
            loop {
                let v = ratio.powi(-k);
                if v > anchor * (1.0 + 1e-12) {
                    break;
                }
                values.push(v);
                k += 1;
            }
            values.reverse();
        }
        GridKind::Regular | GridKind::Mhr | GridKind::Signal => {
            let (top_mult, bottom_mult) = match kind {
                GridKind::Regular => (8.0 / eps, eps / 8.0),
                GridKind::Mhr => (8.0 * (1.0 / eps).ln(), eps / 8.0),
                GridKind::Signal => (2.0 / eps, eps / (n as f64 * n as f64)),
                _ => unreachable!(),
            };
            let top = top_mult * anchor;
            let bottom = bottom_mult * anchor;
            let ratio = 1.0 - eps;
            let mut k = 0i32;
            loop {
                let v = top * ratio.powi(k);
                if v < bottom * (1.0 - 1e-12) {
                    break;
                }
                values.push(v);
                k += 1;
            }
            values.push(0.0);
        }
    }
    ValueGrid::new(values)
}

/// Sample rows each variant demands at this configuration — the shape of
/// the matching algorithm's Θ(·) bound scaled by `constant_scale`, with the
/// confidence parameter tied to ε. The `Finite` bound's support-size factor
/// is data-dependent and folds into the constant.
pub fn required_rows(cfg: &LearnerConfig, n: usize) -> Result<usize> {
    cfg.validate()?;
    let cs = cfg.constant_scale;
    let e = cfg.eps;
    let nf = n as f64;
    let raw = match cfg.variant {
        Variant::Finite => cs * nf / (e * e) * (nf + 1.0).ln(),
        Variant::BoundedAdditive => {
            let h = cfg.h.unwrap();
            cs * h * h / (e * e) * (nf * h / e * (nf * h / e).max(2.0).ln() + (1.0 / e).ln())
        }
        Variant::BoundedMultiplicative => {
            let h = cfg.h.unwrap();
            let lh = h.ln().max(1.0);
            cs * h / (e * e) * (nf / e * lh * (nf * lh / e).max(2.0).ln() + (1.0 / e).ln())
        }
        Variant::Regular => cs * nf / e.powi(4) * (1.0 / e).ln() * (nf / e).ln(),
        Variant::Mhr => cs * nf / e.powi(3) * (1.0 / e).ln().powi(2) * (nf / e).ln(),
    };
    let main = (raw.ceil() as usize).max(1);
    Ok(match cfg.variant {
        Variant::Regular | Variant::Mhr => approx_opt_rows(n, e, cs) + main,
        _ => main,
    })
}

/// A mechanism learned from samples, together with the grid new values must
/// be rounded down to before it can price them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedMechanism {
    pub mechanism: RankMechanism,
    /// Present for every variant except `Finite`.
    pub grid: Option<ValueGrid>,
    /// The Apx estimate of the anchor phase (`Regular`/`Mhr` only).
    pub apx: Option<f64>,
}

impl LearnedMechanism {
    /// Exact expected revenue against a (true) finite product distribution,
    /// rounding its values through the grid when one is present.
    pub fn expected_revenue_on(&self, d: &ProductDistribution) -> Result<f64> {
        match &self.grid {
            Some(grid) => expected_revenue_rounded_exact(&self.mechanism, grid, d),
            None => expected_revenue_exact(&self.mechanism, d),
        }
    }
}

/// Runs the variant's full pipeline on a sample matrix: optional Apx phase,
/// grid construction, per-buyer empirical distributions over rounded values
/// (the whole grid is kept in each support with zero mass so the mechanism
/// can price any rounded value), then the Myerson construction.
pub fn learn_empirical_myerson(
    samples: &SampleMatrix,
    cfg: &LearnerConfig,
) -> Result<LearnedMechanism> {
    let n = samples.n();
    let required = required_rows(cfg, n)?;
    if samples.m() < required {
        return Err(Error::InsufficientSamples {
            required,
            available: samples.m(),
            context: format!("learn_empirical_myerson ({:?})", cfg.variant),
        });
    }

    let (start, apx, grid) = match cfg.variant {
        Variant::Finite => (0, None, None),
        Variant::BoundedAdditive | Variant::BoundedMultiplicative => {
            let grid =
                build_value_grid(cfg.h.unwrap(), cfg.eps, n, cfg.variant.grid_kind().unwrap())?;
            (0, None, Some(grid))
        }
        Variant::Regular | Variant::Mhr => {
            let spent = approx_opt_rows(n, cfg.eps, cfg.constant_scale);
            let apx = approx_opt(samples, cfg.eps, cfg.constant_scale)?;
            let grid = build_value_grid(apx, cfg.eps, n, cfg.variant.grid_kind().unwrap())?;
            (spent, Some(apx), Some(grid))
        }
    };

    let mut buyers = Vec::with_capacity(n);
    for i in 0..n {
        let column = samples.column(i, start..samples.m());
        let empirical = match &grid {
            None => DiscreteDistribution::empirical_from(&column)?,
            Some(g) => {
                let rounded = column
                    .iter()
                    .map(|&v| {
                        g.floor(v).ok_or_else(|| {
                            Error::invalid(format!(
                                "buyer {i} sample {v} lies below the whole grid"
                            ))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                DiscreteDistribution::empirical_from(&rounded)?.with_zero_atoms(g.values())?
            }
        };
        buyers.push(empirical);
    }
    let mechanism = build_myerson(&ProductDistribution::new(buyers)?);
    Ok(LearnedMechanism { mechanism, grid, apx })
}
