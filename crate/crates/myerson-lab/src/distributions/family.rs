//! Parametric continuous value distributions. They are never integrated
//! against directly: exact computation happens on finite discretizations, and
//! sampling goes through the quantile transform.

use crate::error::{Error, Result};
use crate::DiscreteDistribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// The continuous families the experiments draw on.
///
/// `LbType1(c)` has CDF `F(x) = 1 - c/(x+c)`: posting any price p earns
/// `p·c/(p+c) < c`, with supremum c approached as p grows — an equal-revenue
/// shape with optimal single-buyer revenue c. `LbType2(c, eps0)` follows the
/// same curve up to the breakpoint `x* = (1-2eps0)c/(2eps0)` and then decays
/// faster, so its optimal revenue drops to `c(1-2eps0)`, attained at x*.
/// The pair is what makes the hard signal instances hard: which of the two a
/// signal maps to is nearly invisible in samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ContinuousFamily {
    Uniform { a: f64, b: f64 },
    Exponential { rate: f64 },
    #[serde(alias = "lb1")]
    LbType1 { c: f64 },
    #[serde(alias = "lb2")]
    LbType2 { c: f64, eps0: f64 },
}

impl ContinuousFamily {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b) {
            return Err(Error::invalid(format!("uniform needs 0 <= a < b, got [{a}, {b}]")));
        }
        Ok(Self::Uniform { a, b })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid(format!("exponential rate {rate} must be positive")));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn lb_type1(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("lb_type1 scale {c} must be positive")));
        }
        Ok(Self::LbType1 { c })
    }

    pub fn lb_type2(c: f64, eps0: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("lb_type2 scale {c} must be positive")));
        }
        if !(eps0 > 0.0 && eps0 < 0.5) {
            return Err(Error::invalid(format!("lb_type2 breakpoint parameter {eps0} outside (0, 1/2)")));
        }
        Ok(Self::LbType2 { c, eps0 })
    }

    /// P(X <= x).
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            // all families are supported on the non-negative reals; Uniform
            // additionally starts at a >= 0
            return match *self {
                Self::Uniform { .. } | Self::Exponential { .. } | Self::LbType1 { .. } | Self::LbType2 { .. } => 0.0,
            };
        }
        match *self {
            Self::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Self::Exponential { rate } => 1.0 - (-rate * x).exp(),
            Self::LbType1 { c } => 1.0 - c / (x + c),
            Self::LbType2 { c, eps0 } => {
                let w = 1.0 - 2.0 * eps0;
                let breakpoint = w * c / (2.0 * eps0);
                if x < breakpoint {
                    1.0 - c / (x + c)
                } else {
                    1.0 - c * w * w / (x - c * w)
                }
            }
        }
    }

    /// P(X >= x); equals 1 - cdf(x) since the families are atomless.
    pub fn tail(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// Expected revenue of posting price p.
    pub fn posted_revenue(&self, p: f64) -> f64 {
        p * self.tail(p)
    }

    /// Generalized inverse of the CDF. Unbounded families return +inf at
    /// q = 1.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!("quantile argument {q} outside [0,1]")));
        }
        Ok(match *self {
            Self::Uniform { a, b } => a + (b - a) * q,
            Self::Exponential { rate } => {
                if q == 1.0 {
                    f64::INFINITY
                } else {
                    -(1.0 - q).ln() / rate
                }
            }
            Self::LbType1 { c } => {
                if q == 1.0 {
                    f64::INFINITY
                } else {
                    c * q / (1.0 - q)
                }
            }
            Self::LbType2 { c, eps0 } => {
                let w = 1.0 - 2.0 * eps0;
                if q == 1.0 {
                    f64::INFINITY
                } else if q < 1.0 - 2.0 * eps0 {
                    c * q / (1.0 - q)
                } else {
                    c * w + c * w * w / (1.0 - q)
                }
            }
        })
    }

    /// One quantile-transform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u).expect("u in [0,1)")
    }

    /// Equal-mass finite discretization: atoms at the k/(grid+1) quantiles
    /// for k = 1..grid, each with mass 1/grid. The shifted denominator keeps
    /// the top atom finite for unbounded families.
    pub fn discretize(&self, grid: usize) -> Result<DiscreteDistribution> {
        if grid == 0 {
            return Err(Error::invalid("discretization grid must have at least one atom"));
        }
        let mut atoms = Vec::with_capacity(grid);
        let mass = 1.0 / grid as f64;
        for k in 1..=grid {
            let q = k as f64 / (grid + 1) as f64;
            atoms.push((self.quantile(q)?, mass));
        }
        // strictly increasing quantiles make duplicates impossible for these
        // families, but the merge in the constructor is cheap insurance
        atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
        let support: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let probs: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        DiscreteDistribution::new(support, probs)
    }

    /// Best posted price over the `grid`-atom discretization, without
    /// materializing it: atom k sits at the k/(grid+1) quantile, and posting
    /// it sells with probability (grid+1-k)/grid. Streaming lets grids of
    /// millions of atoms close the discretization gap for fine comparisons.
    /// Returns (price, revenue); ties go to the smaller price.
    pub fn discretized_posted_opt(&self, grid: usize) -> Result<(f64, f64)> {
        if grid == 0 {
            return Err(Error::invalid("discretization grid must have at least one atom"));
        }
        let mut best_price = 0.0;
        let mut best_rev = f64::NEG_INFINITY;
        for k in 1..=grid {
            let v = self.quantile(k as f64 / (grid + 1) as f64)?;
            let rev = v * (grid + 1 - k) as f64 / grid as f64;
            if rev > best_rev {
                best_rev = rev;
                best_price = v;
            }
        }
        Ok((best_price, best_rev))
    }
}
