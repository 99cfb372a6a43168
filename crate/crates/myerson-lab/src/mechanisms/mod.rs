//! The exact auction engine: rank mechanisms (ironed-virtual-value
//! maximization with lexicographic tie-breaking), revenue evaluation, and
//! simple benchmark mechanisms (posted prices, second price with duplicate
//! buyers).
//!
//! A [`RankMechanism`] is a total order over (buyer, support value) cells.
//! The item goes to the occupied cell of best (lowest) rank whose ironed
//! value is non-negative; the winner pays the smallest value in their own
//! support that would still have won. Built from the revenue curves of a
//! product distribution this is the revenue-optimal auction, which the
//! brute-force oracle in [`oracle`] confirms by exhaustive enumeration.

mod oracle;

pub use oracle::{brute_force_opt, ORACLE_MAX_BUYERS, ORACLE_MAX_CELLS};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{revenue_curve, DiscreteDistribution, ProductDistribution, ValueGrid};
use crate::error::{Error, Result};

/// Profile cap for exact expected-revenue enumeration.
pub const EXACT_ENUM_CAP: usize = 1_000_000;

/// Result of running a mechanism at one value profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    /// Winning buyer (0-based), or `None` when every buyer's ironed value is
    /// negative and the item is kept.
    pub winner: Option<usize>,
    /// Threshold payment; 0 without a winner, never above the winner's
    /// reported value.
    pub payment: f64,
}

impl Outcome {
    pub fn no_sale() -> Self {
        Outcome { winner: None, payment: 0.0 }
    }
}

/// One (buyer, value) cell of a serialized mechanism. `ironed_value: None`
/// encodes negative infinity (a zero-mass atom below all probability mass),
/// which JSON numbers cannot carry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MechanismCell {
    pub buyer: usize,
    pub value: f64,
    pub ironed_value: Option<f64>,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct BuyerCells {
    /// Ascending support values, mirrored from the distribution the
    /// mechanism was built on.
    values: Vec<f64>,
    /// Ironed value per atom; non-decreasing.
    ironed: Vec<f64>,
    /// Global rank per atom; strictly decreasing (higher value always ranks
    /// better within one buyer).
    ranks: Vec<usize>,
    /// Smallest index with non-negative ironed value — the buyer's personal
    /// reserve. `usize::MAX` when the buyer can never win.
    first_active: usize,
}

/// A deterministic single-item auction given by a total order over all
/// (buyer, value) cells plus the "sell only at non-negative ironed value"
/// reserve rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MechanismCell>", into = "Vec<MechanismCell>")]
pub struct RankMechanism {
    buyers: Vec<BuyerCells>,
}

impl RankMechanism {
    pub fn n(&self) -> usize {
        self.buyers.len()
    }

    /// Support values of one buyer, ascending.
    pub fn support(&self, buyer: usize) -> &[f64] {
        &self.buyers[buyer].values
    }

    pub fn ironed_values(&self, buyer: usize) -> &[f64] {
        &self.buyers[buyer].ironed
    }

    pub fn ranks(&self, buyer: usize) -> &[usize] {
        &self.buyers[buyer].ranks
    }

    /// Flat cell list, buyers in order, values ascending within a buyer.
    pub fn to_cells(&self) -> Vec<MechanismCell> {
        let mut cells = Vec::new();
        for (i, b) in self.buyers.iter().enumerate() {
            for k in 0..b.values.len() {
                cells.push(MechanismCell {
                    buyer: i,
                    value: b.values[k],
                    ironed_value: if b.ironed[k] == f64::NEG_INFINITY {
                        None
                    } else {
                        Some(b.ironed[k])
                    },
                    rank: b.ranks[k],
                });
            }
        }
        cells
    }

    pub fn from_cells(cells: Vec<MechanismCell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::invalid("mechanism needs at least one cell"));
        }
        let n = 1 + cells.iter().map(|c| c.buyer).max().unwrap();
        let mut buyers = Vec::with_capacity(n);
        for i in 0..n {
            let mut rows: Vec<&MechanismCell> = cells.iter().filter(|c| c.buyer == i).collect();
            if rows.is_empty() {
                return Err(Error::invalid(format!("buyer {i} has no cells")));
            }
            rows.sort_by(|a, b| a.value.total_cmp(&b.value));
            let values: Vec<f64> = rows.iter().map(|c| c.value).collect();
            let ironed: Vec<f64> =
                rows.iter().map(|c| c.ironed_value.unwrap_or(f64::NEG_INFINITY)).collect();
            let ranks: Vec<usize> = rows.iter().map(|c| c.rank).collect();
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!("buyer {i} has duplicate support values")));
            }
            if ranks.windows(2).any(|w| w[0] <= w[1]) {
                return Err(Error::invalid(format!(
                    "buyer {i} ranks must strictly improve with value"
                )));
            }
            buyers.push(BuyerCells { values, ironed, ranks, first_active: 0 });
        }
        let mut all_ranks: Vec<usize> = cells.iter().map(|c| c.rank).collect();
        all_ranks.sort_unstable();
        if all_ranks.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("ranks must form a total order (no repeats)"));
        }
        for b in &mut buyers {
            b.first_active = b.ironed.iter().position(|&x| x >= 0.0).unwrap_or(usize::MAX);
        }
        Ok(RankMechanism { buyers })
    }

    /// Index of `v` in buyer `i`'s support, or an error — mechanisms only
    /// accept values they were built for.
    fn locate(&self, buyer: usize, v: f64) -> Result<usize> {
        let values = &self.buyers[buyer].values;
        let idx = values.partition_point(|&x| x < v);
        if idx < values.len() && values[idx] == v {
            Ok(idx)
        } else {
            Err(Error::ValueNotInSupport { buyer, value: v })
        }
    }

    /// Allocation and threshold payment at a profile of support indices.
    /// Winner = best-ranked occupied cell with ironed value ≥ 0; payment =
    /// smallest winner value that still beats the best active rival cell.
    fn outcome_by_indices(&self, idxs: &[usize]) -> Outcome {
        let mut winner = None;
        let mut best_rank = usize::MAX;
        for (i, b) in self.buyers.iter().enumerate() {
            let k = idxs[i];
            if b.ironed[k] >= 0.0 && b.ranks[k] < best_rank {
                best_rank = b.ranks[k];
                winner = Some(i);
            }
        }
        let Some(w) = winner else { return Outcome::no_sale() };
        let mut best_other = usize::MAX;
        for (i, b) in self.buyers.iter().enumerate() {
            if i != w && b.ironed[idxs[i]] >= 0.0 {
                best_other = best_other.min(b.ranks[idxs[i]]);
            }
        }
        // within the active (ironed ≥ 0) tail of the winner's support, ranks
        // decrease with value, so "still wins" is a suffix: binary-search its
        // start
        let b = &self.buyers[w];
        let lo = b.first_active;
        let off = b.ranks[lo..].partition_point(|&r| r >= best_other);
        Outcome { winner: Some(w), payment: b.values[lo + off] }
    }

    /// Runs the auction on a reported profile. Every value must be in the
    /// corresponding buyer's support.
    pub fn run(&self, profile: &[f64]) -> Result<Outcome> {
        if profile.len() != self.n() {
            return Err(Error::invalid(format!(
                "profile has {} values for {} buyers",
                profile.len(),
                self.n()
            )));
        }
        let mut idxs = vec![0usize; profile.len()];
        for (i, &v) in profile.iter().enumerate() {
            idxs[i] = self.locate(i, v)?;
        }
        Ok(self.outcome_by_indices(&idxs))
    }
}

impl TryFrom<Vec<MechanismCell>> for RankMechanism {
    type Error = Error;
    fn try_from(cells: Vec<MechanismCell>) -> Result<Self> {
        RankMechanism::from_cells(cells)
    }
}

impl From<RankMechanism> for Vec<MechanismCell> {
    fn from(m: RankMechanism) -> Self {
        m.to_cells()
    }
}

/// Builds the revenue-optimal auction for `d`: ironed values from each
/// buyer's revenue curve, cells ordered by ironed value descending with ties
/// broken to the lower buyer index and then the higher value. The
/// deterministic tie-break keeps the mechanism optimal and every run
/// reproducible.
pub fn build_myerson(d: &ProductDistribution) -> RankMechanism {
    struct Cell {
        ironed: f64,
        buyer: usize,
        atom: usize,
        value: f64,
    }
    let mut cells = Vec::new();
    let mut buyers = Vec::with_capacity(d.n());
    for (i, b) in d.buyers().iter().enumerate() {
        let rc = revenue_curve(b);
        let ironed = rc.ironed_values().to_vec();
        for (k, (&v, &phi)) in b.support().iter().zip(ironed.iter()).enumerate() {
            cells.push(Cell { ironed: phi, buyer: i, atom: k, value: v });
        }
        let first_active = ironed.iter().position(|&x| x >= 0.0).unwrap_or(usize::MAX);
        buyers.push(BuyerCells {
            values: b.support().to_vec(),
            ironed,
            ranks: vec![0; b.support().len()],
            first_active,
        });
    }
    cells.sort_by(|a, b| {
        b.ironed
            .total_cmp(&a.ironed)
            .then(a.buyer.cmp(&b.buyer))
            .then(b.value.total_cmp(&a.value))
    });
    for (pos, c) in cells.iter().enumerate() {
        buyers[c.buyer].ranks[c.atom] = pos + 1;
    }
    RankMechanism { buyers }
}

/// Walks every profile of positive-probability atoms, handing `f` the
/// profile probability and per-buyer indices (already mapped through
/// `atom_lists`). Zero-mass atoms are skipped: they contribute nothing.
fn enumerate_profiles(atom_lists: &[Vec<(usize, f64)>], mut f: impl FnMut(f64, &[usize])) {
    let n = atom_lists.len();
    let mut ctr = vec![0usize; n];
    let mut idxs = vec![0usize; n];
    loop {
        let mut prob = 1.0;
        for i in 0..n {
            let (ix, p) = atom_lists[i][ctr[i]];
            idxs[i] = ix;
            prob *= p;
        }
        f(prob, &idxs);
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            ctr[i] += 1;
            if ctr[i] < atom_lists[i].len() {
                break;
            }
            ctr[i] = 0;
            i += 1;
        }
    }
}

/// Positive atoms of each buyer of `d`, located in `m`'s supports; also the
/// profile count for the cap check.
fn positive_atom_lists(
    m: &RankMechanism,
    d: &ProductDistribution,
    map: impl Fn(usize, f64) -> Result<f64>,
) -> Result<(Vec<Vec<(usize, f64)>>, usize)> {
    if m.n() != d.n() {
        return Err(Error::invalid(format!(
            "mechanism has {} buyers, distribution has {}",
            m.n(),
            d.n()
        )));
    }
    let mut lists = Vec::with_capacity(d.n());
    let mut count: usize = 1;
    for (i, b) in d.buyers().iter().enumerate() {
        let mut list = Vec::new();
        for (k, &p) in b.probs().iter().enumerate() {
            if p > 0.0 {
                let v = map(i, b.support()[k])?;
                list.push((m.locate(i, v)?, p));
            }
        }
        count = count.saturating_mul(list.len());
        lists.push(list);
    }
    Ok((lists, count))
}

/// Exact expected revenue of `m` under `d` by enumerating every profile of
/// positive-mass atoms, up to `cap` profiles.
pub fn expected_revenue_exact_with_cap(
    m: &RankMechanism,
    d: &ProductDistribution,
    cap: usize,
) -> Result<f64> {
    let (lists, count) = positive_atom_lists(m, d, |_, v| Ok(v))?;
    if count > cap {
        return Err(Error::InstanceTooLarge { cells: count, cap });
    }
    let mut total = 0.0;
    enumerate_profiles(&lists, |prob, idxs| {
        total += prob * m.outcome_by_indices(idxs).payment;
    });
    Ok(total)
}

/// [`expected_revenue_exact_with_cap`] at the default cap of 10^6 profiles.
/// Past the cap, use [`expected_revenue_mc`].
pub fn expected_revenue_exact(m: &RankMechanism, d: &ProductDistribution) -> Result<f64> {
    expected_revenue_exact_with_cap(m, d, EXACT_ENUM_CAP)
}

/// Exact expected revenue when profiles drawn from `d` are first rounded
/// down to `grid` before being run through `m` — how a learned mechanism
/// prices values it never sampled. `m`'s supports must contain every grid
/// value a positive atom of `d` rounds to.
pub fn expected_revenue_rounded_exact(
    m: &RankMechanism,
    grid: &ValueGrid,
    d: &ProductDistribution,
) -> Result<f64> {
    let (lists, count) = positive_atom_lists(m, d, |i, v| {
        grid.floor(v).ok_or_else(|| {
            Error::invalid(format!("buyer {i} value {v} lies below the whole rounding grid"))
        })
    })?;
    if count > EXACT_ENUM_CAP {
        return Err(Error::InstanceTooLarge { cells: count, cap: EXACT_ENUM_CAP });
    }
    let mut total = 0.0;
    enumerate_profiles(&lists, |prob, idxs| {
        total += prob * m.outcome_by_indices(idxs).payment;
    });
    Ok(total)
}

/// Monte Carlo expected revenue: sample mean over `trials` profiles drawn
/// from `d`, with its standard error (0 when `trials` is 1).
pub fn expected_revenue_mc(
    m: &RankMechanism,
    d: &ProductDistribution,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::invalid("Monte Carlo revenue needs at least one trial"));
    }
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..trials {
        let profile = d.sample_profile(rng);
        let pay = m.run(&profile)?.payment;
        sum += pay;
        sumsq += pay * pay;
    }
    let mean = sum / trials as f64;
    let stderr = if trials > 1 {
        let var = ((sumsq - sum * sum / trials as f64) / (trials as f64 - 1.0)).max(0.0);
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr))
}

/// E[max(0, max_i ironed_i(v_i))] under `d` — the ironed virtual surplus,
/// which equals the Myerson mechanism's expected revenue.
pub fn expected_ironed_surplus(m: &RankMechanism, d: &ProductDistribution) -> Result<f64> {
    let (lists, count) = positive_atom_lists(m, d, |_, v| Ok(v))?;
    if count > EXACT_ENUM_CAP {
        return Err(Error::InstanceTooLarge { cells: count, cap: EXACT_ENUM_CAP });
    }
    let mut total = 0.0;
    enumerate_profiles(&lists, |prob, idxs| {
        let best =
            m.buyers.iter().zip(idxs).map(|(b, &k)| b.ironed[k]).fold(f64::NEG_INFINITY, f64::max);
        total += prob * best.max(0.0);
    });
    Ok(total)
}

/// One run of the duplicate-buyer benchmark: draw two independent values per
/// buyer, cap all of them at `cap`, sell to the highest at the second-highest
/// capped value.
pub fn vcg_duplicates_revenue(
    d: &ProductDistribution,
    cap: f64,
    rng: &mut impl Rng,
) -> f64 {
    let mut best = 0.0f64;
    let mut second = 0.0f64;
    for b in d.buyers() {
        for _ in 0..2 {
            let v = b.sample(rng).min(cap);
            if v > best {
                second = best;
                best = v;
            } else if v > second {
                second = v;
            }
        }
    }
    second
}

/// Expected revenue of posting price `p` to a single buyer with distribution
/// `d`: p · P(X ≥ p).
pub fn posted_price_revenue(p: f64, d: &DiscreteDistribution) -> f64 {
    d.posted_revenue(p)
}
