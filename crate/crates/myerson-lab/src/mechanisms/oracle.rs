//! Brute-force optimal revenue over every deterministic truthful auction.
//!
//! A deterministic DSIC + IR single-item mechanism on finite supports is
//! exactly a winner map that is monotone along each buyer's own axis (a
//! winner keeps winning when raising only their own value), priced at
//! per-buyer thresholds. This module maximizes expected revenue over all
//! such maps by dynamic programming, independently of the ironing machinery
//! in [`crate::distributions::revenue`] — which makes it the ground truth
//! the Myerson engine is tested against.
//!
//! Shape of the search: put one buyer on a "slab" axis and sweep their
//! values from the top down. Within a slab, the other two buyers form a
//! grid; buyer-2 wins must be a suffix along each v2 row and buyer-3 wins a
//! suffix along each v3 column, so the slab's 2/3 structure is a pair of
//! threshold vectors. Cells won by the slab buyer must shrink (as a set)
//! while sweeping down — their own monotonicity — so the DP state is the
//! bitmask of grid cells still winnable by the slab buyer. Slab-buyer
//! revenue telescopes as the sweep lowers thresholds, and the best 2/3
//! structure compatible with a given mask is precomputed with a
//! superset-max sweep over bitmasks.

use crate::distributions::ProductDistribution;
use crate::error::{Error, Result};

/// The enumeration handles at most this many buyers.
pub const ORACLE_MAX_BUYERS: usize = 3;
/// ... and at most this many profiles (product of support sizes).
pub const ORACLE_MAX_CELLS: usize = 27;

struct Buyer {
    values: Vec<f64>,
    probs: Vec<f64>,
    /// tails[k] = P(X >= values[k]) by suffix summation.
    tails: Vec<f64>,
}

impl Buyer {
    fn new(values: Vec<f64>, probs: Vec<f64>) -> Self {
        let mut tails = vec![0.0; values.len()];
        let mut acc = 0.0;
        for k in (0..values.len()).rev() {
            acc += probs[k];
            tails[k] = acc;
        }
        Buyer { values, probs, tails }
    }

    /// Revenue of posting values[k] to this buyer alone.
    fn posted(&self, k: usize) -> f64 {
        self.values[k] * self.tails[k]
    }
}

/// In-place max over supersets: out[m] = max over m' ⊇ m of in[m'].
fn superset_max(arr: &mut [f64], bits: usize) {
    for bit in 0..bits {
        let step = 1usize << bit;
        for mask in 0..arr.len() {
            if mask & step == 0 && arr[mask | step] > arr[mask] {
                arr[mask] = arr[mask | step];
            }
        }
    }
}

/// Maximum expected revenue over all deterministic DSIC + IR single-item
/// auctions for `d`. Limited to 3 buyers and 27 profiles; the runtime in
/// that range is dominated by a few thousand threshold structures per slab.
pub fn brute_force_opt(d: &ProductDistribution) -> Result<f64> {
    if d.n() > ORACLE_MAX_BUYERS {
        return Err(Error::invalid(format!(
            "oracle enumerates at most {ORACLE_MAX_BUYERS} buyers, got {}",
            d.n()
        )));
    }
    let cells = d.profile_count().unwrap_or(usize::MAX);
    if cells > ORACLE_MAX_CELLS {
        return Err(Error::InstanceTooLarge { cells, cap: ORACLE_MAX_CELLS });
    }

    // pad to three buyers with point masses at 0 (winning at price 0 is the
    // same as no sale), then make the largest support the slab axis: with
    // a·b·c ≤ 27 and a ≥ b ≥ c the grid has b·c ≤ 9 cells, so bitmasks stay
    // within 2^9
    let mut padded: Vec<Buyer> = d
        .buyers()
        .iter()
        .map(|b| Buyer::new(b.support().to_vec(), b.probs().to_vec()))
        .collect();
    while padded.len() < 3 {
        padded.push(Buyer::new(vec![0.0], vec![1.0]));
    }
    padded.sort_by(|x, y| y.values.len().cmp(&x.values.len()));
    let (slab, b2, b3) = {
        let mut it = padded.into_iter();
        (it.next().unwrap(), it.next().unwrap(), it.next().unwrap())
    };
    let bsz = b2.values.len();
    let csz = b3.values.len();
    let ncells = bsz * csz;
    debug_assert!(ncells <= 9);
    let full = (1usize << ncells) - 1;
    let cell = |i: usize, j: usize| j * bsz + i; // i indexes v2, j indexes v3

    // Best revenue from buyers 2 and 3 within one slab (before scaling by
    // the slab atom's probability), for every set of cells the slab buyer
    // claims. A structure is a threshold vector pair: buyer 2 wins row j at
    // v2 indices ≥ r[j], buyer 3 wins column i at v3 indices ≥ t[i]; no cell
    // may be claimed twice, and the slab buyer's cells must avoid both.
    let mut best23 = vec![f64::NEG_INFINITY; full + 1];
    let mut rvec = vec![0usize; csz]; // 0..=bsz each; bsz = row sells to nobody
    'rloop: loop {
        let mut tvec = vec![0usize; bsz];
        'tloop: loop {
            let mut ok = true;
            let mut free = 0usize;
            for j in 0..csz {
                for i in 0..bsz {
                    let is2 = i >= rvec[j];
                    let is3 = j >= tvec[i];
                    if is2 && is3 {
                        ok = false;
                    } else if !is2 && !is3 {
                        free |= 1 << cell(i, j);
                    }
                }
            }
            if ok {
                let mut rev = 0.0;
                for j in 0..csz {
                    if rvec[j] < bsz {
                        rev += b3.probs[j] * b2.posted(rvec[j]);
                    }
                }
                for i in 0..bsz {
                    if tvec[i] < csz {
                        rev += b2.probs[i] * b3.posted(tvec[i]);
                    }
                }
                if rev > best23[free] {
                    best23[free] = rev;
                }
            }
            // next threshold vector (mixed-radix increment)
            for i in 0..=bsz {
                if i == bsz {
                    break 'tloop;
                }
                tvec[i] += 1;
                if tvec[i] <= csz {
                    continue 'tloop;
                }
                tvec[i] = 0;
            }
        }
        for j in 0..=csz {
            if j == csz {
                break 'rloop;
            }
            rvec[j] += 1;
            if rvec[j] <= bsz {
                continue 'rloop;
            }
            rvec[j] = 0;
        }
    }
    // a slab-claimed mask is compatible with any structure leaving it free
    superset_max(&mut best23, ncells);

    // grid cell probabilities, for the slab buyer's revenue increments
    let mut prc = vec![0.0; ncells];
    for j in 0..csz {
        for i in 0..bsz {
            prc[cell(i, j)] = b2.probs[i] * b3.probs[j];
        }
    }

    // sweep slabs top-down; dp[mask] = best revenue from slabs above when
    // the previous slab claimed exactly `mask` for the slab buyer
    let asz = slab.values.len();
    let mut dp = vec![f64::NEG_INFINITY; full + 1];
    dp[full] = 0.0;
    let mut w1 = vec![0.0; full + 1];
    for k in (0..asz).rev() {
        // claiming a cell at slab k re-prices the slab buyer's threshold
        // there from values[k+1] down to values[k]; summed over the slabs a
        // cell stays claimed, the increments telescope to posted(k_lowest)
        let delta = slab.posted(k) - if k + 1 < asz { slab.posted(k + 1) } else { 0.0 };
        for mask in 1..=full {
            let low = mask.trailing_zeros() as usize;
            w1[mask] = w1[mask & (mask - 1)] + prc[low] * delta;
        }
        // current claim must be a subset of the previous one
        superset_max(&mut dp, ncells);
        for mask in 0..=full {
            dp[mask] += slab.probs[k] * best23[mask] + w1[mask];
        }
    }
    Ok(dp.iter().copied().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DiscreteDistribution;
    use crate::mechanisms::{build_myerson, expected_revenue_exact};
    use crate::rng::trial_rng;
    use rand::Rng;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn matches_hand_computed_optima() {
        let u12 = DiscreteDistribution::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let two = ProductDistribution::new(vec![u12.clone(), u12]).unwrap();
        assert!(close(brute_force_opt(&two).unwrap(), 1.5));

        let u123 = DiscreteDistribution::new(vec![1.0, 2.0, 3.0], vec![1.0 / 3.0; 3]).unwrap();
        let one = ProductDistribution::new(vec![u123]).unwrap();
        assert!(close(brute_force_opt(&one).unwrap(), 4.0 / 3.0));

        let pm = ProductDistribution::new(vec![DiscreteDistribution::point_mass(5.0).unwrap()])
            .unwrap();
        assert!(close(brute_force_opt(&pm).unwrap(), 5.0));
    }

    #[test]
    fn rejects_oversized_instances() {
        let values: Vec<f64> = (1..=28).map(|k| k as f64).collect();
        let big = ProductDistribution::new(vec![DiscreteDistribution::uniform_over(&values)
            .unwrap()])
        .unwrap();
        match brute_force_opt(&big) {
            Err(Error::InstanceTooLarge { cells: 28, cap: 27 }) => {}
            other => panic!("expected size error, got {other:?}"),
        }
    }

    fn random_instance(rng: &mut impl Rng, n: usize, max_atoms: usize) -> ProductDistribution {
        let buyers = (0..n)
            .map(|_| {
                let sz = 1 + rng.random_range(0..max_atoms);
                let mut values: Vec<f64> = Vec::new();
                while values.len() < sz {
                    let v = (rng.random_range(0..40) as f64) / 4.0;
                    if !values.contains(&v) {
                        values.push(v);
                    }
                }
                values.sort_by(f64::total_cmp);
                let mut probs: Vec<f64> = (0..sz).map(|_| rng.random::<f64>() + 0.05).collect();
                let s: f64 = probs.iter().sum();
                probs.iter_mut().for_each(|p| *p /= s);
                DiscreteDistribution::new(values, probs).unwrap()
            })
            .collect();
        ProductDistribution::new(buyers).unwrap()
    }

    #[test]
    fn agrees_with_myerson_engine_on_random_instances() {
        // a compact version of the acceptance-level equivalence sweep
        let mut rng = trial_rng(11, "oracle-vs-engine", 0);
        for _ in 0..60 {
            let n = 1 + rng.random_range(0..3);
            let d = random_instance(&mut rng, n, 3);
            let opt = brute_force_opt(&d).unwrap();
            let rev = expected_revenue_exact(&build_myerson(&d), &d).unwrap();
            assert!(
                (opt - rev).abs() < 1e-9,
                "oracle {opt} vs engine {rev} on {d:?}"
            );
        }
    }

    #[test]
    fn three_by_three_by_three_runs() {
        let mut rng = trial_rng(12, "oracle-full-size", 0);
        for _ in 0..10 {
            let buyers = (0..3)
                .map(|_| {
                    let mut values: Vec<f64> = Vec::new();
                    while values.len() < 3 {
                        let v = rng.random_range(1..30) as f64 / 3.0;
                        if !values.contains(&v) {
                            values.push(v);
                        }
                    }
                    values.sort_by(f64::total_cmp);
                    DiscreteDistribution::uniform_over(&values).unwrap()
                })
                .collect();
            let d = ProductDistribution::new(buyers).unwrap();
            let opt = brute_force_opt(&d).unwrap();
            let rev = expected_revenue_exact(&build_myerson(&d), &d).unwrap();
            assert!((opt - rev).abs() < 1e-9);
        }
    }
}
