//! Revenue curves in sale-probability space and the ironing construction.
//!
//! For a finite distribution, posting an atom v sells with probability
//! `s = P(X >= v)` and earns `R = v*s`. The curve of all (s, R) points plus
//! the origin need not be concave; its upper concave envelope is, and the
//! envelope's slope across an atom's sale-probability interval is the atom's
//! *ironed* value — the quantity the optimal mechanism actually ranks by.

use crate::distributions::DiscreteDistribution;

/// The raw revenue curve of one distribution, its concave envelope, and the
/// per-atom ironed values.
#[derive(Debug, Clone)]
pub struct RevenueCurve {
    /// (s, R) per atom in ascending s, prepended with (0, 0). Zero-mass atoms
    /// share their s with the next atom up; only the best R at each s is
    /// kept.
    breakpoints: Vec<(f64, f64)>,
    /// Vertices of the upper concave envelope, ascending s. A subset of
    /// `breakpoints` — the envelope touches the raw curve at every vertex.
    hull: Vec<(f64, f64)>,
    /// Ironed value per support atom, aligned with the distribution's
    /// (ascending) support. `NEG_INFINITY` marks a zero-mass atom sitting
    /// below all probability mass: no mechanism ever sells there.
    ironed_values: Vec<f64>,
}

impl RevenueCurve {
    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn hull(&self) -> &[(f64, f64)] {
        &self.hull
    }

    pub fn ironed_values(&self) -> &[f64] {
        &self.ironed_values
    }

    /// Envelope height at sale probability s (linear interpolation between
    /// vertices).
    pub fn hull_at(&self, s: f64) -> f64 {
        let idx = self.hull.partition_point(|v| v.0 < s).clamp(1, self.hull.len() - 1);
        let (s0, r0) = self.hull[idx - 1];
        let (s1, r1) = self.hull[idx];
        r0 + (r1 - r0) * (s - s0) / (s1 - s0)
    }
}

/// Builds the revenue curve of `d`, including the ironed value of every atom.
///
/// A positive-mass atom's ironed value is the envelope slope over its
/// interval `[P(X > v), P(X >= v)]`. A zero-mass atom has an empty interval
/// at `s = P(X >= v)`; it takes the envelope's right-derivative there (the
/// slope toward larger s), which makes it inherit the ironed value of the
/// next positive atom below it. That choice keeps the optimal mechanism
/// optimal: the zero-mass atom outranks that lower atom only by the value
/// tie-break, so threshold payments still land on the positive atom. A
/// zero-mass atom below all mass has no segment to its right and never sells.
pub fn revenue_curve(d: &DiscreteDistribution) -> RevenueCurve {
    let support = d.support();
    let probs = d.probs();
    let n = support.len();

    // raw points in ascending s = descending value, origin first; at equal s
    // (zero-mass atoms) keep the larger R
    let mut breakpoints: Vec<(f64, f64)> = Vec::with_capacity(n + 1);
    breakpoints.push((0.0, 0.0));
    for k in (0..n).rev() {
        let s = d.tail_at(k);
        let r = support[k] * s;
        match breakpoints.last_mut() {
            Some(last) if last.0 == s => last.1 = last.1.max(r),
            _ => breakpoints.push((s, r)),
        }
    }

    // upper concave envelope by monotone chain; pop middles that are on or
    // below the chord of their neighbors
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(breakpoints.len());
    for &p in &breakpoints {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    let slope = |j: usize| -> f64 {
        let (s0, r0) = hull[j];
        let (s1, r1) = hull[j + 1];
        (r1 - r0) / (s1 - s0)
    };
    let top_s = hull.last().unwrap().0;

    let mut ironed_values = Vec::with_capacity(n);
    for k in 0..n {
        let b = d.tail_at(k);
        if probs[k] > 0.0 {
            // the open interval (b - p, b) contains no hull vertex, so the
            // midpoint picks out the unique covering segment
            let a = b - probs[k];
            let mid = 0.5 * (a + b);
            let idx = hull.partition_point(|v| v.0 < mid).clamp(1, hull.len() - 1);
            ironed_values.push(slope(idx - 1));
        } else if b >= top_s {
            // zero-mass atom below the entire distribution
            ironed_values.push(f64::NEG_INFINITY);
        } else {
            // right-derivative: first segment reaching past s = b
            let idx = hull.partition_point(|v| v.0 <= b).min(hull.len() - 1);
            ironed_values.push(slope(idx - 1));
        }
    }

    RevenueCurve { breakpoints, hull, ironed_values }
}

/// Best posted price for a single buyer: the smallest support atom maximizing
/// `v * P(X >= v)`, returned with its revenue. Equals the largest breakpoint
/// revenue of the curve.
pub fn single_buyer_opt(d: &DiscreteDistribution) -> (f64, f64) {
    let mut best_price = d.support()[0];
    let mut best_rev = f64::NEG_INFINITY;
    for (k, &v) in d.support().iter().enumerate() {
        let rev = v * d.tail_at(k);
        if rev > best_rev {
            best_rev = rev;
            best_price = v;
        }
    }
    (best_price, best_rev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DiscreteDistribution;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn uniform_three_values_curve() {
        let d = DiscreteDistribution::new(vec![1.0, 2.0, 3.0], vec![1.0 / 3.0; 3]).unwrap();
        let rc = revenue_curve(&d);
        let bp = rc.breakpoints();
        assert_eq!(bp.len(), 4);
        assert!(close(bp[1].0, 1.0 / 3.0) && close(bp[1].1, 1.0));
        assert!(close(bp[2].0, 2.0 / 3.0) && close(bp[2].1, 4.0 / 3.0));
        assert!(close(bp[3].0, 1.0) && close(bp[3].1, 1.0));
        // already concave: the envelope keeps every point
        assert_eq!(rc.hull().len(), 4);
        let ir = rc.ironed_values();
        assert!(close(ir[0], -1.0) && close(ir[1], 1.0) && close(ir[2], 3.0));
        assert_eq!(single_buyer_opt(&d), (2.0, 4.0 / 3.0));
    }

    #[test]
    fn ironing_pools_the_middle_atom() {
        let d = DiscreteDistribution::new(vec![1.0, 2.0, 10.0], vec![0.9, 0.05, 0.05]).unwrap();
        let rc = revenue_curve(&d);
        // hull vertices: origin, the v=10 point, and the v=1 point; the v=2
        // point dips below the chord
        let h = rc.hull();
        assert_eq!(h.len(), 3);
        assert!(close(h[1].0, 0.05) && close(h[1].1, 0.5));
        assert!(close(h[2].0, 1.0) && close(h[2].1, 1.0));
        let ir = rc.ironed_values();
        assert!(close(ir[0], 10.0 / 19.0));
        assert!(close(ir[1], 10.0 / 19.0));
        assert!(close(ir[2], 10.0));
        let (p, r) = single_buyer_opt(&d);
        assert_eq!(p, 1.0);
        assert!(close(r, 1.0));
    }

    #[test]
    fn point_mass_curve() {
        let d = DiscreteDistribution::point_mass(5.0).unwrap();
        let rc = revenue_curve(&d);
        assert_eq!(rc.breakpoints(), &[(0.0, 0.0), (1.0, 5.0)]);
        assert!(close(rc.ironed_values()[0], 5.0));
        assert_eq!(single_buyer_opt(&d), (5.0, 5.0));
    }

    #[test]
    fn zero_mass_atom_below_all_mass_never_sells() {
        let d = DiscreteDistribution::new(vec![1.0, 2.0], vec![0.0, 1.0]).unwrap();
        let rc = revenue_curve(&d);
        assert_eq!(rc.ironed_values()[0], f64::NEG_INFINITY);
        assert!(close(rc.ironed_values()[1], 2.0));
    }

    #[test]
    fn zero_mass_atom_takes_right_derivative() {
        let d = DiscreteDistribution::new(vec![1.0, 1.5, 2.0], vec![0.5, 0.0, 0.5]).unwrap();
        let rc = revenue_curve(&d);
        let ir = rc.ironed_values();
        assert!(close(ir[0], 0.0)); // slope of the [1/2, 1] segment
        assert!(close(ir[1], 0.0)); // inherited from the atom below
        assert!(close(ir[2], 2.0));

        // zero-mass atom above all mass: empty interval at s = 0, first
        // segment's slope applies
        let d2 = DiscreteDistribution::new(vec![1.0, 5.0], vec![1.0, 0.0]).unwrap();
        let rc2 = revenue_curve(&d2);
        assert!(close(rc2.ironed_values()[1], 1.0));
        assert!(close(rc2.ironed_values()[0], 1.0));
    }

    #[test]
    fn hull_dominates_raw_curve() {
        let d = DiscreteDistribution::new(
            vec![0.5, 1.0, 2.0, 4.5, 9.0],
            vec![0.3, 0.25, 0.05, 0.25, 0.15],
        )
        .unwrap();
        let rc = revenue_curve(&d);
        for &(s, r) in rc.breakpoints() {
            assert!(rc.hull_at(s) >= r - 1e-12);
        }
        // slopes non-increasing across hull segments
        let h = rc.hull();
        for w in h.windows(3) {
            let s0 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            let s1 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
            assert!(s0 >= s1 - 1e-12);
        }
        // ironed values non-decreasing in value
        for w in rc.ironed_values().windows(2) {
            assert!(w[0] <= w[1] + 1e-12);
        }
    }
}
