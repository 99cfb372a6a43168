//! The signals model: each buyer draws an iid (value, signal) pair, the
//! seller sees only the signals, and conditional value distributions grow —
//! in the stochastic-dominance order — with the signal.
//!
//! The learners here never touch the conditionals directly: they work from a
//! pool of sampled pairs, taking for each buyer the window of samples whose
//! signals sit immediately below that buyer's observed signal. The exact
//! conditionals are used only by verification baselines (clairvoyant optima,
//! dominance checks) and by the hard-instance generator
//! [`lower_bound_instance`].

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{ContinuousFamily, DiscreteDistribution, ProductDistribution};
use crate::error::{Error, Result};
use crate::learning::{build_value_grid, srev_estimate, GridKind, LearnedMechanism};
use crate::mechanisms::{build_myerson, expected_revenue_exact};

/// Grid size used when a continuous conditional has to be made finite for an
/// exact per-profile optimum.
pub const CONDITIONAL_GRID: usize = 50;

/// One buyer's draw: a value and the signal the seller gets to see.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSample {
    pub value: f64,
    pub signal: f64,
}

/// A conditional value distribution: closed-form family or explicit atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Conditional {
    Family(ContinuousFamily),
    Discrete(DiscreteDistribution),
}

impl Conditional {
    pub fn cdf(&self, v: f64) -> f64 {
        match self {
            Conditional::Family(f) => f.cdf(v),
            Conditional::Discrete(d) => d.cdf(v),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            Conditional::Family(f) => f.sample(rng),
            Conditional::Discrete(d) => d.sample(rng),
        }
    }

    /// Finite view: families are discretized at `grid` quantile atoms,
    /// explicit atoms pass through unchanged.
    pub fn discretized(&self, grid: usize) -> Result<DiscreteDistribution> {
        match self {
            Conditional::Family(f) => f.discretize(grid),
            Conditional::Discrete(d) => Ok(d.clone()),
        }
    }
}

/// Joint distribution of (value, signal) pairs: a marginal over signals in
/// [0,1] plus one conditional per signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SignalModel {
    /// Signals uniform on [0,1], values independent of them — the model
    /// where windowing loses nothing.
    Constant { conditional: Conditional },
    /// Finitely many signal atoms, ascending in [0,1], each with its own
    /// conditional. `conditional(σ)` for σ between atoms is the nearest atom
    /// at or below (a step family).
    Atomic {
        signals: Vec<f64>,
        probs: Vec<f64>,
        conditionals: Vec<Conditional>,
    },
}

impl SignalModel {
    pub fn constant(conditional: Conditional) -> Self {
        SignalModel::Constant { conditional }
    }

    pub fn atomic(
        signals: Vec<f64>,
        probs: Vec<f64>,
        conditionals: Vec<Conditional>,
    ) -> Result<Self> {
        if signals.is_empty() || signals.len() != probs.len() || signals.len() != conditionals.len()
        {
            return Err(Error::invalid("signal atoms, weights, and conditionals must align"));
        }
        if signals.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
            return Err(Error::invalid("signal atoms must lie in [0,1]"));
        }
        if signals.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("signal atoms must be strictly ascending"));
        }
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > crate::PROB_TOL {
            return Err(Error::invalid(format!("signal weights sum to {total}, expected 1")));
        }
        Ok(SignalModel::Atomic { signals, probs, conditionals })
    }

    /// CDF of the signal marginal.
    pub fn marginal_cdf(&self, sigma: f64) -> f64 {
        match self {
            SignalModel::Constant { .. } => sigma.clamp(0.0, 1.0),
            SignalModel::Atomic { signals, probs, .. } => {
                let idx = signals.partition_point(|&s| s <= sigma);
                probs[..idx].iter().sum()
            }
        }
    }

    fn conditional_index(&self, sigma: f64) -> usize {
        match self {
            SignalModel::Constant { .. } => 0,
            SignalModel::Atomic { signals, .. } => {
                signals.partition_point(|&s| s <= sigma).saturating_sub(1)
            }
        }
    }

    pub fn conditional_at(&self, sigma: f64) -> &Conditional {
        match self {
            SignalModel::Constant { conditional } => conditional,
            SignalModel::Atomic { conditionals, .. } => {
                &conditionals[self.conditional_index(sigma)]
            }
        }
    }

    pub fn sample_signal(&self, rng: &mut impl Rng) -> f64 {
        match self {
            SignalModel::Constant { .. } => rng.random(),
            SignalModel::Atomic { signals, probs, .. } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (s, p) in signals.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *s;
                    }
                }
                *signals.last().unwrap()
            }
        }
    }

    pub fn sample_pair(&self, rng: &mut impl Rng) -> SignalSample {
        let signal = self.sample_signal(rng);
        let value = self.conditional_at(signal).sample(rng);
        SignalSample { value, signal }
    }

    /// Checks the model's defining assumption — higher signals carry
    /// dominating conditionals — on every adjacent signal pair (atomic) or
    /// trivially (constant), through `grid`-atom discretizations.
    pub fn dominance_holds(&self, grid: usize) -> Result<bool> {
        match self {
            SignalModel::Constant { .. } => Ok(true),
            SignalModel::Atomic { conditionals, .. } => {
                for pair in conditionals.windows(2) {
                    let lower = pair[0].discretized(grid)?;
                    let upper = pair[1].discretized(grid)?;
                    if !upper.dominates(&lower) {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
}

/// Draws m pairs and sorts them by signal descending — the layout the
/// windowed learners expect.
pub fn draw_signal_samples(
    model: &SignalModel,
    m: usize,
    rng: &mut impl Rng,
) -> Vec<SignalSample> {
    let mut samples: Vec<SignalSample> = (0..m).map(|_| model.sample_pair(rng)).collect();
    samples.sort_by(|a, b| b.signal.total_cmp(&a.signal));
    samples
}

fn require_signal_sorted(samples: &[SignalSample]) -> Result<()> {
    if samples.windows(2).any(|w| w[0].signal < w[1].signal) {
        return Err(Error::invalid("samples must be sorted by signal, descending"));
    }
    Ok(())
}

/// The guarded empirical reserve: the revenue-maximizing sampled price whose
/// value rank is at least ⌈εℓ⌉ — the top ⌈εℓ⌉−1 values are too rare to
/// trust as prices. Ties resolve to the smaller price.
pub fn guarded_reserve_price(values: &[f64], eps: f64) -> Result<f64> {
    let l = values.len();
    if l == 0 {
        return Err(Error::invalid("guarded reserve needs at least one value"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("eps {eps} must lie in (0,1)")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let first_rank = (eps * l as f64).ceil().max(1.0) as usize;
    let mut best_rev = f64::NEG_INFINITY;
    let mut best_price = sorted[l - 1];
    // scan ranks ℓ down to ⌈εℓ⌉ — ascending prices — so strict improvement
    // keeps the smaller price on revenue ties
    for j in (first_rank..=l).rev() {
        let v = sorted[j - 1];
        let count = sorted.partition_point(|&x| x >= v);
        let rev = v * count as f64;
        if rev > best_rev {
            best_rev = rev;
            best_price = v;
        }
    }
    Ok(best_price)
}

/// Window budget of the single-agent learner at this accuracy.
pub fn single_agent_window_budget(eps: f64, constant_scale: f64) -> usize {
    (constant_scale / eps.powi(3) * (1.0 / eps).ln()).ceil().max(1.0) as usize
}

/// Prices a single buyer from their signal: guarded reserve over the window
/// of (up to the budget) samples with signals immediately below σ. Returns
/// infinity — "no sale" — when no sample signal lies at or below σ.
pub fn single_agent_signal_price(
    samples: &[SignalSample],
    sigma: f64,
    eps: f64,
    constant_scale: f64,
) -> Result<f64> {
    require_signal_sorted(samples)?;
    let k = samples.partition_point(|s| s.signal > sigma);
    if k == samples.len() {
        return Ok(f64::INFINITY);
    }
    let budget = single_agent_window_budget(eps, constant_scale);
    let window: Vec<f64> =
        samples[k..(k + budget).min(samples.len())].iter().map(|s| s.value).collect();
    guarded_reserve_price(&window, eps)
}

/// Window size of the multi-agent learner: Θ(n²/ε⁴ · log²(n/ε)) scaled.
pub fn multi_agent_window_size(n: usize, eps: f64, constant_scale: f64) -> usize {
    let nf = n as f64;
    let l = constant_scale * nf * nf / eps.powi(4) * (nf / eps).ln().powi(2);
    (l.ceil() as usize).max(2)
}

/// The multi-agent signal auction: per buyer, the ℓ nearest-below sample
/// window yields a guarded revenue estimate SRev_i; their sum anchors a
/// geometric grid from (2/ε)·Apx down to (ε/n²)·Apx; window values round
/// down to the grid, and the Myerson construction runs on the rounded
/// empirical product. Windows of nearby signals may overlap — each buyer's
/// window is taken independently.
pub fn multi_agent_signal_auction(
    samples: &[SignalSample],
    signals: &[f64],
    eps: f64,
    constant_scale: f64,
) -> Result<LearnedMechanism> {
    require_signal_sorted(samples)?;
    let n = signals.len();
    if n == 0 {
        return Err(Error::invalid("need at least one buyer signal"));
    }
    let l = multi_agent_window_size(n, eps, constant_scale);
    let mut windows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (i, &sigma) in signals.iter().enumerate() {
        let k = samples.partition_point(|s| s.signal > sigma);
        let available = samples.len() - k;
        if available < l {
            return Err(Error::InsufficientSamples {
                required: l,
                available,
                context: format!("window below signal {sigma} of buyer {i}"),
            });
        }
        windows.push(samples[k..k + l].iter().map(|s| s.value).collect());
    }
    let mut apx = 0.0;
    for w in &windows {
        apx += srev_estimate(w)?;
    }
    if !(apx > 0.0) {
        return Err(Error::invalid("every window revenue estimate is zero; nothing to price"));
    }
    let grid = build_value_grid(apx, eps, n, GridKind::Signal)?;
    let mut buyers = Vec::with_capacity(n);
    for (i, w) in windows.iter().enumerate() {
        let rounded = w
            .iter()
            .map(|&v| {
                grid.floor(v).ok_or_else(|| {
                    Error::invalid(format!("buyer {i} window value {v} lies below the grid"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        buyers.push(
            DiscreteDistribution::empirical_from(&rounded)?.with_zero_atoms(grid.values())?,
        );
    }
    let mechanism = build_myerson(&ProductDistribution::new(buyers)?);
    Ok(LearnedMechanism { mechanism, grid: Some(grid), apx: Some(apx) })
}

/// Per-trial (max marginal CDF over the n signals, exact optimum of the
/// discretized conditional product). Profile optima are memoized per
/// conditional-index tuple: atomic models revisit the same few products.
fn profile_opts(
    model: &SignalModel,
    n: usize,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(f64, f64)>> {
    let mut disc_cache: BTreeMap<usize, DiscreteDistribution> = BTreeMap::new();
    let mut opt_cache: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let sigmas: Vec<f64> = (0..n).map(|_| model.sample_signal(rng)).collect();
        let fmax =
            sigmas.iter().map(|&s| model.marginal_cdf(s)).fold(f64::NEG_INFINITY, f64::max);
        let key: Vec<usize> = sigmas.iter().map(|&s| model.conditional_index(s)).collect();
        let opt = match opt_cache.get(&key) {
            Some(&v) => v,
            None => {
                let mut buyers = Vec::with_capacity(n);
                for &idx in &key {
                    if !disc_cache.contains_key(&idx) {
                        let sigma_for = match model {
                            SignalModel::Constant { .. } => 0.0,
                            SignalModel::Atomic { signals, .. } => signals[idx],
                        };
                        let d = model
                            .conditional_at(sigma_for)
                            .discretized(CONDITIONAL_GRID)?;
                        disc_cache.insert(idx, d);
                    }
                    buyers.push(disc_cache[&idx].clone());
                }
                let prod = ProductDistribution::new(buyers)?;
                let opt = expected_revenue_exact(&build_myerson(&prod), &prod)?;
                opt_cache.insert(key, opt);
                opt
            }
        };
        out.push((fmax, opt));
    }
    Ok(out)
}

/// Monte Carlo estimate of the clairvoyant benchmark
/// E[Opt(D^σ1 × ⋯ × D^σn)], with its standard error.
pub fn opt_signals_estimate(
    model: &SignalModel,
    n: usize,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::invalid("opt_signals_estimate needs at least one trial"));
    }
    let opts = profile_opts(model, n, trials, rng)?;
    let mean = opts.iter().map(|&(_, o)| o).sum::<f64>() / trials as f64;
    let stderr = if trials > 1 {
        let var = opts.iter().map(|&(_, o)| (o - mean) * (o - mean)).sum::<f64>()
            / (trials as f64 - 1.0);
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr))
}

/// Estimates how much top signal mass is droppable: the largest q on a
/// 1/100 grid such that profiles whose signals all avoid the top q of
/// marginal mass still carry a (1−ε) fraction of the clairvoyant benchmark.
pub fn q_tail_estimate(
    model: &SignalModel,
    eps: f64,
    n: usize,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    if trials < 100 {
        return Err(Error::InsufficientSamples {
            required: 100,
            available: trials,
            context: "q_tail_estimate".into(),
        });
    }
    let opts = profile_opts(model, n, trials, rng)?;
    let total: f64 = opts.iter().map(|&(_, o)| o).sum();
    let target = (1.0 - eps) * total;
    let mut best = 0.0;
    for k in 0..=100 {
        let q = k as f64 / 100.0;
        let kept: f64 =
            opts.iter().filter(|&&(fmax, _)| fmax <= 1.0 - q + 1e-12).map(|&(_, o)| o).sum();
        if kept >= target - 1e-12 {
            best = q;
        }
    }
    Ok(best)
}

/// The hard instance family: N+1 signal atoms at i/N, conditional i a
/// scale-c_i heavy-tail distribution with c_i = (1−2ε₀)^{−2i}, ε₀ = 9ε, in
/// one of two variants per the choice bits (the variants are near
/// indistinguishable from samples but have optima c_i vs c_i(1−2ε₀)).
/// Marginal weights p_i ∝ 1/c_i make every signal contribute equal revenue.
pub fn lower_bound_instance(eps: f64, n_levels: usize, bits: &[bool]) -> Result<SignalModel> {
    if !(eps > 0.0 && eps < 1.0 / 18.0) {
        return Err(Error::invalid(format!(
            "eps {eps} must lie in (0, 1/18) so that ε0 = 9ε keeps 1-2ε0 positive"
        )));
    }
    if n_levels < 1 {
        return Err(Error::invalid("need at least one level (N ≥ 1)"));
    }
    if bits.len() != n_levels + 1 {
        return Err(Error::invalid(format!(
            "need {} choice bits, got {}",
            n_levels + 1,
            bits.len()
        )));
    }
    let eps0 = 9.0 * eps;
    let w = 1.0 - 2.0 * eps0;
    let cs: Vec<f64> = (0..=n_levels).map(|i| w.powi(-2 * i as i32)).collect();
    let gamma = 1.0 / cs.iter().map(|c| 1.0 / c).sum::<f64>();
    let probs: Vec<f64> = cs.iter().map(|c| gamma / c).collect();
    let signals: Vec<f64> = (0..=n_levels).map(|i| i as f64 / n_levels as f64).collect();
    let conditionals = cs
        .iter()
        .zip(bits)
        .map(|(&c, &second)| {
            Ok(Conditional::Family(if second {
                ContinuousFamily::lb_type2(c, eps0)?
            } else {
                ContinuousFamily::lb_type1(c)?
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    SignalModel::atomic(signals, probs, conditionals)
}
