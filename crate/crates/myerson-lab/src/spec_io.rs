//! JSON-facing instance descriptions for the command-line tools. A spec
//! names a distribution the way a config file would — either explicit atoms
//! or a closed-form family plus the atom count to discretize it at — and
//! this module turns it into the crate's exact finite types.
//!
//! Parsing reports the JSON path of the offending field, not just a line
//! number, so a bad entry inside `buyers[3]` of a config is named as such.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::distributions::{ContinuousFamily, DiscreteDistribution, ProductDistribution};
use crate::error::{Error, Result};
use crate::signals::SignalModel;

/// Atom count used when a closed-form family spec does not say how finely
/// to discretize.
pub const DEFAULT_FAMILY_ATOMS: usize = 50;

fn default_atoms() -> usize {
    DEFAULT_FAMILY_ATOMS
}

/// One buyer's distribution as written in a config file.
///
/// ```json
/// {"kind": "discrete", "support": [1.0, 2.0], "probs": [0.5, 0.5]}
/// {"kind": "uniform", "a": 0.0, "b": 100.0, "atoms": 10}
/// {"kind": "exponential", "rate": 1.0}
/// {"kind": "lb1", "c": 2.0}
/// {"kind": "lb2", "c": 1.0, "eps0": 0.2, "atoms": 200}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Discrete {
        support: Vec<f64>,
        probs: Vec<f64>,
    },
    Uniform {
        a: f64,
        b: f64,
        #[serde(default = "default_atoms")]
        atoms: usize,
    },
    Exponential {
        rate: f64,
        #[serde(default = "default_atoms")]
        atoms: usize,
    },
    Lb1 {
        c: f64,
        #[serde(default = "default_atoms")]
        atoms: usize,
    },
    Lb2 {
        c: f64,
        eps0: f64,
        #[serde(default = "default_atoms")]
        atoms: usize,
    },
}

impl DistributionSpec {
    /// The closed-form family behind this spec, if it has one (explicit
    /// atoms do not). Validates the family's parameters.
    pub fn family(&self) -> Result<Option<ContinuousFamily>> {
        Ok(match *self {
            DistributionSpec::Discrete { .. } => None,
            DistributionSpec::Uniform { a, b, .. } => Some(ContinuousFamily::uniform(a, b)?),
            DistributionSpec::Exponential { rate, .. } => {
                Some(ContinuousFamily::exponential(rate)?)
            }
            DistributionSpec::Lb1 { c, .. } => Some(ContinuousFamily::lb_type1(c)?),
            DistributionSpec::Lb2 { c, eps0, .. } => Some(ContinuousFamily::lb_type2(c, eps0)?),
        })
    }

    /// Finite view used wherever exact computation is needed: explicit
    /// atoms revalidate through the usual constructor; families discretize
    /// into their spec'd number of equal-mass quantile atoms.
    pub fn to_discrete(&self) -> Result<DiscreteDistribution> {
        match self {
            DistributionSpec::Discrete { support, probs } => {
                DiscreteDistribution::new(support.clone(), probs.clone())
            }
            DistributionSpec::Uniform { atoms, .. }
            | DistributionSpec::Exponential { atoms, .. }
            | DistributionSpec::Lb1 { atoms, .. }
            | DistributionSpec::Lb2 { atoms, .. } => {
                let family = self.family()?.expect("family specs carry a family");
                family.discretize(*atoms)
            }
        }
    }
}

/// A whole instance: either a single buyer's spec or `{"buyers": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSpec {
    Product { buyers: Vec<DistributionSpec> },
    Single(DistributionSpec),
}

impl InstanceSpec {
    pub fn buyer_specs(&self) -> &[DistributionSpec] {
        match self {
            InstanceSpec::Product { buyers } => buyers,
            InstanceSpec::Single(spec) => std::slice::from_ref(spec),
        }
    }

    pub fn to_product(&self) -> Result<ProductDistribution> {
        let buyers = self
            .buyer_specs()
            .iter()
            .map(DistributionSpec::to_discrete)
            .collect::<Result<Vec<_>>>()?;
        ProductDistribution::new(buyers)
    }
}

/// Deserializes `text` into `T`, naming the JSON path of the first offending
/// field (e.g. `buyers[1].rate`) in the error. `what` says which config is
/// being read.
pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            Error::invalid(format!("{what}: {}", e.inner()))
        } else {
            Error::invalid(format!("{what}: {} (at {path})", e.inner()))
        }
    })
}

/// Parses an instance config (single distribution or buyer list).
pub fn parse_instance(text: &str) -> Result<InstanceSpec> {
    // dispatch on the "buyers" key by hand: an untagged enum would reduce
    // every field error to "did not match any variant"
    let probe: serde_json::Value = parse_json(text, "instance spec")?;
    if probe.get("buyers").is_some() {
        let buyers = parse_json::<ProductSpecWire>(text, "instance spec")?.buyers;
        Ok(InstanceSpec::Product { buyers })
    } else {
        Ok(InstanceSpec::Single(parse_json(text, "instance spec")?))
    }
}

#[derive(Deserialize)]
struct ProductSpecWire {
    buyers: Vec<DistributionSpec>,
}

/// Parses a signal-model config. The JSON forms are
///
/// ```json
/// {"model": "constant", "conditional": {"family": "uniform", "a": 0.0, "b": 1.0}}
/// {"model": "atomic", "signals": [0.0, 1.0], "probs": [0.5, 0.5],
///  "conditionals": [{"support": [1.0], "probs": [1.0]},
///                   {"family": "lb1", "c": 2.0}]}
/// ```
///
/// Atomic models are revalidated (aligned lengths, ascending signal atoms
/// in [0,1], weights summing to one).
pub fn parse_signal_model(text: &str) -> Result<SignalModel> {
    match parse_json::<SignalModel>(text, "signal model")? {
        SignalModel::Constant { conditional } => Ok(SignalModel::constant(conditional)),
        SignalModel::Atomic { signals, probs, conditionals } => {
            SignalModel::atomic(signals, probs, conditionals)
        }
    }
}

/// Parses the inline lower-bound shorthand `lb:<eps>,<levels>,<bits>` (for
/// example `lb:0.05,3,0101`) into the hard signal instance with the given
/// type pattern: bit i chooses the heavy-tailed (0) or capped (1) conditional
/// at signal level i, and `bits` must have levels+1 digits.
pub fn parse_lb_arg(arg: &str) -> Result<SignalModel> {
    let body = arg
        .strip_prefix("lb:")
        .ok_or_else(|| Error::invalid(format!("expected lb:<eps>,<levels>,<bits>, got {arg:?}")))?;
    let parts: Vec<&str> = body.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::invalid(format!(
            "lb spec needs three comma-separated fields eps,levels,bits; got {} in {arg:?}",
            parts.len()
        )));
    }
    let eps: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("lb eps {:?} is not a number", parts[0])))?;
    let n_levels: usize = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("lb levels {:?} is not an integer", parts[1])))?;
    let bits = parts[2]
        .trim()
        .chars()
        .map(|ch| match ch {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::invalid(format!("lb bit {other:?} must be 0 or 1"))),
        })
        .collect::<Result<Vec<bool>>>()?;
    crate::signals::lower_bound_instance(eps, n_levels, &bits)
}

/// Parses a `--model` argument: the inline `lb:` shorthand, or JSON text of
/// a signal model (the CLI passes file contents through here).
pub fn parse_signal_model_arg(arg: &str) -> Result<SignalModel> {
    if arg.starts_with("lb:") {
        parse_lb_arg(arg)
    } else {
        parse_signal_model(arg)
    }
}
