//! Online power-control policies.
//!
//! Every built-in policy is a stationary function of the current
//! post-arrival battery level. All variants except [`Policy::Table`] are
//! admissible by construction; tables return their entries verbatim so that
//! an overspending table is caught by [`check_admissibility`] or by the
//! battery simulation.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arrivals::ArrivalModel;
use crate::enumerate::{self, energy_key, enumeration_budget};
use crate::error::{Error, Result};
use crate::FLOAT_SLACK;

/// A resolved power-control rule.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Spend `q · b` of the current level `b`.
    FixedFraction { q: f64 },
    /// Spend `min(c, b)`.
    Constant { c: f64 },
    /// Spend the whole battery.
    Greedy,
    /// `q · b` rounded down onto the `levels`-point grid of `[0, cap]`.
    QuantizedFixedFraction { q: f64, levels: usize },
    Table(TablePolicy),
}

/// Piecewise-constant spend table over battery levels.
///
/// A level `b` spends `spends[j]` for the largest `j` with
/// `thresholds[j] <= b`, and nothing below the first threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablePolicy {
    thresholds: Vec<f64>,
    spends: Vec<f64>,
}

impl TablePolicy {
    pub fn new(thresholds: Vec<f64>, spends: Vec<f64>) -> Result<Self> {
        if thresholds.len() != spends.len() {
            return Err(Error::DimensionMismatch {
                expected: thresholds.len(),
                got: spends.len(),
            });
        }
        if thresholds.is_empty() {
            return Err(Error::InvalidPolicy("empty table".into()));
        }
        if thresholds.iter().chain(&spends).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidPolicy(
                "table entries must be finite and nonnegative".into(),
            ));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPolicy(
                "table thresholds must be strictly increasing".into(),
            ));
        }
        Ok(TablePolicy { thresholds, spends })
    }

    /// A random table on the `points`-point grid of `[0, cap]` that never
    /// spends more than its threshold, hence never more than the level.
    pub fn random_admissible<R: Rng + ?Sized>(rng: &mut R, cap: f64, points: usize) -> Self {
        let points = points.max(2);
        let thresholds: Vec<f64> = (0..points)
            .map(|j| cap * j as f64 / (points - 1) as f64)
            .collect();
        let spends = thresholds
            .iter()
            .map(|&b| b * rng.random::<f64>())
            .collect();
        TablePolicy { thresholds, spends }
    }

    pub fn lookup(&self, level: f64) -> f64 {
        let j = self
            .thresholds
            .partition_point(|&th| th <= level + FLOAT_SLACK);
        if j == 0 {
            0.0
        } else {
            self.spends[j - 1]
        }
    }
}

/// `q = E[E] / B̄`, the spend ratio of the fixed-fraction policy.
pub fn fixed_fraction_rate(mean_arrival: f64, cap: f64) -> Result<f64> {
    // E[E] is a float sum, so a point mass at the cap may land one ulp above it.
    if !(mean_arrival > 0.0) || !(cap > 0.0) || mean_arrival > cap * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "fixed-fraction rate needs 0 < E[E] <= cap, got E[E] = {mean_arrival}, cap = {cap}"
        )));
    }
    Ok((mean_arrival / cap).min(1.0))
}

impl Policy {
    pub fn fixed_fraction(q: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidPolicy(format!(
                "fixed-fraction ratio must lie in (0, 1], got {q}"
            )));
        }
        Ok(Policy::FixedFraction { q })
    }

    /// Fixed-fraction policy with `q = E[E_i] / B̄_i` for `user` of `model`.
    pub fn fixed_fraction_for(model: &ArrivalModel, user: usize) -> Result<Self> {
        let q = fixed_fraction_rate(model.mean_arrival(user)?, model.cap(user)?)?;
        Self::fixed_fraction(q)
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::InvalidPolicy(format!("constant spend must be >= 0, got {c}")));
        }
        Ok(Policy::Constant { c })
    }

    pub fn quantized_fixed_fraction(q: f64, levels: usize) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidPolicy(format!(
                "fixed-fraction ratio must lie in (0, 1], got {q}"
            )));
        }
        if levels < 2 {
            return Err(Error::InvalidPolicy(format!(
                "quantized policy needs at least 2 levels, got {levels}"
            )));
        }
        Ok(Policy::QuantizedFixedFraction { q, levels })
    }

    pub fn table(thresholds: Vec<f64>, spends: Vec<f64>) -> Result<Self> {
        TablePolicy::new(thresholds, spends).map(Policy::Table)
    }

    /// Energy spent at post-arrival level `level` for a battery of size `cap`.
    pub fn allocate(&self, level: f64, cap: f64) -> f64 {
        match self {
            Policy::FixedFraction { q } => q * level,
            Policy::Constant { c } => c.min(level),
            Policy::Greedy => level,
            Policy::QuantizedFixedFraction { q, levels } => {
                let step = cap / (*levels - 1) as f64;
                let k = ((q * level) / step + FLOAT_SLACK).floor();
                (k * step).min(level)
            }
            Policy::Table(table) => table.lookup(level),
        }
    }
}

/// JSON form of a policy; `q` defaults to `E[E_i] / B̄_i` when omitted.
///
/// ```json
/// {"variant": "fixed_fraction"}
/// {"variant": "quantized_fixed_fraction", "levels": 2}
/// {"variant": "table", "thresholds": [0, 0.5, 1], "spends": [0, 0.25, 0.5]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PolicySpec {
    FixedFraction {
        #[serde(default)]
        q: Option<f64>,
    },
    Constant {
        c: f64,
    },
    Greedy,
    QuantizedFixedFraction {
        #[serde(default)]
        q: Option<f64>,
        levels: usize,
    },
    Table {
        thresholds: Vec<f64>,
        spends: Vec<f64>,
    },
}

impl PolicySpec {
    pub fn resolve(&self, model: &ArrivalModel, user: usize) -> Result<Policy> {
        let default_q = || fixed_fraction_rate(model.mean_arrival(user)?, model.cap(user)?);
        match self {
            PolicySpec::FixedFraction { q } => Policy::fixed_fraction(match q {
                Some(q) => *q,
                None => default_q()?,
            }),
            PolicySpec::Constant { c } => Policy::constant(*c),
            PolicySpec::Greedy => Ok(Policy::Greedy),
            PolicySpec::QuantizedFixedFraction { q, levels } => Policy::quantized_fixed_fraction(
                match q {
                    Some(q) => *q,
                    None => default_q()?,
                },
                *levels,
            ),
            PolicySpec::Table { thresholds, spends } => {
                Policy::table(thresholds.clone(), spends.clone())
            }
        }
    }
}

/// Whether `policy`, run by `user`, never overspends over any length-`n`
/// arrival sequence of that user's marginal alphabet.
///
/// Explores every reachable (battery level, arrival) pair slot by slot,
/// which covers the same cases as walking all `|ε_i|^n` sequences.
pub fn check_admissibility(
    policy: &Policy,
    model: &ArrivalModel,
    user: usize,
    n: usize,
) -> Result<bool> {
    let marginal = model.marginal(user)?;
    let result = enumerate::propagate(
        &marginal,
        std::slice::from_ref(policy),
        n,
        enumeration_budget(),
        |_, _, _| {},
    );
    match result {
        Ok(_) => Ok(true),
        Err(Error::Overspend { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// `H(G_1^n, …, G_K^n) / n` in bits: the exact entropy rate of the joint
/// spend sequences, by enumeration of every arrival sequence.
///
/// Spend values are rounded to twelve decimals before being aggregated.
pub fn exact_output_entropy(policies: &[Policy], model: &ArrivalModel, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    enumerate::check_policies(model, policies)?;
    enumerate::check_path_budget(model, n, enumeration_budget())?;

    let parts: Vec<HashMap<Vec<i128>, f64>> = (0..model.support().len())
        .into_par_iter()
        .map(|first| {
            let mut mass: HashMap<Vec<i128>, f64> = HashMap::new();
            enumerate::for_each_path(model, policies, n, first..first + 1, |spends, p| {
                let key = spends.iter().map(|&g| energy_key(g)).collect();
                *mass.entry(key).or_insert(0.0) += p;
            })
            .map(|_| mass)
        })
        .collect::<Result<_>>()?;

    let mut parts = parts.into_iter();
    let mut mass = parts.next().unwrap_or_default();
    for part in parts {
        let mut entries: Vec<_> = part.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for (key, p) in entries {
            *mass.entry(key).or_insert(0.0) += p;
        }
    }
    let mut probs: Vec<f64> = mass.into_values().collect();
    probs.sort_by(|a, b| a.total_cmp(b));
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    Ok(h.max(0.0) / n as f64)
}
