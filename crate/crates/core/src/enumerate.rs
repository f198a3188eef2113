//! Exact expectation engines over arrival sequences.
//!
//! Two independent routes are provided:
//!
//! - [`for_each_path`] walks every arrival sequence in lexicographic order of
//!   support indices and reports the full spend history of each path.
//! - [`propagate`] pushes the distribution of post-spend battery residuals
//!   forward one slot at a time, merging residual vectors that agree to
//!   twelve decimals. Its cost grows with the number of distinct reachable
//!   battery states instead of `|support|^n`.
//!
//! Both start from empty batteries and share the slot convention of
//! [`crate::battery`]: the arrival is credited before the spend decision.

use std::collections::HashMap;

use crate::arrivals::ArrivalModel;
use crate::error::{Error, Result};
use crate::policies::Policy;
use crate::FLOAT_SLACK;

/// Default work budget for exact enumeration.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Environment variable overriding [`DEFAULT_BUDGET`].
pub const BUDGET_ENV_VAR: &str = "EHMAC_ENUM_BUDGET";

/// Current enumeration budget, honoring [`BUDGET_ENV_VAR`].
pub fn enumeration_budget() -> u64 {
    std::env::var(BUDGET_ENV_VAR)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_BUDGET)
}

/// Rounds an energy value to a 1e-12 grid for use in hash keys.
#[inline]
pub(crate) fn energy_key(x: f64) -> i128 {
    (x * 1e12).round() as i128
}

/// Spends for one slot given post-arrival levels, checking admissibility.
#[inline]
pub(crate) fn spends_into(
    policies: &[Policy],
    caps: &[f64],
    levels: &[f64],
    out: &mut [f64],
) -> Result<()> {
    for (i, ((policy, &cap), &level)) in policies.iter().zip(caps).zip(levels).enumerate() {
        let g = policy.allocate(level, cap);
        if !(g >= -FLOAT_SLACK && g <= level + FLOAT_SLACK) {
            return Err(Error::Overspend {
                user: i,
                spend: g,
                level,
            });
        }
        out[i] = g.clamp(0.0, level);
    }
    Ok(())
}

pub(crate) fn check_policies(model: &ArrivalModel, policies: &[Policy]) -> Result<()> {
    if policies.len() != model.users() {
        return Err(Error::DimensionMismatch {
            expected: model.users(),
            got: policies.len(),
        });
    }
    Ok(())
}

pub(crate) fn path_count(model: &ArrivalModel, n: usize) -> f64 {
    (model.support().len() as f64).powi(n as i32)
}

pub(crate) fn check_path_budget(model: &ArrivalModel, n: usize, budget: u64) -> Result<()> {
    let required = path_count(model, n);
    if required > budget as f64 {
        return Err(Error::BudgetExceeded { required, budget });
    }
    Ok(())
}

/// Calls `visit(first_index, spends, prob)` for every arrival sequence of
/// length `n` whose first support index is in `first`. `spends` is laid out
/// slot-major: `spends[t * K + i]`.
pub(crate) fn for_each_path<F>(
    model: &ArrivalModel,
    policies: &[Policy],
    n: usize,
    first: std::ops::Range<usize>,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(&[f64], f64),
{
    check_policies(model, policies)?;
    let k = model.users();
    if n == 0 {
        visit(&[], 1.0);
        return Ok(());
    }
    let mut walker = Walker {
        model,
        policies,
        n,
        k,
        spends: vec![0.0; n * k],
        levels: vec![0.0; k],
    };
    let residual = vec![0.0; k];
    for idx in first {
        walker.descend(0, idx, &residual, 1.0, &mut visit)?;
    }
    Ok(())
}

struct Walker<'a> {
    model: &'a ArrivalModel,
    policies: &'a [Policy],
    n: usize,
    k: usize,
    spends: Vec<f64>,
    levels: Vec<f64>,
}

impl Walker<'_> {
    fn descend<F>(
        &mut self,
        t: usize,
        idx: usize,
        residual: &[f64],
        prob: f64,
        visit: &mut F,
    ) -> Result<()>
    where
        F: FnMut(&[f64], f64),
    {
        let point = &self.model.support()[idx];
        let prob = prob * point.prob;
        let caps = self.model.caps();
        for i in 0..self.k {
            self.levels[i] = (residual[i] + point.energies[i]).min(caps[i]);
        }
        let slot = t * self.k..(t + 1) * self.k;
        spends_into(self.policies, caps, &self.levels, &mut self.spends[slot])?;
        if t + 1 == self.n {
            visit(&self.spends, prob);
            return Ok(());
        }
        let next: Vec<f64> = (0..self.k)
            .map(|i| (self.levels[i] - self.spends[t * self.k + i]).max(0.0))
            .collect();
        for j in 0..self.model.support().len() {
            self.descend(t + 1, j, &next, prob, visit)?;
        }
        Ok(())
    }
}

/// Forward propagation of the battery-state distribution.
///
/// `visit(t, spends, prob)` is called once per (merged state, support point)
/// pair at each slot `t` (0-based), with `prob` the probability of that
/// pair. `budget` caps the number of state-arrival transitions per slot.
pub(crate) fn propagate<F>(
    model: &ArrivalModel,
    policies: &[Policy],
    n: usize,
    budget: u64,
    mut visit: F,
) -> Result<usize>
where
    F: FnMut(usize, &[f64], f64),
{
    check_policies(model, policies)?;
    let k = model.users();
    let caps = model.caps();
    let support = model.support();

    let mut states: Vec<(Vec<f64>, f64)> = vec![(vec![0.0; k], 1.0)];
    let mut peak = 1;
    let mut levels = vec![0.0; k];
    let mut spends = vec![0.0; k];
    for t in 0..n {
        let work = (states.len() * support.len()) as f64;
        if work > budget as f64 {
            return Err(Error::BudgetExceeded {
                required: work,
                budget,
            });
        }
        let last = t + 1 == n;
        let mut index: HashMap<Vec<i128>, usize> = HashMap::new();
        let mut next: Vec<(Vec<f64>, f64)> = Vec::new();
        for (residual, p) in &states {
            for point in support {
                for i in 0..k {
                    levels[i] = (residual[i] + point.energies[i]).min(caps[i]);
                }
                spends_into(policies, caps, &levels, &mut spends)?;
                let prob = p * point.prob;
                visit(t, &spends, prob);
                if last {
                    continue;
                }
                let r: Vec<f64> = (0..k).map(|i| (levels[i] - spends[i]).max(0.0)).collect();
                let key: Vec<i128> = r.iter().map(|&x| energy_key(x)).collect();
                match index.get(&key) {
                    Some(&j) => next[j].1 += prob,
                    None => {
                        index.insert(key, next.len());
                        next.push((r, prob));
                    }
                }
            }
        }
        if !last {
            states = next;
            peak = peak.max(states.len());
        }
    }
    Ok(peak)
}
