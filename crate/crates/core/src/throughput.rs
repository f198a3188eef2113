//! n-horizon expected throughput per user subset.
//!
//! For a subset `I` (a bitmask over users) and horizon `n`,
//!
//! ```text
//! T_n(g_I) = (1/n) · E[ Σ_t ½·log₂(1 + Σ_{i∈I} g_it) ]
//! ```
//!
//! with batteries starting empty. Exact values come from forward
//! propagation of the battery-state distribution; [`exact_throughput_by_paths`]
//! walks every arrival sequence instead and is kept as an independent check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arrivals::ArrivalModel;
use crate::enumerate::{self, enumeration_budget, spends_into};
use crate::error::{Error, Result};
use crate::half_log2_1p;
use crate::policies::Policy;
use crate::regions::SetFunction;
use crate::rng::stream_rng;

/// Largest user count for which full `2^K` subset sweeps are attempted.
pub const MAX_SWEEP_USERS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    #[serde(rename = "mc", alias = "monte_carlo")]
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "mc",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "mc" | "monte_carlo" => Ok(Method::MonteCarlo),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputEstimate {
    /// Bits per channel use.
    pub value: f64,
    /// 95% confidence half-width; zero for exact values.
    pub half_width: f64,
    pub n: usize,
    /// Number of simulated paths, 1 for exact values.
    pub samples: usize,
    pub method: Method,
}

impl ThroughputEstimate {
    fn exact(value: f64, n: usize) -> Self {
        ThroughputEstimate {
            value: value.max(0.0),
            half_width: 0.0,
            n,
            samples: 1,
            method: Method::Exact,
        }
    }

    /// Standard error of the estimate (`half_width / 1.96`).
    pub fn standard_error(&self) -> f64 {
        self.half_width / Z_95
    }
}

const Z_95: f64 = 1.96;

/// Bitmask of the 0-based `users`.
pub fn subset_mask(users: &[usize]) -> usize {
    users.iter().fold(0, |m, &i| m | (1 << i))
}

fn check_mask(model: &ArrivalModel, mask: usize) -> Result<()> {
    if mask >> model.users() != 0 {
        return Err(Error::InvalidArgument(format!(
            "subset mask {mask:#b} names users beyond K = {}",
            model.users()
        )));
    }
    Ok(())
}

fn check_horizon(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    Ok(())
}

/// Fills `sums[mask] = Σ_{i∈mask} g_i` for every mask in `0..sums.len()`.
#[inline]
fn subset_sums(spends: &[f64], sums: &mut [f64]) {
    sums[0] = 0.0;
    for mask in 1..sums.len() {
        let low = mask.trailing_zeros() as usize;
        sums[mask] = sums[mask & (mask - 1)] + spends[low];
    }
}

/// Per-slot expectations of `reward(spends, out)` by state propagation.
/// Returns `n` rows of `outputs` values.
fn expected_per_slot<F>(
    model: &ArrivalModel,
    policies: &[Policy],
    n: usize,
    outputs: usize,
    mut reward: F,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut rows = vec![vec![0.0; outputs]; n];
    let mut buf = vec![0.0; outputs];
    enumerate::propagate(model, policies, n, enumeration_budget(), |t, spends, p| {
        reward(spends, &mut buf);
        for (acc, r) in rows[t].iter_mut().zip(&buf) {
            *acc += p * r;
        }
    })?;
    Ok(rows)
}

/// Expected per-slot throughput for every subset mask: `n` rows of `2^K`.
fn slot_throughput_all(
    model: &ArrivalModel,
    policies: &[Policy],
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    let size = 1usize << model.users();
    let mut sums = vec![0.0; size];
    expected_per_slot(model, policies, n, size, |spends, out| {
        subset_sums(spends, &mut sums);
        for (o, &s) in out.iter_mut().zip(&sums) {
            *o = half_log2_1p(s);
        }
    })
}

/// Exact `T_n(g_I)` for the subset `mask`.
pub fn exact_throughput(
    policies: &[Policy],
    model: &ArrivalModel,
    mask: usize,
    n: usize,
) -> Result<ThroughputEstimate> {
    check_horizon(n)?;
    check_mask(model, mask)?;
    enumerate::check_policies(model, policies)?;
    if mask == 0 {
        return Ok(ThroughputEstimate::exact(0.0, n));
    }
    let rows = expected_per_slot(model, policies, n, 1, |spends, out| {
        let s: f64 = (0..spends.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| spends[i])
            .sum();
        out[0] = half_log2_1p(s);
    })?;
    let total: f64 = rows.iter().map(|r| r[0]).sum();
    Ok(ThroughputEstimate::exact(total / n as f64, n))
}

/// Exact `T_n(g_I)` by walking all `|support|^n` arrival sequences in
/// lexicographic order.
pub fn exact_throughput_by_paths(
    policies: &[Policy],
    model: &ArrivalModel,
    mask: usize,
    n: usize,
) -> Result<ThroughputEstimate> {
    check_horizon(n)?;
    check_mask(model, mask)?;
    enumerate::check_path_budget(model, n, enumeration_budget())?;
    let k = model.users();
    let mut total = 0.0;
    enumerate::for_each_path(model, policies, n, 0..model.support().len(), |spends, p| {
        let path: f64 = spends
            .chunks(k)
            .map(|slot| {
                half_log2_1p(
                    (0..k)
                        .filter(|i| mask >> i & 1 == 1)
                        .map(|i| slot[i])
                        .sum(),
                )
            })
            .sum();
        total += p * path;
    })?;
    Ok(ThroughputEstimate::exact(total / n as f64, n))
}

/// `S_k = k · T_k` for every subset and every `k` in `0..=n_max`.
///
/// Each horizon starts from empty batteries, and the first `k` slots of a
/// longer run are exactly a horizon-`k` run, so one propagation serves all
/// prefixes. Rows are indexed by `k`, columns by subset mask.
pub fn cumulative_throughput(
    policies: &[Policy],
    model: &ArrivalModel,
    n_max: usize,
) -> Result<Vec<Vec<f64>>> {
    check_users(model)?;
    let rows = slot_throughput_all(model, policies, n_max)?;
    let size = 1usize << model.users();
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(vec![0.0; size]);
    for row in rows {
        let prev = out.last().expect("nonempty");
        let next = prev.iter().zip(&row).map(|(a, b)| a + b).collect();
        out.push(next);
    }
    Ok(out)
}

/// Monte Carlo `T_n(g_I)` from `paths` independently seeded trajectories.
///
/// Path `j` draws from stream `j` of `seed`; results do not depend on the
/// rayon worker count.
pub fn mc_throughput(
    policies: &[Policy],
    model: &ArrivalModel,
    mask: usize,
    n: usize,
    paths: usize,
    seed: u64,
) -> Result<ThroughputEstimate> {
    check_mask(model, mask)?;
    let all = mc_path_averages(policies, model, n, paths, seed, &[mask])?;
    let values: Vec<f64> = all.iter().map(|v| v[0]).collect();
    Ok(summarize(&values, n))
}

fn check_users(model: &ArrivalModel) -> Result<()> {
    if model.users() > MAX_SWEEP_USERS {
        return Err(Error::InvalidArgument(format!(
            "subset sweeps support at most {MAX_SWEEP_USERS} users, got {}",
            model.users()
        )));
    }
    Ok(())
}

/// Time-averaged throughput of each path for each of `masks`.
fn mc_path_averages(
    policies: &[Policy],
    model: &ArrivalModel,
    n: usize,
    paths: usize,
    seed: u64,
    masks: &[usize],
) -> Result<Vec<Vec<f64>>> {
    check_horizon(n)?;
    enumerate::check_policies(model, policies)?;
    if paths < 2 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs at least 2 paths, got {paths}"
        )));
    }
    let k = model.users();
    let caps = model.caps();
    let sampler = model.sampler();
    let members: Vec<Vec<usize>> = masks
        .iter()
        .map(|&m| (0..k).filter(|i| m >> i & 1 == 1).collect())
        .collect();
    (0..paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = stream_rng(seed, path as u64);
            let mut residual = vec![0.0; k];
            let mut levels = vec![0.0; k];
            let mut spends = vec![0.0; k];
            let mut acc = vec![0.0; masks.len()];
            for _ in 0..n {
                let arrivals = sampler.sample(&mut rng);
                for i in 0..k {
                    levels[i] = (residual[i] + arrivals[i]).min(caps[i]);
                }
                spends_into(policies, caps, &levels, &mut spends)?;
                for i in 0..k {
                    residual[i] = (levels[i] - spends[i]).max(0.0);
                }
                for (a, users) in acc.iter_mut().zip(&members) {
                    *a += half_log2_1p(users.iter().map(|&i| spends[i]).sum());
                }
            }
            Ok(acc.into_iter().map(|a| a / n as f64).collect())
        })
        .collect()
}

fn summarize(values: &[f64], n: usize) -> ThroughputEstimate {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    ThroughputEstimate {
        value: mean.max(0.0),
        half_width: Z_95 * (var / m).sqrt(),
        n,
        samples: values.len(),
        method: Method::MonteCarlo,
    }
}

/// How [`throughput_set_function`] evaluates each subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimator {
    pub method: Method,
    pub paths: usize,
    pub seed: u64,
}

impl Estimator {
    pub fn exact() -> Self {
        Estimator {
            method: Method::Exact,
            paths: 1,
            seed: 0,
        }
    }

    pub fn monte_carlo(paths: usize, seed: u64) -> Self {
        Estimator {
            method: Method::MonteCarlo,
            paths,
            seed,
        }
    }
}

/// Throughput over all `2^K` subsets together with per-subset half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct SetFunctionEstimate {
    pub values: SetFunction,
    pub half_widths: Vec<f64>,
    pub method: Method,
    pub n: usize,
}

/// `f(I) = T_n(g_I)` for every subset `I`, with `f(∅) = 0`.
///
/// Monte Carlo evaluation reuses the same paths for every subset.
pub fn throughput_set_function(
    policies: &[Policy],
    model: &ArrivalModel,
    n: usize,
    estimator: &Estimator,
) -> Result<SetFunctionEstimate> {
    check_users(model)?;
    check_horizon(n)?;
    let k = model.users();
    let size = 1usize << k;
    let (values, half_widths) = match estimator.method {
        Method::Exact => {
            let cumulative = cumulative_throughput(policies, model, n)?;
            let values: Vec<f64> = cumulative[n]
                .iter()
                .map(|s| (s / n as f64).max(0.0))
                .collect();
            (values, vec![0.0; size])
        }
        Method::MonteCarlo => {
            let masks: Vec<usize> = (0..size).collect();
            let per_path =
                mc_path_averages(policies, model, n, estimator.paths, estimator.seed, &masks)?;
            let mut values = vec![0.0; size];
            let mut hws = vec![0.0; size];
            for mask in 1..size {
                let column: Vec<f64> = per_path.iter().map(|p| p[mask]).collect();
                let est = summarize(&column, n);
                values[mask] = est.value;
                hws[mask] = est.half_width;
            }
            (values, hws)
        }
    };
    Ok(SetFunctionEstimate {
        values: SetFunction::new(k, values)?,
        half_widths,
        method: estimator.method,
        n,
    })
}

/// Both sides of the concavity split for subset `mask`:
/// `(T_n(g_I), Σ_{i∈I} λ_i · (1/n) E[Σ_t ½ log₂(1 + g_it / λ_i)])` with
/// `λ_i = E[E_i] / Σ_{j∈I} E[E_j]`.
pub fn concavity_split_sides(
    policies: &[Policy],
    model: &ArrivalModel,
    mask: usize,
    n: usize,
) -> Result<(f64, f64)> {
    check_horizon(n)?;
    check_mask(model, mask)?;
    if mask == 0 {
        return Ok((0.0, 0.0));
    }
    let k = model.users();
    let members: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
    let means = model.means();
    let total: f64 = members.iter().map(|&i| means[i]).sum();
    let lambdas: Vec<f64> = members.iter().map(|&i| means[i] / total).collect();

    let rows = expected_per_slot(model, policies, n, members.len() + 1, |spends, out| {
        out[0] = half_log2_1p(members.iter().map(|&i| spends[i]).sum());
        for (j, (&i, &lambda)) in members.iter().zip(&lambdas).enumerate() {
            out[j + 1] = half_log2_1p(spends[i] / lambda);
        }
    })?;
    let mut sums = vec![0.0; members.len() + 1];
    for row in &rows {
        for (s, r) in sums.iter_mut().zip(row) {
            *s += r;
        }
    }
    let lhs = sums[0] / n as f64;
    let rhs = lambdas
        .iter()
        .zip(&sums[1..])
        .map(|(lambda, s)| lambda * s / n as f64)
        .sum();
    Ok((lhs, rhs))
}

/// Whether the per-slot concavity split holds in expectation for `mask`.
pub fn concavity_split_check(
    policies: &[Policy],
    model: &ArrivalModel,
    mask: usize,
    n: usize,
) -> Result<bool> {
    let (lhs, rhs) = concavity_split_sides(policies, model, mask, n)?;
    Ok(lhs >= rhs - 1e-12)
}

/// `(n+m)·T_{n+m}(g_I) >= n·T_n(g_I) + m·T_m(g_I)` for every subset, each
/// horizon restarting from empty batteries.
pub fn supadditivity_check(
    policies: &[Policy],
    model: &ArrivalModel,
    n: usize,
    m: usize,
) -> Result<bool> {
    check_horizon(n)?;
    check_horizon(m)?;
    let s = cumulative_throughput(policies, model, n + m)?;
    Ok(s[n + m]
        .iter()
        .zip(&s[n])
        .zip(&s[m])
        .all(|((&long, &a), &b)| long >= a + b - 1e-9))
}
