//! Joint energy arrival processes over finite alphabets.
//!
//! Arrivals are i.i.d. across time with an arbitrary joint law across the
//! `K` transmitters. Values above a user's battery capacity are truncated to
//! the capacity on construction (excess energy cannot be stored), and support
//! points closer than [`MERGE_TOLERANCE`] are merged.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Support points closer than this are treated as one energy value.
pub const MERGE_TOLERANCE: f64 = 1e-12;

const PMF_SUM_TOLERANCE: f64 = 1e-9;

/// A finite probability mass function as `(value, probability)` pairs.
///
/// Serialized as a JSON array of `[value, probability]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pmf(pub Vec<(f64, f64)>);

impl Pmf {
    pub fn new(pairs: Vec<(f64, f64)>) -> Self {
        Pmf(pairs)
    }

    /// Point mass at `value`.
    pub fn point(value: f64) -> Self {
        Pmf(vec![(value, 1.0)])
    }

    /// `high` with probability `p`, zero otherwise.
    pub fn bernoulli(p: f64, high: f64) -> Self {
        Pmf(vec![(0.0, 1.0 - p), (high, p)])
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().map(|&(v, p)| v * p).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidModel("empty alphabet".into()));
        }
        let mut total = 0.0;
        for &(v, p) in &self.0 {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "negative or non-finite support value {v}"
                )));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidModel(format!("invalid probability {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > PMF_SUM_TOLERANCE {
            return Err(Error::InvalidModel(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(())
    }
}

/// One element of the product alphabet with positive mass.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPoint {
    pub energies: Vec<f64>,
    pub prob: f64,
}

/// Joint per-slot arrival distribution for `K` users plus their battery caps.
///
/// Immutable after construction. Only support points with positive mass are
/// stored, in lexicographic order of their per-user alphabet indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalModel {
    caps: Vec<f64>,
    alphabets: Vec<Vec<f64>>,
    support: Vec<JointPoint>,
}

impl ArrivalModel {
    /// Independent users with the given marginals.
    pub fn build_iid_product(marginals: &[Pmf], caps: &[f64]) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidModel("no users".into()));
        }
        if marginals.len() != caps.len() {
            return Err(Error::DimensionMismatch {
                expected: marginals.len(),
                got: caps.len(),
            });
        }
        for m in marginals {
            m.validate()?;
        }
        let mut points = vec![(Vec::with_capacity(marginals.len()), 1.0)];
        for m in marginals {
            let mut next = Vec::with_capacity(points.len() * m.0.len());
            for (prefix, p) in &points {
                for &(v, q) in &m.0 {
                    let mut e = prefix.clone();
                    e.push(v);
                    next.push((e, p * q));
                }
            }
            points = next;
        }
        Self::from_points(points, caps.to_vec())
    }

    /// All users see the same arrival `E_1 = … = E_K = E`.
    pub fn build_fully_correlated(marginal: &Pmf, users: usize, cap: f64) -> Result<Self> {
        if users == 0 {
            return Err(Error::InvalidModel("no users".into()));
        }
        marginal.validate()?;
        let points = marginal
            .0
            .iter()
            .map(|&(v, p)| (vec![v; users], p))
            .collect();
        Self::from_points(points, vec![cap; users])
    }

    /// Arbitrary joint pmf given as `(energies, probability)` entries.
    pub fn build_joint(points: Vec<(Vec<f64>, f64)>, caps: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidModel("empty alphabet".into()));
        }
        let mut total = 0.0;
        for (e, p) in &points {
            if e.len() != caps.len() {
                return Err(Error::DimensionMismatch {
                    expected: caps.len(),
                    got: e.len(),
                });
            }
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::InvalidModel(format!("invalid probability {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > PMF_SUM_TOLERANCE {
            return Err(Error::InvalidModel(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Self::from_points(points, caps.to_vec())
    }

    fn from_points(points: Vec<(Vec<f64>, f64)>, caps: Vec<f64>) -> Result<Self> {
        let users = caps.len();
        if users == 0 {
            return Err(Error::InvalidModel("no users".into()));
        }
        for (i, &c) in caps.iter().enumerate() {
            if !c.is_finite() || c <= 0.0 {
                return Err(Error::InvalidModel(format!(
                    "battery capacity of user {i} must be positive, got {c}"
                )));
            }
        }

        // Truncate to the caps, then snap every coordinate onto a merged
        // per-user alphabet.
        let mut raw: Vec<Vec<f64>> = vec![Vec::new(); users];
        let mut truncated = Vec::with_capacity(points.len());
        for (e, p) in points {
            let mut t = Vec::with_capacity(users);
            for (i, &v) in e.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "negative or non-finite support value {v} for user {i}"
                    )));
                }
                let v = v.min(caps[i]);
                raw[i].push(v);
                t.push(v);
            }
            truncated.push((t, p));
        }
        let merged: Vec<Vec<f64>> = raw.into_iter().map(merge_values).collect();

        let mut mass: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (e, p) in truncated {
            if p <= 0.0 {
                continue;
            }
            let key: Vec<usize> = e
                .iter()
                .zip(&merged)
                .map(|(&v, alpha)| snap(alpha, v))
                .collect();
            *mass.entry(key).or_insert(0.0) += p;
        }
        let total: f64 = mass.values().sum();
        if mass.is_empty() || total <= 0.0 {
            return Err(Error::InvalidModel("no support point has positive mass".into()));
        }

        // Keep only alphabet values that carry marginal mass, re-index.
        let mut used = vec![vec![false; 0]; users];
        for (i, alpha) in merged.iter().enumerate() {
            used[i] = vec![false; alpha.len()];
        }
        for key in mass.keys() {
            for (i, &k) in key.iter().enumerate() {
                used[i][k] = true;
            }
        }
        let alphabets: Vec<Vec<f64>> = merged
            .iter()
            .zip(&used)
            .map(|(alpha, u)| {
                alpha
                    .iter()
                    .zip(u)
                    .filter(|(_, &keep)| keep)
                    .map(|(&v, _)| v)
                    .collect()
            })
            .collect();
        let support: Vec<JointPoint> = mass
            .into_iter()
            .map(|(key, p)| JointPoint {
                energies: key.iter().zip(&merged).map(|(&k, a)| a[k]).collect(),
                prob: p / total,
            })
            .collect();

        let model = ArrivalModel {
            caps,
            alphabets,
            support,
        };
        for i in 0..users {
            if model.mean_arrival(i)? <= 0.0 {
                return Err(Error::InvalidModel(format!(
                    "user {i} has zero mean arrival"
                )));
            }
        }
        Ok(model)
    }

    pub fn users(&self) -> usize {
        self.caps.len()
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn cap(&self, user: usize) -> Result<f64> {
        self.check_user(user)?;
        Ok(self.caps[user])
    }

    /// Distinct arrival values of `user` that carry positive mass, ascending.
    pub fn alphabet(&self, user: usize) -> Result<&[f64]> {
        self.check_user(user)?;
        Ok(&self.alphabets[user])
    }

    /// Joint support points with positive mass.
    pub fn support(&self) -> &[JointPoint] {
        &self.support
    }

    /// `E[E_i]`.
    pub fn mean_arrival(&self, user: usize) -> Result<f64> {
        self.check_user(user)?;
        Ok(self
            .support
            .iter()
            .map(|pt| pt.energies[user] * pt.prob)
            .sum())
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.users())
            .map(|i| self.mean_arrival(i).expect("index in range"))
            .collect()
    }

    /// Marginal law of one user as a single-user model with the same cap.
    pub fn marginal(&self, user: usize) -> Result<ArrivalModel> {
        self.check_user(user)?;
        let points = self
            .support
            .iter()
            .map(|pt| (vec![pt.energies[user]], pt.prob))
            .collect();
        Self::from_points(points, vec![self.caps[user]])
    }

    pub fn sampler(&self) -> ArrivalSampler<'_> {
        let weights = self.support.iter().map(|pt| pt.prob);
        ArrivalSampler {
            model: self,
            index: WeightedIndex::new(weights).expect("support has positive mass"),
        }
    }

    /// Draws a `K × n` arrival matrix (rows are users) from `rng`.
    pub fn sample_path<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let sampler = self.sampler();
        let mut rows = vec![Vec::with_capacity(n); self.users()];
        for _ in 0..n {
            for (row, &e) in rows.iter_mut().zip(sampler.sample(rng)) {
                row.push(e);
            }
        }
        rows
    }

    /// [`Self::sample_path`] with the generator derived from `seed`.
    pub fn sample_path_seeded(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        self.sample_path(n, &mut stream_rng(seed, 0))
    }

    fn check_user(&self, user: usize) -> Result<()> {
        if user >= self.users() {
            return Err(Error::UserOutOfRange {
                index: user,
                users: self.users(),
            });
        }
        Ok(())
    }
}

/// Draws per-slot arrival columns from an [`ArrivalModel`].
#[derive(Debug, Clone)]
pub struct ArrivalSampler<'a> {
    model: &'a ArrivalModel,
    index: WeightedIndex<f64>,
}

impl<'a> ArrivalSampler<'a> {
    /// One arrival column, one entry per user.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &'a [f64] {
        &self.model.support[self.index.sample(rng)].energies
    }
}

fn merge_values(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for v in values {
        match out.last() {
            Some(&last) if v - last <= MERGE_TOLERANCE => {}
            _ => out.push(v),
        }
    }
    out
}

fn snap(alphabet: &[f64], v: f64) -> usize {
    let i = alphabet.partition_point(|&a| a <= v);
    // `alphabet[i - 1]` is the greatest representative not above `v`.
    i.saturating_sub(1)
}

/// JSON description of an arrival process.
///
/// ```json
/// {"type": "product", "pmf": [[[0, 0.5], [1, 0.5]], [[0, 0.5], [1, 0.5]]]}
/// {"type": "correlated", "pmf": [[0, 0.5], [1, 0.5]]}
/// {"type": "joint", "pmf": [{"e": [0, 1], "p": 0.5}, {"e": [1, 0], "p": 0.5}]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalSpec {
    Product { pmf: Vec<Pmf> },
    Correlated { pmf: Pmf },
    Joint { pmf: Vec<JointEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointEntry {
    pub e: Vec<f64>,
    pub p: f64,
}

impl ArrivalSpec {
    pub fn build(&self, users: usize, caps: &[f64]) -> Result<ArrivalModel> {
        if caps.len() != users {
            return Err(Error::DimensionMismatch {
                expected: users,
                got: caps.len(),
            });
        }
        match self {
            ArrivalSpec::Product { pmf } => {
                if pmf.len() != users {
                    return Err(Error::DimensionMismatch {
                        expected: users,
                        got: pmf.len(),
                    });
                }
                ArrivalModel::build_iid_product(pmf, caps)
            }
            ArrivalSpec::Correlated { pmf } => {
                let cap = caps[0];
                if caps.iter().any(|&c| c != cap) {
                    return Err(Error::InvalidModel(
                        "correlated arrivals need identical battery capacities".into(),
                    ));
                }
                ArrivalModel::build_fully_correlated(pmf, users, cap)
            }
            ArrivalSpec::Joint { pmf } => ArrivalModel::build_joint(
                pmf.iter().map(|j| (j.e.clone(), j.p)).collect(),
                caps,
            ),
        }
    }
}
