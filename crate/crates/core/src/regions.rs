//! Set functions and the polymatroid rate regions they induce.
//!
//! A region is stored as its set function `f`, meaning
//! `{R >= 0 : Σ_{i∈I} R_i <= f(I) for all I}`. For a normalized, monotone,
//! submodular `f` the maximum of `Σ_{i∈I} R_i` over the region is exactly
//! `f(I)`, so containment and distance between regions reduce to
//! comparisons of set-function values.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::half_log2_1p;

/// Default tolerance for structural checks on exactly computed set functions.
pub const STRUCTURE_TOLERANCE: f64 = 1e-9;

/// `½·log₂(πe/2) ≈ 1.0471`: the rate lost by using uniform instead of
/// Gaussian inputs.
pub fn epi_constant() -> f64 {
    0.5 * (std::f64::consts::PI * std::f64::consts::E / 2.0).log2()
}

/// Throughput gap of the fixed-fraction policy.
pub const FIXED_FRACTION_GAP: f64 = 0.72;

/// Throughput gap of the low-entropy online policy used when the receiver
/// does not observe the arrivals.
pub const LOW_ENTROPY_POLICY_GAP: f64 = 1.80;

/// Entropy-rate bound of the low-entropy policy, bits per slot and user.
pub const LOW_ENTROPY_POLICY_ENTROPY: f64 = 1.0;

/// Gap with receiver side information: `0.72 + ½·log₂(πe/2)` (≈ 1.77).
pub fn side_information_gap() -> f64 {
    FIXED_FRACTION_GAP + epi_constant()
}

/// Gap without receiver side information for `users` independently
/// operating low-entropy policies: `1.80 + ½·log₂(πe/2) + K` (≈ 2.85 + K).
pub fn transmitter_only_gap(users: usize) -> f64 {
    LOW_ENTROPY_POLICY_GAP + epi_constant() + LOW_ENTROPY_POLICY_ENTROPY * users as f64
}

/// Sum-rate gap without receiver side information under fully correlated
/// arrivals, where the joint entropy rate stays at most 1 (≈ 3.85).
pub fn correlated_sum_gap() -> f64 {
    LOW_ENTROPY_POLICY_GAP + epi_constant() + LOW_ENTROPY_POLICY_ENTROPY
}

/// Published two-decimal values of the sum-rate gaps.
pub const SIDE_INFORMATION_GAP_DECIMAL: f64 = 1.77;
pub const CORRELATED_SUM_GAP_DECIMAL: f64 = 3.85;

/// A real-valued function on subsets of `{0, …, K-1}`, indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct SetFunction {
    users: usize,
    values: Vec<f64>,
}

impl SetFunction {
    /// `values[mask]` for every mask in `0..2^users`; requires `f(∅) = 0`.
    pub fn new(users: usize, values: Vec<f64>) -> Result<Self> {
        if users > 30 {
            return Err(Error::InvalidArgument(format!("too many users: {users}")));
        }
        if values.len() != 1 << users {
            return Err(Error::DimensionMismatch {
                expected: 1 << users,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("set function values must be finite".into()));
        }
        if values[0].abs() > 1e-12 {
            return Err(Error::MalformedRegion(format!(
                "f(∅) must be 0, got {}",
                values[0]
            )));
        }
        Ok(SetFunction { users, values })
    }

    pub fn from_fn(users: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new(users, (0..1usize << users).map(f).collect())
    }

    /// Modular function `f(I) = Σ_{i∈I} weights[i]`.
    pub fn modular(weights: &[f64]) -> Result<Self> {
        Self::from_fn(weights.len(), |mask| masked_sum(weights, mask))
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn full_mask(&self) -> usize {
        (1 << self.users) - 1
    }

    pub fn get(&self, mask: usize) -> f64 {
        self.values[mask]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SetFunction {
        let mut values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        values[0] = 0.0;
        SetFunction {
            users: self.users,
            values,
        }
    }

    /// `I ⊆ J ⇒ f(I) <= f(J) + tol`, checked on single-element extensions.
    pub fn is_monotone(&self, tol: f64) -> bool {
        (0..self.values.len()).all(|mask| {
            (0..self.users)
                .filter(|i| mask >> i & 1 == 0)
                .all(|i| self.values[mask] <= self.values[mask | 1 << i] + tol)
        })
    }

    pub fn is_submodular(&self, tol: f64) -> bool {
        is_submodular(self, tol)
    }
}

fn masked_sum(weights: &[f64], mask: usize) -> f64 {
    weights
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, w)| w)
        .sum()
}

/// Largest violation of `f(I∪{s}) + f(I∪{u}) >= f(I) + f(I∪{s,u})` over all
/// `I` and distinct `s, u ∉ I`, scaled by `slack(I, s, u)`; returns the
/// worst `(I, s, u, excess)` or `None` when every condition holds.
fn worst_pair_violation(
    f: &SetFunction,
    slack: impl Fn(usize, usize, usize) -> f64,
) -> Option<(usize, usize, usize, f64)> {
    let mut worst: Option<(usize, usize, usize, f64)> = None;
    for mask in 0..f.values.len() {
        for s in (0..f.users).filter(|s| mask >> s & 1 == 0) {
            for u in (s + 1..f.users).filter(|u| mask >> u & 1 == 0) {
                let lhs = f.get(mask | 1 << s) + f.get(mask | 1 << u);
                let rhs = f.get(mask) + f.get(mask | 1 << s | 1 << u);
                let excess = rhs - lhs - slack(mask, s, u);
                if excess > 0.0 && worst.map_or(true, |w| excess > w.3) {
                    worst = Some((mask, s, u, excess));
                }
            }
        }
    }
    worst
}

/// Exhaustive pairwise submodularity check at absolute tolerance `tol`.
pub fn is_submodular(f: &SetFunction, tol: f64) -> bool {
    worst_pair_violation(f, |_, _, _| tol).is_none()
}

/// Submodularity check for Monte Carlo set functions: each pairwise
/// condition is allowed the sum of the four involved half-widths.
pub fn is_submodular_within(f: &SetFunction, half_widths: &[f64]) -> Result<bool> {
    if half_widths.len() != f.values.len() {
        return Err(Error::DimensionMismatch {
            expected: f.values.len(),
            got: half_widths.len(),
        });
    }
    Ok(worst_pair_violation(f, |m, s, u| {
        half_widths[m] + half_widths[m | 1 << s] + half_widths[m | 1 << u]
            + half_widths[m | 1 << s | 1 << u]
    })
    .is_none())
}

/// A rate region given by its set function, with structural flags computed
/// once on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRegion {
    f: SetFunction,
    monotone: bool,
    submodular: bool,
    clamped: bool,
}

impl RateRegion {
    pub fn new(f: SetFunction) -> Self {
        Self::with_clamping(f, false)
    }

    fn with_clamping(f: SetFunction, clamped: bool) -> Self {
        RateRegion {
            monotone: f.is_monotone(STRUCTURE_TOLERANCE),
            submodular: is_submodular(&f, STRUCTURE_TOLERANCE),
            f,
            clamped,
        }
    }

    pub fn set_function(&self) -> &SetFunction {
        &self.f
    }

    pub fn users(&self) -> usize {
        self.f.users
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn is_submodular(&self) -> bool {
        self.submodular
    }

    /// Normalized, monotone and submodular.
    pub fn is_polymatroid(&self) -> bool {
        self.monotone && self.submodular
    }

    /// Whether some bound was raised to zero when the region was built.
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    fn require_polymatroid(&self) -> Result<()> {
        if !self.is_polymatroid() {
            return Err(Error::MalformedRegion(format!(
                "set function is not a polymatroid rank function (monotone: {}, submodular: {})",
                self.monotone, self.submodular
            )));
        }
        Ok(())
    }
}

/// Outer bound `f(I) = ½·log₂(1 + Σ_{i∈I} E[E_i])`.
pub fn awgn_outer(means: &[f64]) -> Result<RateRegion> {
    if means.is_empty() {
        return Err(Error::InvalidArgument("no users".into()));
    }
    if let Some(m) = means.iter().find(|&&m| !(m > 0.0) || !m.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "mean arrivals must be positive, got {m}"
        )));
    }
    let f = SetFunction::from_fn(means.len(), |mask| half_log2_1p(masked_sum(means, mask)))?;
    Ok(RateRegion::new(f))
}

fn shift(f: &SetFunction, gamma: f64) -> RateRegion {
    let clamped = f.values[1..].iter().any(|&v| v - gamma < 0.0);
    RateRegion::with_clamping(f.map(|v| (v - gamma).max(0.0)), clamped)
}

/// `f'(I) = max(f(I) - γ, 0)`.
pub fn shifted_region(base: &RateRegion, gamma: f64) -> Result<RateRegion> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!("shift must be >= 0, got {gamma}")));
    }
    Ok(shift(&base.f, gamma))
}

/// Inner bound with receiver side information: `max(T(g_I) - ½·log₂(πe/2), 0)`.
pub fn inner_txrx(throughput: &SetFunction) -> RateRegion {
    shift(throughput, epi_constant())
}

/// Inner bound without receiver side information:
/// `max(T(g_I) - H_rate - ½·log₂(πe/2), 0)`.
pub fn inner_tx(throughput: &SetFunction, entropy_rate: f64) -> Result<RateRegion> {
    if !(entropy_rate >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "entropy rate must be >= 0, got {entropy_rate}"
        )));
    }
    Ok(shift(throughput, entropy_rate + epi_constant()))
}

/// The vertex `R_{π(j)} = f({π(0..=j)}) - f({π(0..j)})` for a permutation
/// of the 0-based users.
pub fn vertex(region: &RateRegion, permutation: &[usize]) -> Result<Vec<f64>> {
    region.require_polymatroid()?;
    let k = region.users();
    if permutation.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: permutation.len(),
        });
    }
    let mut seen = 0usize;
    let mut rates = vec![0.0; k];
    for &user in permutation {
        if user >= k || seen >> user & 1 == 1 {
            return Err(Error::InvalidArgument(format!(
                "{permutation:?} is not a permutation of 0..{k}"
            )));
        }
        let next = seen | 1 << user;
        rates[user] = region.f.get(next) - region.f.get(seen);
        seen = next;
    }
    Ok(rates)
}

/// Users up to this count have every permutation vertex checked by
/// [`sum_rate`]; larger regions check the rotations and their reversals.
pub const EXHAUSTIVE_VERTEX_USERS: usize = 8;

fn vertex_permutations(k: usize) -> Box<dyn Iterator<Item = Vec<usize>>> {
    if k <= EXHAUSTIVE_VERTEX_USERS {
        Box::new((0..k).permutations(k))
    } else {
        Box::new((0..k).flat_map(move |r| {
            let rot: Vec<usize> = (0..k).map(|j| (j + r) % k).collect();
            let rev: Vec<usize> = rot.iter().rev().copied().collect();
            [rot, rev]
        }))
    }
}

/// Sum-rate `f(full set)`, after confirming every checked permutation
/// vertex sums to it within [`STRUCTURE_TOLERANCE`].
pub fn sum_rate(region: &RateRegion) -> Result<f64> {
    region.require_polymatroid()?;
    let total = region.f.get(region.f.full_mask());
    for perm in vertex_permutations(region.users()) {
        let v = vertex(region, &perm)?;
        let s: f64 = v.iter().sum();
        if (s - total).abs() > STRUCTURE_TOLERANCE {
            return Err(Error::Structural(format!(
                "vertex {perm:?} sums to {s}, expected {total}"
            )));
        }
    }
    Ok(total)
}

/// All permutation vertices, in lexicographic permutation order.
pub fn all_vertices(region: &RateRegion) -> Result<Vec<(Vec<usize>, Vec<f64>)>> {
    region.require_polymatroid()?;
    (0..region.users())
        .permutations(region.users())
        .map(|p| vertex(region, &p).map(|v| (p, v)))
        .collect()
}

/// Whether `inner ⊆ outer`, decided by `f_inner(I) <= f_outer(I) + 1e-9`.
///
/// Dominance is exact for polymatroids. Regions flagged as non-submodular
/// (clamped shifts) are still accepted: dominance then remains sufficient
/// for containment.
pub fn region_contains(inner: &RateRegion, outer: &RateRegion) -> Result<bool> {
    if inner.users() != outer.users() {
        return Err(Error::DimensionMismatch {
            expected: outer.users(),
            got: inner.users(),
        });
    }
    if !outer.is_monotone() {
        return Err(Error::MalformedRegion("outer region is not monotone".into()));
    }
    Ok(inner
        .f
        .values
        .iter()
        .zip(&outer.f.values)
        .all(|(a, b)| *a <= b + STRUCTURE_TOLERANCE))
}

/// `max_I |f(I) - g(I)|`, a stand-in for the Hausdorff distance between the
/// induced regions (it bounds the l1 Hausdorff distance up to a factor K).
pub fn setfn_distance(f: &SetFunction, g: &SetFunction) -> Result<f64> {
    if f.users != g.users {
        return Err(Error::DimensionMismatch {
            expected: f.users,
            got: g.users,
        });
    }
    Ok(f.values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Sum-capacity sandwich for one user count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub users: usize,
    pub mean_arrival: f64,
    /// `½·log₂(1 + K·E[E])`.
    pub upper: f64,
    /// `max(upper - γ, 0)`.
    pub lower: f64,
    /// `upper - lower`.
    pub absolute_gap: f64,
    /// `γ / upper`.
    pub relative_gap: f64,
    pub clamped: bool,
}

pub fn gap_report(gamma: f64, mean_arrival: f64, users: &[usize]) -> Result<Vec<GapReport>> {
    if !(mean_arrival > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mean arrival must be positive, got {mean_arrival}"
        )));
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!("gap must be >= 0, got {gamma}")));
    }
    if users.is_empty() || users.contains(&0) {
        return Err(Error::InvalidArgument("user counts must be positive".into()));
    }
    Ok(users
        .iter()
        .map(|&k| {
            let upper = half_log2_1p(k as f64 * mean_arrival);
            let lower = (upper - gamma).max(0.0);
            GapReport {
                users: k,
                mean_arrival,
                upper,
                lower,
                absolute_gap: upper - lower,
                relative_gap: gamma / upper,
                clamped: upper < gamma,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HALF_LOG2_3: f64 = 0.792_481_250_360_578_1;

    fn two_user() -> RateRegion {
        awgn_outer(&[1.0, 1.0]).unwrap()
    }

    #[test]
    fn constants() {
        assert!((epi_constant() - 1.047_095_585_180_641_1).abs() < 1e-14);
        assert!((side_information_gap() - SIDE_INFORMATION_GAP_DECIMAL).abs() < 0.005);
        assert!((correlated_sum_gap() - CORRELATED_SUM_GAP_DECIMAL).abs() < 0.005);
        assert!((transmitter_only_gap(3) - 5.85).abs() < 0.005);
    }

    #[test]
    fn outer_closed_forms() {
        let r = two_user();
        assert_eq!(r.set_function().get(1), 0.5);
        assert_eq!(r.set_function().get(2), 0.5);
        assert!((r.set_function().get(3) - HALF_LOG2_3).abs() < 1e-15);
        assert_eq!(awgn_outer(&[1.0]).unwrap().set_function().get(1), 0.5);
        assert_eq!(awgn_outer(&[1.0; 3]).unwrap().set_function().get(7), 1.0);
        assert!(awgn_outer(&[1.0, 0.0]).is_err());
        assert!(r.is_polymatroid());
    }

    #[test]
    fn shifts() {
        let r = two_user();
        assert_eq!(shifted_region(&r, 0.0).unwrap(), r);
        let one = shifted_region(&awgn_outer(&[1.0]).unwrap(), 0.72).unwrap();
        assert_eq!(one.set_function().get(1), 0.0);
        assert!(one.clamped());
        let seven = shifted_region(&awgn_outer(&[7.0, 7.0]).unwrap(), 0.72).unwrap();
        let expect = 0.5 * 15f64.log2() - 0.72;
        assert!((seven.set_function().get(3) - expect).abs() < 1e-12);
        assert!((seven.set_function().get(3) - 1.2334).abs() < 1e-4);
        assert!(!seven.clamped());
        assert!(shifted_region(&r, -1.0).is_err());
    }

    #[test]
    fn inner_bounds() {
        let zero = SetFunction::new(1, vec![0.0, 0.0]).unwrap();
        assert_eq!(inner_txrx(&zero).set_function().get(1), 0.0);
        let half = SetFunction::new(1, vec![0.0, 0.5]).unwrap();
        assert_eq!(inner_txrx(&half).set_function().get(1), 0.0);
        let three = SetFunction::new(1, vec![0.0, 3.0]).unwrap();
        assert!((inner_txrx(&three).set_function().get(1) - 1.9529).abs() < 1e-4);
        assert_eq!(inner_tx(&three, 0.0).unwrap(), inner_txrx(&three));
        assert!((inner_tx(&three, 1.0).unwrap().set_function().get(1) - 0.9529).abs() < 1e-4);
    }

    #[test]
    fn submodularity_examples() {
        let square = SetFunction::from_fn(2, |m| (m.count_ones() as f64).powi(2)).unwrap();
        assert!(!is_submodular(&square, 1e-9));
        let modular = SetFunction::modular(&[0.3, 1.2, 0.7]).unwrap();
        assert!(is_submodular(&modular, 1e-9));
        assert!(is_submodular(two_user().set_function(), 1e-9));
    }

    #[test]
    fn vertices() {
        let r = two_user();
        let v = vertex(&r, &[0, 1]).unwrap();
        assert_eq!(v[0], 0.5);
        assert!((v[1] - (HALF_LOG2_3 - 0.5)).abs() < 1e-15);
        let w = vertex(&r, &[1, 0]).unwrap();
        assert_eq!(w, vec![v[1], v[0]]);
        assert_eq!(vertex(&awgn_outer(&[2.0]).unwrap(), &[0]).unwrap(), vec![half_log2_1p(2.0)]);
        assert!(vertex(&r, &[0, 0]).is_err());
        assert!(vertex(&r, &[0]).is_err());
    }

    #[test]
    fn sum_rates() {
        assert!((sum_rate(&two_user()).unwrap() - HALF_LOG2_3).abs() < 1e-15);
        let four = awgn_outer(&[1.0; 4]).unwrap();
        assert!((sum_rate(&four).unwrap() - 0.5 * 5f64.log2()).abs() < 1e-15);
        assert_eq!(all_vertices(&four).unwrap().len(), 24);
        let square = RateRegion::new(SetFunction::from_fn(2, |m| (m.count_ones() as f64).powi(2)).unwrap());
        assert!(matches!(sum_rate(&square), Err(Error::MalformedRegion(_))));
    }

    #[test]
    fn containment() {
        let r = two_user();
        assert!(region_contains(&r, &r).unwrap());
        assert!(region_contains(&shifted_region(&r, 0.3).unwrap(), &r).unwrap());
        let small = awgn_outer(&[0.5, 0.5]).unwrap();
        assert!(!region_contains(&r, &small).unwrap());
        assert!(region_contains(&small, &r).unwrap());
        assert!(region_contains(&awgn_outer(&[1.0]).unwrap(), &r).is_err());
    }

    #[test]
    fn distances() {
        let f = awgn_outer(&[3.0, 5.0]).unwrap();
        let g = shifted_region(&f, 0.25).unwrap();
        assert_eq!(setfn_distance(f.set_function(), f.set_function()).unwrap(), 0.0);
        assert!((setfn_distance(f.set_function(), g.set_function()).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gap_reports() {
        let r = gap_report(1.77, 1.0, &[16, 1024]).unwrap();
        assert!((r[0].upper - 0.5 * 17f64.log2()).abs() < 1e-15);
        assert!((r[0].upper - 2.0437).abs() < 1e-4);
        assert!((r[0].lower - 0.2737).abs() < 1e-4);
        assert!((r[1].upper - 5.0007).abs() < 1e-4);
        assert!((r[1].relative_gap - 0.354).abs() < 1e-3);
        let c = gap_report(3.85, 1.0, &[1]).unwrap();
        assert_eq!(c[0].lower, 0.0);
        assert!(c[0].clamped);
        assert!(gap_report(1.77, 0.0, &[1]).is_err());
        assert!(gap_report(1.77, 1.0, &[]).is_err());
    }
}
