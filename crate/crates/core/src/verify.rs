//! The invariant suite behind `ehmac verify` and the acceptance tests.
//!
//! Each check is self-contained, deterministic, and carries its tolerances
//! as constants below.

use std::fmt;

use rand::Rng;

use crate::arrivals::{ArrivalModel, Pmf};
use crate::error::Result;
use crate::gaussmi::{epi_lower_bound, sum_uniform_awgn_mi};
use crate::half_log2_1p;
use crate::policies::{check_admissibility, exact_output_entropy, Policy, TablePolicy};
use crate::regions::{
    all_vertices, awgn_outer, epi_constant, gap_report, is_submodular, RateRegion,
    CORRELATED_SUM_GAP_DECIMAL, FIXED_FRACTION_GAP, SIDE_INFORMATION_GAP_DECIMAL,
};
use crate::rng::stream_rng;
use crate::throughput::{
    cumulative_throughput, exact_throughput, mc_throughput, throughput_set_function, Estimator,
};

/// Seed for every randomized check in the suite.
pub const SUITE_SEED: u64 = 0x5eed_2018;

pub const FIXED_FRACTION_HORIZON: usize = 100_000;
pub const FIXED_FRACTION_PATHS: usize = 20;
pub const FIXED_FRACTION_FINITE_N_SLACK: f64 = 0.02;
pub const SANDWICH_HORIZON: usize = 8;
pub const SANDWICH_FINITE_N_SLACK: f64 = 0.05;
pub const EXACT_TOLERANCE: f64 = 1e-9;
pub const MI_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<34} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

fn check(id: usize, name: &'static str, result: Result<(bool, String)>) -> Check {
    match result {
        Ok((passed, detail)) => Check {
            id,
            name,
            passed,
            detail,
        },
        Err(e) => Check {
            id,
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Single-user fixed-fraction Monte Carlo throughput stays within 0.72 bits
/// of `½·log₂(1 + E[E])` for Bernoulli arrivals on `{0, B̄}`.
pub fn fixed_fraction_gap() -> Check {
    check(1, "fixed-fraction 0.72 gap", (|| {
        let mut worst = f64::INFINITY;
        let mut failures = Vec::new();
        let mut config = 0u64;
        for &p in &[0.1, 0.3, 0.5, 0.7, 0.9] {
            for &cap in &[1.0, 5.0, 25.0] {
                let model = ArrivalModel::build_iid_product(&[Pmf::bernoulli(p, cap)], &[cap])?;
                let policy = [Policy::fixed_fraction_for(&model, 0)?];
                let est = mc_throughput(
                    &policy,
                    &model,
                    1,
                    FIXED_FRACTION_HORIZON,
                    FIXED_FRACTION_PATHS,
                    SUITE_SEED + config,
                )?;
                config += 1;
                let delta = f64::max(3.0 * est.standard_error(), FIXED_FRACTION_FINITE_N_SLACK);
                let bound = half_log2_1p(p * cap) - FIXED_FRACTION_GAP - delta;
                let margin = est.value - bound;
                worst = worst.min(margin);
                if margin < 0.0 {
                    failures.push(format!("p={p} cap={cap}: T={:.4} < {bound:.4}", est.value));
                }
            }
        }
        Ok((
            failures.is_empty(),
            if failures.is_empty() {
                format!("15/15 configs, min margin {worst:.4} bits")
            } else {
                failures.join("; ")
            },
        ))
    })())
}

/// Exact K=3 fixed-fraction throughput sits between the 0.72-shifted and
/// the unshifted outer bound on every subset.
pub fn region_sandwich() -> Check {
    check(2, "region sandwich (K=3, n=8)", (|| {
        let means = [0.3, 0.5, 0.7];
        let marginals: Vec<Pmf> = means.iter().map(|&m| Pmf::bernoulli(m, 1.0)).collect();
        let model = ArrivalModel::build_iid_product(&marginals, &[1.0; 3])?;
        let policies = (0..3)
            .map(|i| Policy::fixed_fraction_for(&model, i))
            .collect::<Result<Vec<_>>>()?;
        let tput = throughput_set_function(&policies, &model, SANDWICH_HORIZON, &Estimator::exact())?;
        let outer = awgn_outer(&means)?;
        let mut failures = Vec::new();
        for mask in 1..8 {
            let t = tput.values.get(mask);
            let upper = outer.set_function().get(mask);
            let lower = (upper - FIXED_FRACTION_GAP).max(0.0) - SANDWICH_FINITE_N_SLACK;
            if !(lower <= t && t <= upper + EXACT_TOLERANCE) {
                failures.push(format!("I={mask:03b}: {lower:.4} <= {t:.4} <= {upper:.4} fails"));
            }
        }
        Ok((
            failures.is_empty(),
            if failures.is_empty() {
                "7/7 subsets inside the sandwich".to_string()
            } else {
                failures.join("; ")
            },
        ))
    })())
}

fn vertex_failures(region: &RateRegion) -> Result<usize> {
    let full = region.set_function().get(region.set_function().full_mask());
    Ok(all_vertices(region)?
        .iter()
        .filter(|(_, v)| {
            let s: f64 = v.iter().sum();
            (s - full).abs() > EXACT_TOLERANCE || v.iter().any(|&r| r < -EXACT_TOLERANCE)
        })
        .count())
}

/// Exhaustive submodularity and vertex checks on the outer bound (K=5) and
/// on an exact throughput set function (K=4, n=6).
pub fn polymatroid_structure() -> Check {
    check(3, "polymatroid structure", (|| {
        let mut rng = stream_rng(SUITE_SEED, 3);
        let means: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..10.0)).collect();
        let outer = awgn_outer(&means)?;
        let outer_sub = is_submodular(outer.set_function(), EXACT_TOLERANCE);
        let outer_bad = vertex_failures(&outer)?;

        let tput_means = [0.2, 0.4, 0.6, 0.8];
        let marginals: Vec<Pmf> = tput_means.iter().map(|&m| Pmf::bernoulli(m, 1.0)).collect();
        let model = ArrivalModel::build_iid_product(&marginals, &[1.0; 4])?;
        let policies = (0..4)
            .map(|i| Policy::fixed_fraction_for(&model, i))
            .collect::<Result<Vec<_>>>()?;
        let tput = throughput_set_function(&policies, &model, 6, &Estimator::exact())?;
        let region = RateRegion::new(tput.values);
        let tput_sub = is_submodular(region.set_function(), EXACT_TOLERANCE);
        let tput_bad = if region.is_polymatroid() {
            vertex_failures(&region)?
        } else {
            usize::MAX
        };
        Ok((
            outer_sub && tput_sub && outer_bad == 0 && tput_bad == 0,
            format!(
                "outer K=5 submodular={outer_sub} bad vertices={outer_bad}/120; \
                 throughput K=4 submodular={tput_sub} bad vertices={tput_bad}/24"
            ),
        ))
    })())
}

/// Uniform-input MI lies between the EPI floor and the Gaussian ceiling and
/// never loses more than `½·log₂(πe/2)` bits.
pub fn epi_constant_sandwich() -> Check {
    check(4, "EPI constant 1.05", (|| {
        let mut worst_gap: f64 = 0.0;
        let mut failures = Vec::new();
        for &p in &[0.25, 1.0, 4.0, 16.0, 64.0] {
            let mi = sum_uniform_awgn_mi(&[p])?;
            let floor = epi_lower_bound(p)?.tight;
            let ceiling = half_log2_1p(p);
            let gap = ceiling - mi;
            worst_gap = worst_gap.max(gap);
            if mi < floor - MI_TOLERANCE || mi > ceiling + MI_TOLERANCE {
                failures.push(format!("P={p}: {mi:.5} outside [{floor:.5}, {ceiling:.5}]"));
            }
            if gap > epi_constant() + MI_TOLERANCE {
                failures.push(format!("P={p}: gap {gap:.5} above constant"));
            }
        }
        Ok((
            failures.is_empty(),
            if failures.is_empty() {
                format!("max gap {worst_gap:.5} <= {:.5}", epi_constant())
            } else {
                failures.join("; ")
            },
        ))
    })())
}

/// Relative sum-capacity gaps shrink with the number of users.
pub fn sum_capacity_asymptotics() -> Check {
    check(5, "sum-capacity asymptotics", (|| {
        let users: Vec<usize> = (0..=20).map(|j| 1usize << j).collect();
        let side = gap_report(SIDE_INFORMATION_GAP_DECIMAL, 1.0, &users)?;
        let corr = gap_report(CORRELATED_SUM_GAP_DECIMAL, 1.0, &users)?;
        let decreasing = |r: &[crate::regions::GapReport]| {
            r.windows(2).all(|w| w[1].relative_gap < w[0].relative_gap)
        };
        let side_1024 = side[10].relative_gap;
        let corr_top = corr[20].relative_gap;
        let ok = decreasing(&side) && decreasing(&corr) && side_1024 < 0.36 && corr_top < 0.50;
        Ok((
            ok,
            format!(
                "relative gap {side_1024:.4} at K=1024 (γ=1.77), {corr_top:.4} at K=2^20 (γ=3.85)"
            ),
        ))
    })())
}

/// Exact spend-process entropies: correlated collapse, subadditivity, and
/// one bit per use for greedy on a fair coin.
pub fn entropy_accounting() -> Check {
    check(6, "entropy accounting (K=2, n<=8)", (|| {
        let shared = Pmf::new(vec![(0.0, 0.3), (0.5, 0.3), (1.0, 0.4)]);
        let single = ArrivalModel::build_fully_correlated(&shared, 1, 1.0)?;
        let pair = ArrivalModel::build_fully_correlated(&shared, 2, 1.0)?;
        let policy = Policy::fixed_fraction_for(&single, 0)?;

        let indep = ArrivalModel::build_iid_product(
            &[Pmf::bernoulli(0.5, 1.0), Pmf::bernoulli(0.3, 1.0)],
            &[1.0, 1.0],
        )?;
        let indep_policies = [
            Policy::fixed_fraction_for(&indep, 0)?,
            Policy::fixed_fraction_for(&indep, 1)?,
        ];
        let coin = ArrivalModel::build_iid_product(&[Pmf::bernoulli(0.5, 1.0)], &[1.0])?;

        let mut worst_collapse: f64 = 0.0;
        let mut worst_sub = f64::INFINITY;
        let mut worst_greedy: f64 = 0.0;
        for n in 1..=8 {
            let h1 = exact_output_entropy(std::slice::from_ref(&policy), &single, n)?;
            let h2 = exact_output_entropy(&[policy.clone(), policy.clone()], &pair, n)?;
            worst_collapse = worst_collapse.max((h1 - h2).abs());

            let joint = exact_output_entropy(&indep_policies, &indep, n)?;
            let parts: f64 = (0..2)
                .map(|i| {
                    exact_output_entropy(
                        std::slice::from_ref(&indep_policies[i]),
                        &indep.marginal(i)?,
                        n,
                    )
                })
                .sum::<Result<f64>>()?;
            worst_sub = worst_sub.min(parts - joint);

            let g = exact_output_entropy(&[Policy::Greedy], &coin, n)?;
            worst_greedy = worst_greedy.max((g - 1.0).abs());
        }
        Ok((
            worst_collapse <= EXACT_TOLERANCE
                && worst_sub >= -EXACT_TOLERANCE
                && worst_greedy <= 1e-12,
            format!(
                "collapse err {worst_collapse:.1e}, subadditivity slack {worst_sub:.3e}, \
                 greedy err {worst_greedy:.1e}"
            ),
        ))
    })())
}

/// Random admissible table policies never beat `½·log₂(1 + E[E])`.
pub fn jensen_outer_bound() -> Check {
    check(7, "Jensen outer bound (100 tables)", (|| {
        let mut rng = stream_rng(SUITE_SEED, 7);
        let mut violations = 0;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..100 {
            let p = rng.random_range(0.05..0.95);
            let cap = rng.random_range(0.5..4.0);
            let points = rng.random_range(2..=12);
            let model = ArrivalModel::build_iid_product(&[Pmf::bernoulli(p, cap)], &[cap])?;
            let table = Policy::Table(TablePolicy::random_admissible(&mut rng, cap, points));
            if !check_admissibility(&table, &model, 0, 10)? {
                violations += 1;
                continue;
            }
            let t = exact_throughput(&[table], &model, 1, 10)?.value;
            let excess = t - half_log2_1p(p * cap);
            worst = worst.max(excess);
            if excess > EXACT_TOLERANCE {
                violations += 1;
            }
        }
        Ok((
            violations == 0,
            format!("{violations} violations, max T - bound = {worst:.4}"),
        ))
    })())
}

/// `(n+m)·T_{n+m} >= n·T_n + m·T_m` for fixed-fraction and greedy policies.
pub fn fixed_policy_supadditivity() -> Check {
    check(8, "sup-additivity at fixed policy", (|| {
        let mut worst = f64::INFINITY;
        let mut count = 0;
        for &(p, cap) in &[(0.5, 1.0), (0.3, 2.0), (0.8, 1.0)] {
            let model = ArrivalModel::build_iid_product(&[Pmf::bernoulli(p, cap)], &[cap])?;
            for policy in [Policy::fixed_fraction_for(&model, 0)?, Policy::Greedy] {
                let s = cumulative_throughput(&[policy], &model, 10)?;
                for n in 1..10 {
                    for m in 1..=10 - n {
                        worst = worst.min(s[n + m][1] - s[n][1] - s[m][1]);
                        count += 1;
                    }
                }
            }
        }
        Ok((
            worst >= -EXACT_TOLERANCE,
            format!("{count} (n, m) pairs, min slack {worst:.3e}"),
        ))
    })())
}

/// Every acceptance check in order.
pub fn acceptance_suite() -> Vec<Check> {
    vec![
        fixed_fraction_gap(),
        region_sandwich(),
        polymatroid_structure(),
        epi_constant_sandwich(),
        sum_capacity_asymptotics(),
        entropy_accounting(),
        jensen_outer_bound(),
        fixed_policy_supadditivity(),
    ]
}
