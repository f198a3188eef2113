//! Fixtures shared by the benchmarks.

use ehmac::{ArrivalModel, Pmf, Policy};

/// `users` independent Bernoulli(½) sources on `{0, 1}` with unit batteries,
/// each running its fixed-fraction policy.
pub fn bernoulli_fixture(users: usize) -> (ArrivalModel, Vec<Policy>) {
    let pmfs = vec![Pmf::bernoulli(0.5, 1.0); users];
    let model = ArrivalModel::build_iid_product(&pmfs, &vec![1.0; users]).expect("valid model");
    let policies = (0..users)
        .map(|i| Policy::fixed_fraction_for(&model, i).expect("valid policy"))
        .collect();
    (model, policies)
}

/// A three-point correlated source shared by `users` unit batteries.
pub fn correlated_fixture(users: usize) -> (ArrivalModel, Vec<Policy>) {
    let pmf = Pmf::new(vec![(0.0, 0.4), (0.5, 0.2), (1.0, 0.4)]);
    let model = ArrivalModel::build_fully_correlated(&pmf, users, 1.0).expect("valid model");
    (model, vec![Policy::Greedy; users])
}
