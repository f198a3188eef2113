use ehmac::arrivals::{ArrivalModel, Pmf};
use ehmac::battery::simulate_trajectory;
use ehmac::policies::{exact_output_entropy, Policy, TablePolicy};
use ehmac::regions::{
    awgn_outer, gap_report, setfn_distance, shifted_region, sum_rate, vertex,
};
use ehmac::rng::stream_rng;
use ehmac::throughput::exact_throughput;
use ehmac::{half_log2_1p, SetFunction};
use proptest::prelude::*;

fn pmf_strategy() -> impl Strategy<Value = Pmf> {
    prop::collection::vec((0.0f64..3.0, 0.01f64..1.0), 1..5).prop_map(|pairs| {
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().map(|(v, w)| (v, w / total)).collect();
        // Guarantee a positive mean.
        pairs[0].0 = pairs[0].0.max(0.1);
        Pmf::new(pairs)
    })
}

fn policy_strategy() -> impl Strategy<Value = (u8, f64)> {
    (0u8..5, 0.01f64..1.0)
}

fn make_policy(kind: u8, x: f64, model: &ArrivalModel, user: usize) -> Policy {
    match kind {
        0 => Policy::fixed_fraction_for(model, user).unwrap(),
        1 => Policy::Greedy,
        2 => Policy::constant(x * model.cap(user).unwrap()).unwrap(),
        3 => Policy::quantized_fixed_fraction(x, 3 + (x * 7.0) as usize).unwrap(),
        _ => Policy::Table(TablePolicy::random_admissible(
            &mut stream_rng((x * 1e6) as u64, 0),
            model.cap(user).unwrap(),
            6,
        )),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn construction_normalizes(marginals in prop::collection::vec(pmf_strategy(), 1..4),
                               cap in 0.2f64..2.0) {
        let caps = vec![cap; marginals.len()];
        let model = ArrivalModel::build_iid_product(&marginals, &caps).unwrap();
        let total: f64 = model.support().iter().map(|p| p.prob).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for pt in model.support() {
            for (&e, &c) in pt.energies.iter().zip(model.caps()) {
                prop_assert!((0.0..=c).contains(&e));
            }
        }
    }

    #[test]
    fn allocations_are_admissible((kind, x) in policy_strategy(),
                                  cap in 0.1f64..5.0,
                                  frac in 0.0f64..=1.0) {
        let model = ArrivalModel::build_iid_product(&[Pmf::point(cap * 0.5)], &[cap]).unwrap();
        let policy = make_policy(kind, x, &model, 0);
        for b in (0..=200).map(|j| cap * j as f64 / 200.0).chain([cap * frac]) {
            let g = policy.allocate(b, cap);
            prop_assert!(g >= 0.0 && g <= b + 1e-12, "{policy:?} at {b}: {g}");
        }
    }

    #[test]
    fn trajectories_respect_battery_limits(pmf in pmf_strategy(),
                                           cap in 0.2f64..3.0,
                                           (kind, x) in policy_strategy(),
                                           seed in any::<u64>()) {
        let model = ArrivalModel::build_iid_product(&[pmf.clone(), pmf], &[cap, cap * 0.7]).unwrap();
        let policies: Vec<Policy> = (0..2).map(|i| make_policy(kind, x, &model, i)).collect();
        let tr = simulate_trajectory(&model, &policies, 200, seed).unwrap();
        for i in 0..2 {
            let c = model.caps()[i];
            let (mut spent, mut arrived) = (0.0, 0.0);
            for t in 0..200 {
                let (g, b) = (tr.spends[i][t], tr.levels[i][t]);
                prop_assert!(0.0 <= g && g <= b + 1e-12 && b <= c + 1e-12);
                spent += g;
                arrived += tr.arrivals[i][t];
                prop_assert!(spent <= arrived + 1e-9);
            }
        }
    }

    #[test]
    fn jensen_bound_for_random_tables(p in 0.05f64..0.95, cap in 0.3f64..4.0, seed in any::<u64>(), n in 1usize..=8) {
        let model = ArrivalModel::build_iid_product(&[Pmf::bernoulli(p, cap)], &[cap]).unwrap();
        let table = Policy::Table(TablePolicy::random_admissible(&mut stream_rng(seed, 0), cap, 8));
        let t = exact_throughput(&[table], &model, 1, n).unwrap().value;
        prop_assert!(t <= half_log2_1p(p * cap) + 1e-9);
    }

    #[test]
    fn distance_is_a_metric(a in prop::collection::vec(0.0f64..5.0, 7),
                            b in prop::collection::vec(0.0f64..5.0, 7),
                            c in prop::collection::vec(0.0f64..5.0, 7)) {
        let mk = |v: &Vec<f64>| SetFunction::new(3, std::iter::once(0.0).chain(v.iter().copied()).collect()).unwrap();
        let (f, g, h) = (mk(&a), mk(&b), mk(&c));
        let fg = setfn_distance(&f, &g).unwrap();
        prop_assert_eq!(setfn_distance(&f, &f).unwrap(), 0.0);
        prop_assert_eq!(fg, setfn_distance(&g, &f).unwrap());
        prop_assert!(setfn_distance(&f, &h).unwrap() <= fg + setfn_distance(&g, &h).unwrap() + 1e-12);
        if a != b { prop_assert!(fg > 0.0); }
    }

    #[test]
    fn vertices_sum_to_full_value(means in prop::collection::vec(0.01f64..10.0, 1..7), seed in any::<u64>()) {
        let region = awgn_outer(&means).unwrap();
        let total = sum_rate(&region).unwrap();
        let mut perm: Vec<usize> = (0..means.len()).collect();
        let mut rng = stream_rng(seed, 0);
        for i in (1..perm.len()).rev() {
            perm.swap(i, rand::Rng::random_range(&mut rng, 0..=i));
        }
        let v = vertex(&region, &perm).unwrap();
        prop_assert!((v.iter().sum::<f64>() - total).abs() < 1e-9);
        prop_assert!(v.iter().all(|&r| r >= 0.0));
    }

    #[test]
    fn shifted_outer_is_contained(means in prop::collection::vec(0.01f64..10.0, 1..5), gamma in 0.0f64..3.0) {
        let outer = awgn_outer(&means).unwrap();
        let inner = shifted_region(&outer, gamma).unwrap();
        prop_assert!(ehmac::regions::region_contains(&inner, &outer).unwrap());
        prop_assert!(setfn_distance(inner.set_function(), outer.set_function()).unwrap() <= gamma + 1e-12);
    }

    #[test]
    fn relative_gap_decreases(gamma in 0.1f64..5.0, mean in 0.01f64..10.0) {
        let users: Vec<usize> = (0..=20).map(|j| 1usize << j).collect();
        let r = gap_report(gamma, mean, &users).unwrap();
        for w in r.windows(2) {
            prop_assert!(w[1].relative_gap < w[0].relative_gap);
            prop_assert!(w[1].lower <= w[1].upper);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn entropy_is_subadditive(p in 0.1f64..0.9, r in 0.1f64..0.9, (kind, x) in policy_strategy(), n in 1usize..=6) {
        let model = ArrivalModel::build_iid_product(
            &[Pmf::bernoulli(p, 1.0), Pmf::new(vec![(0.0, 1.0 - r), (0.5, r / 2.0), (1.0, r / 2.0)])],
            &[1.0, 1.0],
        ).unwrap();
        let policies: Vec<Policy> = (0..2).map(|i| make_policy(kind, x, &model, i)).collect();
        let joint = exact_output_entropy(&policies, &model, n).unwrap();
        let parts: f64 = (0..2)
            .map(|i| exact_output_entropy(&policies[i..=i], &model.marginal(i).unwrap(), n).unwrap())
            .sum();
        prop_assert!(joint <= parts + 1e-9);
    }

    #[test]
    fn two_level_quantizer_has_at_most_one_bit(p in 0.05f64..0.95, q in 0.05f64..=1.0, n in 1usize..=8) {
        let model = ArrivalModel::build_iid_product(&[Pmf::bernoulli(p, 1.0)], &[1.0]).unwrap();
        let policy = Policy::quantized_fixed_fraction(q, 2).unwrap();
        prop_assert!(exact_output_entropy(&[policy], &model, n).unwrap() <= 1.0 + 1e-12);
    }
}
