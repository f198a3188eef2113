//! Cross-checks against oracles that share no code path with the library.

use ehmac::arrivals::{ArrivalModel, Pmf};
use ehmac::gaussmi::{
    epi_lower_bound, mixture_awgn_mi, mixture_density, sum_uniform_awgn_mi, uniform_sum_density,
};
use ehmac::policies::Policy;
use ehmac::regions::{awgn_outer, epi_constant, is_submodular};
use ehmac::rng::stream_rng;
use ehmac::throughput::{
    concavity_split_check, concavity_split_sides, exact_throughput, mc_throughput,
    supadditivity_check, throughput_set_function, Estimator,
};
use ehmac::{half_log2_1p, SetFunction};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

/// Brute-force single-user throughput: enumerate every binary arrival word
/// and run the battery by hand.
fn brute_force_single(p: f64, high: f64, cap: f64, spend: impl Fn(f64) -> f64, n: usize) -> f64 {
    let mut total = 0.0;
    for word in 0u32..1 << n {
        let mut prob = 1.0;
        let mut b: f64 = 0.0;
        let mut g: f64 = 0.0;
        let mut acc = 0.0;
        for t in 0..n {
            let e = if word >> t & 1 == 1 {
                prob *= p;
                high
            } else {
                prob *= 1.0 - p;
                0.0
            };
            b = (b - g + e).min(cap);
            g = spend(b);
            acc += 0.5 * (1.0 + g).log2();
        }
        total += prob * acc / n as f64;
    }
    total
}

#[test]
fn fixed_fraction_n12_matches_brute_force_and_mc() {
    let model = ArrivalModel::build_iid_product(&[Pmf::bernoulli(0.5, 1.0)], &[1.0]).unwrap();
    let policy = [Policy::fixed_fraction(0.5).unwrap()];
    let exact = exact_throughput(&policy, &model, 1, 12).unwrap().value;
    let brute = brute_force_single(0.5, 1.0, 1.0, |b| 0.5 * b, 12);
    assert!((exact - brute).abs() < 1e-12, "{exact} vs {brute}");

    let mc = mc_throughput(&policy, &model, 1, 12, 20_000, 77).unwrap();
    assert!((mc.value - exact).abs() <= 3.0 * mc.standard_error());
}

#[test]
fn greedy_and_asymmetric_brute_force() {
    for &(p, high, cap) in &[(0.3, 2.0, 2.0), (0.6, 3.0, 1.5), (0.9, 0.4, 1.0)] {
        let model = ArrivalModel::build_iid_product(&[Pmf::bernoulli(p, high)], &[cap]).unwrap();
        let q = (p * high.min(cap)) / cap;
        let exact = exact_throughput(&[Policy::fixed_fraction(q).unwrap()], &model, 1, 10)
            .unwrap()
            .value;
        let brute = brute_force_single(p, high, cap, |b| q * b, 10);
        assert!((exact - brute).abs() < 1e-12);
        let greedy = exact_throughput(&[Policy::Greedy], &model, 1, 10).unwrap().value;
        assert!((greedy - p * half_log2_1p(high.min(cap))).abs() < 1e-12);
    }
}

fn random_config(rng: &mut impl Rng) -> (ArrivalModel, Vec<Policy>) {
    let k = rng.random_range(1..=3);
    let mut marginals = Vec::new();
    let mut caps = Vec::new();
    for _ in 0..k {
        let cap = rng.random_range(0.5..3.0);
        let support = rng.random_range(2..=3);
        let mut weights: Vec<f64> = (0..support).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mut pairs: Vec<(f64, f64)> = weights
            .into_iter()
            .map(|w| (rng.random_range(0.0..1.5 * cap), w))
            .collect();
        pairs[0].0 = cap;
        marginals.push(Pmf::new(pairs));
        caps.push(cap);
    }
    let model = ArrivalModel::build_iid_product(&marginals, &caps).unwrap();
    let policies = (0..k)
        .map(|i| match rng.random_range(0..4) {
            0 => Policy::fixed_fraction_for(&model, i).unwrap(),
            1 => Policy::Greedy,
            2 => Policy::constant(rng.random_range(0.0..caps[i])).unwrap(),
            _ => Policy::quantized_fixed_fraction(rng.random_range(0.1..1.0), 4).unwrap(),
        })
        .collect();
    (model, policies)
}

#[test]
fn monte_carlo_agrees_with_exact_on_random_suite() {
    let mut rng = stream_rng(2024, 0);
    let mut within = 0;
    for c in 0..100 {
        let (model, policies) = random_config(&mut rng);
        let full = (1 << model.users()) - 1;
        let exact = exact_throughput(&policies, &model, full, 10).unwrap().value;
        let mc = mc_throughput(&policies, &model, full, 10, 10_000, c).unwrap();
        if (mc.value - exact).abs() <= 3.0 * mc.standard_error() + 1e-12 {
            within += 1;
        }
    }
    assert!(within >= 95, "only {within}/100 within 3 standard errors");
}

#[test]
fn throughput_set_function_monotone_and_submodular_against_brute_force() {
    let means = [0.25, 0.5, 0.75];
    let marginals: Vec<Pmf> = means.iter().map(|&m| Pmf::bernoulli(m, 1.0)).collect();
    let model = ArrivalModel::build_iid_product(&marginals, &[1.0; 3]).unwrap();
    let policies: Vec<Policy> = means.iter().map(|&q| Policy::fixed_fraction(q).unwrap()).collect();
    let n = 5;
    let f = throughput_set_function(&policies, &model, n, &Estimator::exact())
        .unwrap()
        .values;

    // Brute force over 8^5 joint arrival words.
    let mut brute = [0.0; 8];
    for word in 0u32..1 << (3 * n) {
        let mut prob = 1.0;
        let mut b = [0.0f64; 3];
        let mut g = [0.0f64; 3];
        let mut acc = [0.0; 8];
        for t in 0..n {
            for i in 0..3 {
                let bit = word >> (3 * t + i) & 1 == 1;
                prob *= if bit { means[i] } else { 1.0 - means[i] };
                b[i] = (b[i] - g[i] + if bit { 1.0 } else { 0.0 }).min(1.0);
                g[i] = means[i] * b[i];
            }
            for (mask, a) in acc.iter_mut().enumerate() {
                let s: f64 = (0..3).filter(|i| mask >> i & 1 == 1).map(|i| g[i]).sum();
                *a += 0.5 * (1.0 + s).log2();
            }
        }
        for mask in 0..8 {
            brute[mask] += prob * acc[mask] / n as f64;
        }
    }
    for mask in 0..8 {
        assert!((f.get(mask) - brute[mask]).abs() < 1e-12);
    }
    assert!(f.is_monotone(1e-9));
    assert!(is_submodular(&f, 1e-9));
}

#[test]
fn symmetric_correlated_users_have_equal_singletons() {
    let model = ArrivalModel::build_fully_correlated(&Pmf::bernoulli(0.4, 1.0), 2, 1.0).unwrap();
    let p = Policy::fixed_fraction_for(&model, 0).unwrap();
    let f = throughput_set_function(&[p.clone(), p], &model, 8, &Estimator::exact())
        .unwrap()
        .values;
    assert_eq!(f.get(1), f.get(2));
}

#[test]
fn concavity_split_holds() {
    let sym = ArrivalModel::build_iid_product(
        &[Pmf::bernoulli(0.5, 1.0), Pmf::bernoulli(0.5, 1.0)],
        &[1.0, 1.0],
    )
    .unwrap();
    let pol = vec![Policy::fixed_fraction(0.5).unwrap(); 2];
    assert!(concavity_split_check(&pol, &sym, 3, 8).unwrap());

    let means = [0.2, 0.5, 0.8];
    let asym = ArrivalModel::build_iid_product(
        &means.map(|m| Pmf::bernoulli(m, 1.0)),
        &[1.0; 3],
    )
    .unwrap();
    let pol: Vec<Policy> = means.iter().map(|&q| Policy::fixed_fraction(q).unwrap()).collect();
    for mask in 1..8 {
        assert!(concavity_split_check(&pol, &asym, mask, 7).unwrap());
    }
    // Singletons: λ = 1, both sides coincide.
    let (l, r) = concavity_split_sides(&pol, &asym, 2, 7).unwrap();
    assert!((l - r).abs() < 1e-15);
}

#[test]
fn supadditivity_cases() {
    let det = ArrivalModel::build_iid_product(&[Pmf::point(0.5)], &[1.0]).unwrap();
    let coin = ArrivalModel::build_iid_product(&[Pmf::bernoulli(0.5, 1.0)], &[1.0]).unwrap();
    for (n, m) in [(1, 1), (2, 3), (4, 4), (5, 5)] {
        assert!(supadditivity_check(&[Policy::fixed_fraction(0.5).unwrap()], &det, n, m).unwrap());
        assert!(supadditivity_check(&[Policy::Greedy], &coin, n, m).unwrap());
        assert!(supadditivity_check(&[Policy::fixed_fraction(0.5).unwrap()], &coin, n, m).unwrap());
    }
    // n = m against brute force.
    for n in 1..=5 {
        let t_n = brute_force_single(0.5, 1.0, 1.0, |b| 0.5 * b, n);
        let t_2n = brute_force_single(0.5, 1.0, 1.0, |b| 0.5 * b, 2 * n);
        assert!(2.0 * n as f64 * t_2n >= 2.0 * n as f64 * t_n - 1e-12);
    }
}

#[test]
fn outer_bound_is_submodular_in_the_lattice_sense() {
    let mut rng = stream_rng(5, 5);
    for _ in 0..20 {
        let means: Vec<f64> = (0..5).map(|_| rng.random_range(0.01..20.0)).collect();
        let outer = awgn_outer(&means).unwrap();
        let f = outer.set_function();
        assert!(is_submodular(f, 1e-9));
        for a in 0..32 {
            for b in 0..32 {
                assert!(f.get(a) + f.get(b) >= f.get(a | b) + f.get(a & b) - 1e-12);
            }
        }
    }
    let supermodular = SetFunction::from_fn(3, |m| (m.count_ones() as f64).powi(2)).unwrap();
    assert!(!is_submodular(&supermodular, 1e-9));
}

/// `-E[log₂ p(Y)]` from `samples` draws; returns (estimate, standard error).
fn resubstitution_entropy(
    samples: usize,
    mut draw: impl FnMut(&mut rand_chacha::ChaCha8Rng) -> f64,
    density: impl Fn(f64) -> f64,
) -> (f64, f64) {
    let mut rng = stream_rng(31, 0);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let v = -density(draw(&mut rng)).log2();
        s += v;
        s2 += v * v;
    }
    let m = samples as f64;
    let mean = s / m;
    (mean, ((s2 / m - mean * mean) / m).sqrt())
}

fn noise_entropy() -> f64 {
    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).log2()
}

#[test]
fn uniform_mi_matches_monte_carlo() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let box1 = Uniform::new_inclusive(-1.0, 1.0).unwrap();
    let (h, se) = resubstitution_entropy(
        10_000_000,
        |rng| box1.sample(rng) + normal.sample(rng),
        |y| uniform_sum_density(&[1.0], y),
    );
    let mi = sum_uniform_awgn_mi(&[1.0]).unwrap();
    assert!((h - noise_entropy() - mi).abs() <= 3.0 * se, "{} vs {mi}", h - noise_entropy());
}

#[test]
fn two_user_uniform_mi_matches_monte_carlo() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let a = Uniform::new_inclusive(-0.5, 0.5).unwrap();
    let b = Uniform::new_inclusive(-2.0, 2.0).unwrap();
    let (h, se) = resubstitution_entropy(
        2_000_000,
        |rng| a.sample(rng) + b.sample(rng) + normal.sample(rng),
        |y| uniform_sum_density(&[0.5, 2.0], y),
    );
    let mi = sum_uniform_awgn_mi(&[0.25, 4.0]).unwrap();
    assert!((h - noise_entropy() - mi).abs() <= 3.0 * se);
}

#[test]
fn antipodal_mi_matches_monte_carlo() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (h, se) = resubstitution_entropy(
        2_000_000,
        |rng| {
            let x = if rng.random::<bool>() { 1.0 } else { -1.0 };
            x + normal.sample(rng)
        },
        |y| mixture_density(&[-1.0, 1.0], &[0.5, 0.5], y),
    );
    let mi = mixture_awgn_mi(&[-1.0, 1.0], &[0.5, 0.5]).unwrap();
    assert!((h - noise_entropy() - mi).abs() <= 3.0 * se);
}

#[test]
fn epi_floor_and_gaussian_ceiling_for_up_to_four_users() {
    let grid = [0.0, 0.3, 1.0, 4.0, 9.0];
    for k in 1..=4usize {
        for combo in 0..grid.len().pow(k as u32) {
            let powers: Vec<f64> = (0..k)
                .map(|i| grid[combo / grid.len().pow(i as u32) % grid.len()])
                .collect();
            let total: f64 = powers.iter().sum();
            let mi = sum_uniform_awgn_mi(&powers).unwrap();
            assert!(mi >= epi_lower_bound(total).unwrap().tight - 1e-4, "{powers:?}");
            assert!(mi <= half_log2_1p(total) + 1e-4, "{powers:?}");
        }
    }
}

#[test]
fn uniform_loss_never_exceeds_constant() {
    for &p in &[1e-3, 0.1, 1.0, 10.0, 100.0, 1000.0] {
        let mi = sum_uniform_awgn_mi(&[p]).unwrap();
        assert!(half_log2_1p(p) - mi <= epi_constant() + 1e-4, "P={p}");
    }
    // Loss approaches the constant from below at high power (SciPy quad
    // reference: 1.03414 bits at P = 1e4).
    let mi = sum_uniform_awgn_mi(&[1e4]).unwrap();
    assert!((half_log2_1p(1e4) - mi - 1.034_137).abs() < 1e-4);
}

#[test]
fn mixture_below_gaussian_ceiling() {
    for &(a, p) in &[(0.5, 0.5), (2.0, 0.3), (5.0, 0.9)] {
        let points = [-a, a];
        let pmf = [p, 1.0 - p];
        let mean = -a * p + a * (1.0 - p);
        let power = a * a - mean * mean;
        let mi = mixture_awgn_mi(&points, &pmf).unwrap();
        assert!(mi <= half_log2_1p(power) + 1e-4);
    }
}
