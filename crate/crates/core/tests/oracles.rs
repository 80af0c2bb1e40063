use privalloc::alloc::{ila_nonprivate, ila_private, ula_nonprivate, IlaParams};
use privalloc::bounds::gini_baseline;
use privalloc::budget::{classify_regime_sampling, RegimeLabel};
use privalloc::dp::{sqrt_counting_coefficients, toeplitz_apply_direct, toeplitz_apply_fft};
use privalloc::{
    allocation_value, brute_force_opt_value, gini, gini_pairwise, regret, seeded, treatment_effect, Allocation,
    Population, UnitProfile,
};
use rand::Rng;

#[test]
fn treatment_effect_values() {
    assert_eq!(treatment_effect(0.0, 0.3).unwrap(), 0.3);
    assert_eq!(treatment_effect(0.7, 0.3).unwrap(), 0.3);
    assert!((treatment_effect(0.9, 0.3).unwrap() - 0.1).abs() < 1e-15);
    assert_eq!(treatment_effect(1.0, 0.3).unwrap(), 0.0);
    assert!(treatment_effect(0.5, 0.0).is_err());
    assert!(treatment_effect(1.5, 0.2).is_err());
}

#[test]
fn hand_computed_regret() {
    // Effects with delta 0.5: 0.5, 0.5, 0.2, 0.0.
    let pop = Population::ungrouped(vec![0.1, 0.4, 0.8, 1.0], 0.5).unwrap();
    let alloc = Allocation::new(vec![2, 3], 4).unwrap();
    let r = regret(&alloc, &pop, 2).unwrap();
    assert!((r.opt_value - 1.0).abs() < 1e-15);
    assert!((r.value - 0.2).abs() < 1e-15);
    assert!((r.normalized_regret - 1.6).abs() < 1e-12);
    assert!(regret(&alloc, &pop, 1).is_err());
}

#[test]
fn nonprivate_ila_matches_brute_force() {
    let mut rng = seeded(11);
    for _ in 0..200 {
        let p = rng.random_range(1..=14);
        let w: Vec<f64> = (0..p).map(|_| (rng.random_range(0..=10) as f64) / 10.0).collect();
        let pop = Population::ungrouped(w, 0.3).unwrap();
        let k = rng.random_range(0..=p);
        let alloc = ila_nonprivate(&pop, k).unwrap();
        assert_eq!(allocation_value(&alloc, &pop), brute_force_opt_value(&pop, k).unwrap());
    }
}

#[test]
fn gini_of_known_profiles() {
    assert_eq!(gini(&[0.5, 0.5, 0.5]).unwrap(), 0.0);
    // Pairwise: sum |a - b| over ordered pairs = 4, divided by 2 n^2 mean = 2 * 9 * 0.5.
    assert!((gini(&[0.0, 0.5, 1.0]).unwrap() - 4.0 / 9.0).abs() < 1e-12);
    assert!((gini_pairwise(&[0.0, 0.5, 1.0]).unwrap() - 4.0 / 9.0).abs() < 1e-12);
    assert!(gini(&[0.0, 0.0]).is_err());
}

#[test]
fn gini_baseline_example() {
    // rho = [0, 0.5, 1], lowest unit: rho_bar_M - rho_bar_K = 0.5, G M rho_bar / (M - 1) = 1/3.
    let profile = UnitProfile::new(vec![0.0, 0.5, 1.0]).unwrap();
    let (lhs, rhs) = gini_baseline(&profile, 1).unwrap();
    assert!((lhs - 0.5).abs() < 1e-12);
    assert!((rhs - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn toeplitz_routes_agree() {
    let mut rng = seeded(5);
    for n in [1usize, 2, 7, 64, 300, 1025] {
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = toeplitz_apply_direct(&z);
        let b = toeplitz_apply_fft(&z);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "n = {n}: {x} vs {y}");
        }
    }
}

#[test]
fn square_root_factor_squares_to_counting_matrix() {
    let c = sqrt_counting_coefficients(12);
    for i in 0..12 {
        let conv: f64 = (0..=i).map(|j| c[j] * c[i - j]).sum();
        assert!((conv - 1.0).abs() < 1e-12);
    }
}

#[test]
fn noise_free_threshold_is_a_budget_safe_prefix() {
    let w: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
    let pop = Population::ungrouped(w, 0.2).unwrap();
    let params = IlaParams::new(f64::INFINITY, 0.01, 0.0, 30, 0.1).unwrap();
    let out = ila_private(&pop, &params, &mut seeded(1)).unwrap();
    assert!(out.within_budget(30));
    assert!(out.treated.indices().iter().enumerate().all(|(a, &b)| a == b));
    assert!(out.treated.len() >= 29);
}

#[test]
fn unit_allocation_fills_most_needy_units() {
    let w: Vec<f64> = [vec![1.0; 5], vec![0.0; 5], [0.0, 1.0, 0.0, 1.0, 0.0].to_vec()].concat();
    let pop = Population::new(w, 5, 0.5).unwrap();
    let out = ula_nonprivate(&pop, 7, &mut seeded(2)).unwrap();
    assert_eq!(out.per_unit, vec![0, 5, 2]);
    assert_eq!(out.treated.len(), 7);
}

#[test]
fn sampling_regimes_from_thresholds() {
    // k / P = 0.1, rho_bar (1 - G) = 0.5: lambda_low = 0.1, lambda_high = 0.9.
    let r = classify_regime_sampling(0.5, 0.05, 1.0, 100, 1000).unwrap();
    assert!((r.lambda_low - 0.1).abs() < 1e-12);
    assert_eq!(r.label, RegimeLabel::IlaUlaRand);
    assert_eq!(classify_regime_sampling(0.5, 0.5, 1.0, 100, 1000).unwrap().label, RegimeLabel::UlaIlaRand);
    assert_eq!(classify_regime_sampling(0.5, 0.95, 1.0, 100, 1000).unwrap().label, RegimeLabel::UlaOverIlaEqRand);
}
