use privalloc::alloc::{ila_private, IlaParams, ula_nonprivate, ula_private_public_membership};
use privalloc::budget::inequality_variance_bound;
use privalloc::dp::PartialSumsCalibration;
use privalloc::{
    allocation_value, brute_force_opt_value, gini, gini_pairwise, optimal_allocation, random_allocation, regret,
    seeded, treatment_effect, Population, UnitProfile,
};
use proptest::prelude::*;

fn welfare(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, 1..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn effect_is_monotone_and_bounded(a in 0.0f64..=1.0, b in 0.0f64..=1.0, d in 0.001f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (t_lo, t_hi) = (treatment_effect(lo, d).unwrap(), treatment_effect(hi, d).unwrap());
        prop_assert!(t_lo >= t_hi);
        prop_assert!((0.0..=d).contains(&t_lo));
        prop_assert!(lo + t_lo <= 1.0);
    }

    #[test]
    fn regret_is_non_negative(w in welfare(60), d in 0.01f64..=1.0, seed in any::<u64>(), frac in 0.0f64..=1.0) {
        let p = w.len();
        let pop = Population::ungrouped(w, d).unwrap();
        let k = (frac * p as f64) as usize;
        let alloc = random_allocation(p, k, &mut seeded(seed)).unwrap();
        let r = regret(&alloc, &pop, k).unwrap();
        prop_assert!(r.regret >= 0.0);
        prop_assert_eq!(regret(&optimal_allocation(&pop, k).unwrap(), &pop, k).unwrap().regret, 0.0);
    }

    #[test]
    fn sorting_is_optimal(w in welfare(12), d in 0.01f64..=1.0, frac in 0.0f64..=1.0) {
        let p = w.len();
        let pop = Population::ungrouped(w, d).unwrap();
        let k = (frac * p as f64) as usize;
        let value = allocation_value(&optimal_allocation(&pop, k).unwrap(), &pop);
        prop_assert_eq!(value, brute_force_opt_value(&pop, k).unwrap());
    }

    #[test]
    fn gini_formulas_agree(rho in prop::collection::vec(0.0f64..=1.0, 1..40)) {
        prop_assume!(rho.iter().any(|&r| r > 1e-6));
        let a = gini(&rho).unwrap();
        let b = gini_pairwise(&rho).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!((0.0..1.0).contains(&a));
    }

    #[test]
    fn inequality_variance_holds(rho in prop::collection::vec(0.0f64..=1.0, 2..40)) {
        prop_assume!(rho.iter().any(|&r| r > 1e-6));
        let (lhs, rhs) = inequality_variance_bound(&UnitProfile::new(rho).unwrap()).unwrap();
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn unit_allocation_spends_the_budget(
        units in 1usize..12,
        size in 1usize..10,
        seed in any::<u64>(),
        frac in 0.0f64..=1.0,
        psi in prop_oneof![Just(f64::INFINITY), 0.01f64..10.0],
    ) {
        let mut rng = seeded(seed);
        let p = units * size;
        let w: Vec<f64> = (0..p).map(|_| rand::Rng::random_range(&mut rng, 0.0..=1.0)).collect();
        let pop = Population::new(w, size, 0.5).unwrap();
        let k = (frac * p as f64) as usize;
        prop_assert_eq!(ula_nonprivate(&pop, k, &mut rng).unwrap().treated.len(), k.min(p));
        let out = ula_private_public_membership(&pop, k, psi, &mut rng).unwrap();
        prop_assert_eq!(out.treated.len(), k);
        prop_assert_eq!(out.per_unit.iter().sum::<usize>(), k);
    }

    #[test]
    fn calibration_is_monotone_and_within_budget(n in 1usize..2000, psi in 0.01f64..100.0) {
        let c = PartialSumsCalibration::new(n, psi).unwrap();
        prop_assert!(c.satisfies_budget());
        prop_assert!(c.coordinate_std(n - 1) <= c.sigma_max * (1.0 + 1e-12));
        if n > 1 {
            prop_assert!(c.coordinate_std(n / 2) <= c.coordinate_std(n - 1));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn noise_free_threshold_never_exceeds_budget(w in prop::collection::vec(0.0f64..=1.0, 50..300), frac in 0.0f64..=1.0) {
        let p = w.len();
        let k = (frac * p as f64) as usize;
        let pop = Population::ungrouped(w, 0.2).unwrap();
        let params = IlaParams::new(f64::INFINITY, 0.01, 0.0, k, 0.1).unwrap();
        let out = ila_private(&pop, &params, &mut seeded(0)).unwrap();
        prop_assert!(out.within_budget(k));
    }
}
