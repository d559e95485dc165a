mod common;

use common::{check_barrier_case, check_omega_star_sandwich, random_case, KINDS};
use hcg_core::barrier::{omega, omega_star};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn barrier_invariants_hold(seed in any::<u64>(), kind in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = random_case(KINDS[kind], &mut rng);
        let outcome = check_barrier_case(&case, &mut rng);
        prop_assert!(outcome.is_ok(), "{:?}", outcome);
    }

    #[test]
    fn omega_functions_are_convex_and_increasing(a in 0.0f64..0.98, b in 0.0f64..0.98) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(omega(lo).unwrap() <= omega(hi).unwrap() + 1e-15);
        prop_assert!(omega_star(lo).unwrap() <= omega_star(hi).unwrap() + 1e-15);
        let mid = 0.5 * (lo + hi);
        prop_assert!(omega_star(mid).unwrap() <= 0.5 * (omega_star(lo).unwrap() + omega_star(hi).unwrap()) + 1e-15);
        prop_assert!(omega(mid).unwrap() <= 0.5 * (omega(lo).unwrap() + omega(hi).unwrap()) + 1e-15);
    }

    #[test]
    fn omega_is_below_omega_star(tau in 0.0f64..0.99) {
        prop_assert!(omega(tau).unwrap() <= omega_star(tau).unwrap() + 1e-15);
    }
}

#[test]
fn omega_star_sandwich_on_grid() {
    check_omega_star_sandwich(10_000).unwrap();
}

#[test]
fn omega_reference_values() {
    assert!((omega(1.0).unwrap() - 0.306_852_819_440_054_7).abs() < 1e-15);
    assert!((omega_star(0.5).unwrap() - 0.193_147_180_559_945_3).abs() < 1e-15);
    assert!(omega_star(1.0).is_err());
    assert!(omega(-0.1).is_err());
}
