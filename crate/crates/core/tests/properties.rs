mod common;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn graded_bracket_identities(seed in any::<u64>()) {
        let [anti, leibniz, jacobi] = common::algebra_residuals(seed);
        prop_assert!(anti <= 1e-10, "antisymmetry {anti:e}");
        prop_assert!(leibniz <= 1e-10, "leibniz {leibniz:e}");
        prop_assert!(jacobi <= 1e-10, "jacobi {jacobi:e}");
    }
}
