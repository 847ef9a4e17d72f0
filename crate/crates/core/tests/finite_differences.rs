mod common;

use hkt_susy::verifier::sample_points;
use hkt_susy::zoo::{names, zoo_get};

#[test]
fn jet_derivatives_match_central_differences_on_the_zoo() {
    for name in names() {
        let entry = zoo_get(name).unwrap();
        for p in sample_points(&entry, 3, 5) {
            let dev = common::finite_difference_deviation(&entry, &p);
            assert!(dev <= 1e-6, "{name} at {p:?}: {dev:e}");
        }
    }
}
