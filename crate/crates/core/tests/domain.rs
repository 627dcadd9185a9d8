mod common;

use common::checks;
use iwe::{qi, ExtNonNeg, IwValue};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn order_laws(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let vs: Vec<IwValue> = (0..8).map(|_| checks::random_iw(&mut rng)).collect();
        prop_assert_eq!(checks::order_laws(&vs), Ok(()));
    }

    #[test]
    fn sup_is_least_upper_bound(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let set: Vec<IwValue> = (0..4).map(|_| checks::random_iw(&mut rng)).collect();
        let sup = IwValue::sup(&set).unwrap();
        prop_assert!(set.iter().all(|v| v.leq(&sup)));
        prop_assert!(sup.is_canonical());
        for _ in 0..30 {
            let cand = checks::random_iw(&mut rng);
            if set.iter().all(|v| v.leq(&cand)) {
                prop_assert!(sup.leq(&cand), "{sup} is not below upper bound {cand}");
            }
        }
    }
}

#[test]
fn antisymmetry_fails_on_raw_pairs() {
    checks::raw_antisymmetry_failure().unwrap();
    let a = IwValue::new(qi(4), ExtNonNeg::Inf).unwrap();
    assert!(!a.is_canonical());
    assert_eq!(a.canonical(), IwValue::diverged());
}
