mod common;

use common::checks;
use iwe::{wp_loop_iterate, wp_value, EvalOptions, Expr, ExtNonNeg};
use num_rational::BigRational;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linearity(seed in any::<u64>(), r in 0i64..8) {
        let mut rng = common::rng(seed);
        let prog = common::loop_free(&mut rng, 6);
        let f = Expr::abs(common::mixed_post(&mut rng));
        let g = Expr::abs(common::int_expr(&mut rng, 3));
        let s = common::state(&mut rng);
        prop_assert_eq!(checks::linearity(&prog, &f, &g, &BigRational::new(r.into(), 3.into()), &s), Ok(()));
    }

    #[test]
    fn monotone_in_post(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let prog = common::loop_free(&mut rng, 6);
        let f = Expr::abs(common::mixed_post(&mut rng));
        let g = Expr::add(f.clone(), Expr::abs(common::int_expr(&mut rng, 2)));
        let s = common::state(&mut rng);
        let opts = EvalOptions::default();
        let wf = wp_value(&prog, &f, &s, &opts).unwrap().value;
        let wg = wp_value(&prog, &g, &s, &opts).unwrap().value;
        prop_assert!(wf <= wg, "{} > {}", wf, wg);
    }

    /// The finite-chain shadow of continuity: for an ascending chain, the wp
    /// of its maximum is the maximum of the wps.
    #[test]
    fn finite_chain_continuity(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let prog = common::loop_free(&mut rng, 6);
        let mut chain = vec![Expr::abs(common::mixed_post(&mut rng))];
        for _ in 0..4 {
            let prev = chain.last().unwrap().clone();
            chain.push(Expr::max(prev, Expr::abs(common::int_expr(&mut rng, 2))));
        }
        let s = common::state(&mut rng);
        let opts = EvalOptions::default();
        let wps: Vec<ExtNonNeg> = chain.iter().map(|f| wp_value(&prog, f, &s, &opts).unwrap().value).collect();
        prop_assert!(wps.windows(2).all(|w| w[0] <= w[1]));
        let top = wp_value(&prog, chain.last().unwrap(), &s, &opts).unwrap().value;
        prop_assert_eq!(&top, wps.iter().max().unwrap());
    }

    #[test]
    fn iterates_ascend(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (guard, body) = common::random_loop(&mut rng);
        let f = Expr::abs(common::loop_post(&mut rng));
        let s = common::loop_state(&mut rng);
        let opts = EvalOptions::default();
        let mut prev = ExtNonNeg::zero();
        for n in 0..=15 {
            let v = wp_loop_iterate(&guard, &body, &f, &s, n, &opts).unwrap();
            prop_assert!(prev <= v, "iterate {} fell from {} to {}", n, prev, v);
            prev = v;
        }
    }
}
