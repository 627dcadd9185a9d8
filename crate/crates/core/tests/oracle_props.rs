mod common;

use iwe::{enumerate_from, EvalOptions, Program};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn guards(p: &Program) -> usize {
    match p {
        Program::Skip | Program::Assign(..) => 0,
        Program::Seq(a, b) => guards(a) + guards(b),
        Program::If(_, a, b) => 1 + guards(a).max(guards(b)),
        Program::While(..) => usize::MAX,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mass_is_conserved_and_monotone(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (guard, body) = common::random_loop(&mut rng);
        let prog = Program::seq(common::loop_free(&mut rng, 3), Program::While(guard, Box::new(body)));
        let s = common::state(&mut rng);
        let policy = EvalOptions::default().series;
        let mut prev = None;
        for depth in 0..12 {
            let d = enumerate_from(&prog, &s, depth, &policy).unwrap();
            prop_assert!((d.terminal_mass() + &d.residual).is_one());
            if let Some(prev) = prev.replace(d.clone()) {
                let prev: iwe::SubDistribution = prev;
                prop_assert!(d.residual <= prev.residual);
                for m in &prev.terminal {
                    prop_assert!(d.mass_of(&m.state) >= m.mass);
                }
            }
        }
    }

    #[test]
    fn loop_free_programs_complete(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let prog = common::loop_free(&mut rng, 6);
        let s = common::state(&mut rng);
        let d = enumerate_from(&prog, &s, guards(&prog), &EvalOptions::default().series).unwrap();
        prop_assert!(d.residual.is_zero(), "{} left {} at depth {}", prog, d.residual, guards(&prog));
    }
}
