//! Property tests over randomized instances, valuations, and graphs.

mod common;

use common::{enumeration_optimum, random_constrained_graph, stability_corpus_config};
use proptest::prelude::*;
use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::SplitMix64;

use stable_market::value::{int_rational, ratio};
use stable_market::{
    audit_trace, generate, run, solve_constrained_matching, verify, Decrement, FamilyWeights,
    GeneratorConfig, Valuation, Value, DEFAULT_EPS,
};

fn valuation_strategy() -> impl Strategy<Value = Valuation> {
    prop_oneof![
        // Linear with positive rational slope.
        (1i64..9, 1i64..5, -30i64..30, 1i64..5)
            .prop_map(|(an, ad, bn, bd)| Valuation::linear(ratio(an, ad), ratio(bn, bd))),
        // Piecewise-linear with strictly increasing steps.
        (
            -20i64..0,
            prop::collection::vec((1i64..8, 1i64..7, 1i64..4), 1..5),
            -15i64..15,
        )
            .prop_map(|(x0, steps, y0)| {
                let mut x = int_rational(x0);
                let mut y = int_rational(y0);
                let mut points = vec![(x.clone(), y.clone())];
                for (dx, dy_n, dy_d) in steps {
                    x += int_rational(dx);
                    y += ratio(dy_n, dy_d);
                    points.push((x.clone(), y.clone()));
                }
                Valuation::piecewise(points)
            }),
        // Exponential with a*c > 0, both sign branches.
        (1i64..4, -10i64..10, 3i64..9, prop::bool::ANY).prop_map(|(s, b, d, flip)| {
            if flip {
                Valuation::exponential(int_rational(-s), int_rational(b), ratio(-1, d))
            } else {
                Valuation::exponential(int_rational(s), int_rational(b), ratio(1, d))
            }
        }),
    ]
}

proptest! {
    /// Every generated valuation is strictly increasing on integers.
    #[test]
    fn valuations_strictly_increase(v in valuation_strategy()) {
        prop_assert!(v.validate().is_ok());
        for x in -25..25 {
            let lo = v.eval_int(x);
            let hi = v.eval_int(x + 1);
            prop_assert!(
                hi.to_f64() > lo.to_f64(),
                "{v:?} fails to increase at {x}"
            );
        }
    }

    /// The acceptance-ceiling search agrees with a linear scan and sits on
    /// the boundary.
    #[test]
    fn max_acceptable_price_matches_scan(buyer in valuation_strategy(), lower in -10i64..5, width in 0i64..18) {
        let upper = lower + width;
        let inst = one_pair_instance(lower, upper, &buyer);
        let zero = Value::from_int(0);
        let scan = (lower..=upper)
            .rev()
            .find(|&x| inst.evaluate_buyer(0, 0, x).unwrap().ge_eps(&zero, DEFAULT_EPS));
        let got = inst.max_acceptable_price(0, 0, DEFAULT_EPS).unwrap();
        prop_assert_eq!(got, scan);
        if let Some(x) = got {
            prop_assert!(inst.evaluate_buyer(0, 0, x).unwrap().ge_eps(&zero, DEFAULT_EPS));
            if x < upper {
                prop_assert!(inst.evaluate_buyer(0, 0, x + 1).unwrap().lt_eps(&zero, DEFAULT_EPS));
            }
        }
    }

    /// The minimal decrement agrees with a linear scan over all feasible
    /// steps and satisfies the minimality boundary.
    #[test]
    fn min_decrement_matches_scan(
        buyer in valuation_strategy(),
        lower in -8i64..3,
        offset in 0i64..15,
        target_num in -25i64..25,
        target_den in 1i64..4,
    ) {
        let p = lower + offset;
        let inst = one_pair_instance(lower, p.max(lower), &buyer);
        let target = match buyer.is_exact_family() {
            true => Value::Exact(ratio(target_num, target_den)),
            false => Value::Approx(target_num as f64 / target_den as f64),
        };
        let scan = (1..=(p - lower))
            .find(|&m| inst.evaluate_buyer(0, 0, p - m).unwrap().ge_eps(&target, DEFAULT_EPS));
        let got = inst.min_decrement(0, 0, p, &target, DEFAULT_EPS).unwrap();
        match (scan, got) {
            (Some(m), Decrement::Step(found)) => prop_assert_eq!(found, m),
            (None, Decrement::Overflow) => {}
            other => prop_assert!(false, "scan and search disagree: {:?}", other),
        }
    }

    /// Solver agrees with enumeration on random constrained graphs.
    #[test]
    fn matching_agrees_with_enumeration(seed in 0u64..20_000) {
        let mut rng = SplitMix64::seed_from_u64(seed);
        let (graph, required) = random_constrained_graph(&mut rng);
        let got = solve_constrained_matching(&graph, &required, DEFAULT_EPS).unwrap();
        let expected = enumeration_optimum(&graph, &required, DEFAULT_EPS).unwrap();
        prop_assert_eq!(got.edges(), expected.edges());
        for &r in &required {
            prop_assert!(got.right_partner(r).is_some());
        }
    }

    /// Generated instances validate, solve to verified-stable outcomes, and
    /// their traces audit clean.
    #[test]
    fn random_runs_are_stable_and_audit_clean(seed in 0u64..20_000) {
        let inst = generate(&stability_corpus_config(seed)).unwrap();
        prop_assert!(inst.validate().is_clean());
        let (outcome, trace) = run(&inst, DEFAULT_EPS).unwrap();
        let report = verify(&inst, &outcome, DEFAULT_EPS).unwrap();
        prop_assert!(report.is_stable(), "witnesses: {:?}", report.witnesses.first());
        prop_assert!(audit_trace(&inst, &trace.states, DEFAULT_EPS).is_clean());
    }

    /// Instance and outcome serialization round-trips exactly.
    #[test]
    fn serialization_round_trips(seed in 0u64..20_000) {
        let mut config = stability_corpus_config(seed);
        config.num_sellers = 1 + (seed % 3) as usize;
        config.num_buyers = 1 + ((seed / 3) % 3) as usize;
        let inst = generate(&config).unwrap();
        let text = stable_market::io::write_instance(&inst);
        let again = stable_market::io::read_instance(&text).unwrap();
        prop_assert_eq!(&inst, &again);

        let (outcome, trace) = run(&inst, DEFAULT_EPS).unwrap();
        let text = stable_market::io::write_outcome(&inst, &outcome);
        let parsed = stable_market::io::read_outcome(&text, &inst).unwrap();
        prop_assert_eq!(&outcome, &parsed);

        let text = stable_market::io::write_trace(&inst, &trace.states);
        let parsed = stable_market::io::read_trace(&text, &inst).unwrap();
        prop_assert_eq!(&trace.states, &parsed);
    }
}

/// Deterministic generation twice from one config yields identical bytes.
#[test]
fn generation_is_reproducible() {
    for seed in [0u64, 1, 7, 42, 999] {
        let config = GeneratorConfig {
            seed,
            weights: FamilyWeights::default(),
            ..GeneratorConfig::default()
        };
        let a = stable_market::io::write_instance(&generate(&config).unwrap());
        let b = stable_market::io::write_instance(&generate(&config).unwrap());
        assert_eq!(a, b);
    }
}

fn one_pair_instance(lower: i64, upper: i64, buyer: &Valuation) -> stable_market::MarketInstance {
    stable_market::MarketInstance::new(
        vec!["s1".into()],
        vec!["b1".into()],
        vec![stable_market::PairData {
            lower,
            upper,
            seller_valuation: Valuation::linear(int_rational(1), int_rational(0)),
            buyer_valuation: buyer.clone(),
        }],
    )
    .expect("well formed")
}
